"""Language and context encoding.

Turns a command string and a scene into the conditioning vector the network
consumes: a text embedding (trainable surrogate for a frozen language model,
or exact-match import of precomputed vectors), a cosine-similarity vector
against the scene's object names, and their concatenation, optionally with
the locality factor appended.

Feature layout: [similarity (M_max) | text features (D_sem) | lf (0 or 1)].
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError, Tensor
from .geometry import Scene
from .intents import grammar_words, tokenize
from .labels import OBJECT_NAMES

DEFAULT_D_SEM = 64
MAX_TEXT_TOKENS = 100

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_COSINE_EPS = 1e-8


def _filler_words() -> list[str]:
    text = resources.files("trajlang").joinpath("data/filler_words.txt").read_text()
    return [w.strip() for w in text.splitlines() if w.strip()]


class Vocabulary:
    """Fixed token inventory; id 0 pads, id 1 absorbs out-of-vocabulary."""

    def __init__(self, tokens):
        ordered = sorted(set(tokens) - {PAD_TOKEN, UNK_TOKEN})
        self.tokens = [PAD_TOKEN, UNK_TOKEN] + ordered
        self._ids = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    @classmethod
    def default(cls) -> "Vocabulary":
        words: set[str] = set(grammar_words())
        for name in OBJECT_NAMES:
            words.update(tokenize(name))
        words.update(_filler_words())
        return cls(words)

    def encode(self, text: str, max_tokens: int = MAX_TEXT_TOKENS) -> np.ndarray:
        """Token ids, unknown words mapped to UNK, zero-padded to max_tokens."""
        ids = [self._ids.get(t, 1) for t in tokenize(text)[:max_tokens]]
        out = np.zeros(max_tokens, dtype=np.int64)
        out[:len(ids)] = ids
        return out


class TrainableTextEncoder:
    """Mean-pooled token embeddings over a fixed vocabulary.

    The table is a trainable parameter, so the text representation is learned
    jointly with the rest of the network.
    """

    mode = "trainable"

    def __init__(self, dim: int = DEFAULT_D_SEM, vocab: Vocabulary | None = None,
                 seed: int = 0, dtype=np.float32):
        self.dim = dim
        self.vocab = vocab if vocab is not None else Vocabulary.default()
        rng = np.random.default_rng(seed)
        table = rng.normal(0.0, 0.02, size=(len(self.vocab), dim))
        self.table = Tensor(table.astype(dtype), requires_grad=True,
                            name="text_embedding")

    @property
    def params(self) -> dict[str, Tensor]:
        return {"text_embedding": self.table}

    def encode(self, texts: list[str]) -> Tensor:
        """(B, dim) mean of non-pad token vectors per text."""
        if isinstance(texts, str):
            raise TypeError("encode expects a list of strings")
        for t in texts:
            if not t or not t.strip():
                raise ValueError("cannot encode empty text")
        ids = np.stack([self.vocab.encode(t) for t in texts])
        mask = (ids != 0).astype(self.table.dtype)
        counts = np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
        emb = ad.embedding_lookup(self.table, ids)          # (B, T, D)
        masked = ad.mul(emb, Tensor(mask[:, :, None]))
        return ad.div(ad.tsum(masked, axis=1), Tensor(counts))


class ImportedTextEncoder:
    """Exact-match lookup of precomputed embeddings.

    File format: JSON lines of {"text": str, "embedding": [floats]}; lets
    genuine pretrained-model vectors be produced offline and plugged in.
    """

    mode = "import"

    def __init__(self, table: dict[str, np.ndarray]):
        if not table:
            raise ValueError("imported embedding table is empty")
        dims = {v.shape[0] for v in table.values()}
        if len(dims) != 1:
            raise ValueError(f"imported embeddings have mixed dimensions: {sorted(dims)}")
        self.table = table
        self.dim = dims.pop()

    @classmethod
    def from_jsonl(cls, path) -> "ImportedTextEncoder":
        table = {}
        with open(path) as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                table[rec["text"]] = np.asarray(rec["embedding"], dtype=np.float32)
        return cls(table)

    @property
    def params(self) -> dict[str, Tensor]:
        return {}

    def encode(self, texts: list[str]) -> Tensor:
        if isinstance(texts, str):
            raise TypeError("encode expects a list of strings")
        missing = [t for t in texts if t not in self.table]
        if missing:
            raise KeyError(f"no imported embedding for text(s): {missing}")
        return Tensor(np.stack([self.table[t] for t in texts]))


def object_similarity(encoder, text_emb: Tensor, scene: Scene,
                      max_objects: int) -> Tensor:
    """(1, max_objects) cosine similarities, zero-padded for absent slots."""
    if len(scene) > max_objects:
        raise ValueError(f"scene has {len(scene)} objects, limit is {max_objects}")
    if float(np.linalg.norm(text_emb.data)) == 0.0:
        raise NumericError("text embedding has zero norm; cosine undefined")
    flat = ad.reshape(text_emb, (1, -1))
    if len(scene) == 0:
        return Tensor(np.zeros((1, max_objects), dtype=flat.dtype))
    name_emb = encoder.encode(scene.names())                  # (M, D)
    dots = ad.tsum(ad.mul(flat, name_emb), axis=-1)           # (M,)
    tn = ad.sqrt(ad.tsum(ad.mul(flat, flat)))
    nn = ad.sqrt(ad.tsum(ad.mul(name_emb, name_emb), axis=-1))
    sims = ad.div(dots, ad.mul(tn, nn) + _COSINE_EPS)
    sims = ad.reshape(sims, (1, len(scene)))
    if len(scene) == max_objects:
        return sims
    pad = Tensor(np.zeros((1, max_objects - len(scene)), dtype=sims.dtype))
    return ad.concat([sims, pad], axis=1)


def build_feature_embedding(encoder, text: str, scene: Scene,
                            lf: float | None = None,
                            max_objects: int = 6) -> Tensor:
    """(1, F) conditioning vector for a single command."""
    text_emb = encoder.encode([text])                         # (1, D)
    sims = object_similarity(encoder, text_emb, scene, max_objects)
    parts = [sims, text_emb]
    if lf is not None:
        if not 0.0 <= lf <= 1.0:
            raise ValueError(f"locality factor must be in [0, 1], got {lf}")
        parts.append(Tensor(np.full((1, 1), lf, dtype=text_emb.dtype)))
    return ad.concat(parts, axis=1)


def build_feature_batch(encoder, texts: list[str], scenes: list[Scene],
                        lfs: list[float] | None = None,
                        max_objects: int = 6) -> Tensor:
    """(B, F) stacked feature embeddings."""
    if lfs is not None and len(lfs) != len(texts):
        raise ValueError("lfs must align with texts")
    rows = [build_feature_embedding(encoder, t, s,
                                    None if lfs is None else lfs[i],
                                    max_objects)
            for i, (t, s) in enumerate(zip(texts, scenes))]
    return ad.concat(rows, axis=0)


def feature_length(d_sem: int, max_objects: int, lf_enabled: bool) -> int:
    return max_objects + d_sem + (1 if lf_enabled else 0)
