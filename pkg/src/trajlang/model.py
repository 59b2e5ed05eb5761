"""Multimodal autoregressive transformer for trajectory reshaping.

Waypoints and object poses (speed slot zeroed) share a no-bias linear
projection into the model depth, get learned positional embeddings, and pass
through one self-attention encoder block.  The decoder runs five blocks of
masked self-attention, cross-attention over the encoder memory extended with
one linearly projected feature token, and a two-layer MLP.  A three-hidden-
layer MLP with a tanh head maps every decoder step back to (x, y, z, v), so
outputs always land inside the normalized workspace.

The feature-residual variant additionally concatenates the conditioning
vector to each decoder output right before the head, which changes the
parameter count but no interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

NEG_MASK = -1e9   # finite stand-in for -inf; exp underflows to exactly 0


@dataclass(frozen=True)
class ModelConfig:
    """Every architecture hyperparameter, with toy and full presets."""

    depth: int = 64
    heads: int = 8
    encoder_blocks: int = 1
    decoder_blocks: int = 5
    block_hidden: int = 128
    output_hidden: int = 128
    output_layers: int = 3
    max_tokens: int = 100
    n_waypoints: int = 40
    max_objects: int = 6
    d_sem: int = 64
    lf_enabled: bool = False
    feature_residual: bool = False

    def __post_init__(self):
        if self.depth % self.heads != 0:
            raise ValueError(f"depth {self.depth} not divisible by heads {self.heads}")
        if self.n_waypoints + self.max_objects > self.max_tokens:
            raise ValueError(
                f"n_waypoints + max_objects = {self.n_waypoints + self.max_objects} "
                f"exceeds the {self.max_tokens}-token positional budget")
        for field_name in ("depth", "heads", "encoder_blocks", "decoder_blocks",
                           "block_hidden", "output_hidden", "output_layers",
                           "n_waypoints", "max_objects", "d_sem"):
            if getattr(self, field_name) < 1:
                raise ValueError(f"{field_name} must be >= 1")

    @property
    def feature_dim(self) -> int:
        return self.max_objects + self.d_sem + (1 if self.lf_enabled else 0)

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        return cls(**overrides)

    @classmethod
    def full_scale(cls, **overrides) -> "ModelConfig":
        base = cls(depth=400, block_hidden=512, output_hidden=512, d_sem=768)
        return replace(base, **overrides) if overrides else base

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _causal_mask(t: int, dtype) -> np.ndarray:
    mask = np.triu(np.full((t, t), NEG_MASK, dtype=dtype), k=1)
    return mask[None, None]


class TrajectoryTransformer:
    """The network, parameterized by a flat named-tensor dictionary."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        self._rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        self._build()

    # -- construction -------------------------------------------------------

    def _xavier(self, name: str, fan_in: int, fan_out: int) -> None:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        data = self._rng.uniform(-limit, limit, size=(fan_in, fan_out))
        self.params[name] = Tensor(data.astype(self.dtype), requires_grad=True,
                                   name=name)

    def _zeros(self, name: str, shape) -> None:
        self.params[name] = Tensor(np.zeros(shape, dtype=self.dtype),
                                   requires_grad=True, name=name)

    def _ones(self, name: str, shape) -> None:
        self.params[name] = Tensor(np.ones(shape, dtype=self.dtype),
                                   requires_grad=True, name=name)

    def _embedding(self, name: str, rows: int, cols: int) -> None:
        data = self._rng.normal(0.0, 0.02, size=(rows, cols))
        self.params[name] = Tensor(data.astype(self.dtype), requires_grad=True,
                                   name=name)

    def _attention_params(self, prefix: str) -> None:
        d = self.config.depth
        for part in ("wq", "wk", "wv", "wo"):
            self._xavier(f"{prefix}.{part}", d, d)
        for part in ("bq", "bk", "bv", "bo"):
            self._zeros(f"{prefix}.{part}", (d,))

    def _mlp_params(self, prefix: str) -> None:
        d, h = self.config.depth, self.config.block_hidden
        self._xavier(f"{prefix}.w1", d, h)
        self._zeros(f"{prefix}.b1", (h,))
        self._xavier(f"{prefix}.w2", h, d)
        self._zeros(f"{prefix}.b2", (d,))

    def _norm_params(self, prefix: str) -> None:
        d = self.config.depth
        self._ones(f"{prefix}.gain", (d,))
        self._zeros(f"{prefix}.bias", (d,))

    def _build(self) -> None:
        cfg = self.config
        d = cfg.depth
        self._xavier("enc.proj", 4, d)                       # dense, no bias
        self._embedding("enc.pos", cfg.max_tokens, d)
        self._embedding("enc.null_object", 1, d)
        for i in range(cfg.encoder_blocks):
            self._attention_params(f"enc.b{i}.attn")
            self._norm_params(f"enc.b{i}.ln1")
            self._mlp_params(f"enc.b{i}.mlp")
            self._norm_params(f"enc.b{i}.ln2")
        self._xavier("dec.proj", 4, d)                       # dense, no bias
        self._embedding("dec.pos", cfg.max_tokens, d)
        self._embedding("dec.start", 1, d)
        self._xavier("feat.proj.w", cfg.feature_dim, d)
        self._zeros("feat.proj.b", (d,))
        for i in range(cfg.decoder_blocks):
            self._attention_params(f"dec.b{i}.self")
            self._norm_params(f"dec.b{i}.ln1")
            self._attention_params(f"dec.b{i}.cross")
            self._norm_params(f"dec.b{i}.ln2")
            self._mlp_params(f"dec.b{i}.mlp")
            self._norm_params(f"dec.b{i}.ln3")
        head_in = d + (cfg.feature_dim if cfg.feature_residual else 0)
        widths = [head_in] + [cfg.output_hidden] * cfg.output_layers
        for i in range(cfg.output_layers):
            self._xavier(f"head.w{i + 1}", widths[i], widths[i + 1])
            self._zeros(f"head.b{i + 1}", (widths[i + 1],))
        self._xavier("head.out_w", widths[-1], 4)
        self._zeros("head.out_b", (4,))

    # -- forward pieces -----------------------------------------------------

    def _linear(self, x: Tensor, w: str, b: str | None = None) -> Tensor:
        out = ad.matmul(x, self.params[w])
        if b is not None:
            out = ad.add(out, self.params[b])
        return out

    def _split_heads(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        h = self.config.heads
        return ad.transpose(ad.reshape(x, (b, t, h, d // h)), (0, 2, 1, 3))

    def _merge_heads(self, x: Tensor) -> Tensor:
        b, h, t, hd = x.shape
        return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (b, t, h * hd))

    def _attention(self, prefix: str, q_in: Tensor, kv_in: Tensor,
                   mask: np.ndarray | None = None,
                   record: list | None = None) -> Tensor:
        head_dim = self.config.depth // self.config.heads
        q = self._split_heads(self._linear(q_in, f"{prefix}.wq", f"{prefix}.bq"))
        k = self._split_heads(self._linear(kv_in, f"{prefix}.wk", f"{prefix}.bk"))
        v = self._split_heads(self._linear(kv_in, f"{prefix}.wv", f"{prefix}.bv"))
        scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(head_dim))
        if mask is not None:
            scores = ad.add(scores, Tensor(mask.astype(self.dtype)))
        attn = ad.softmax(scores, axis=-1)
        if record is not None:
            record.append(np.array(attn.data, copy=True))
        ctx = self._merge_heads(ad.matmul(attn, v))
        return self._linear(ctx, f"{prefix}.wo", f"{prefix}.bo")

    def _post_norm(self, prefix: str, x: Tensor, sub: Tensor) -> Tensor:
        return ad.layer_norm(ad.add(x, sub),
                             self.params[f"{prefix}.gain"],
                             self.params[f"{prefix}.bias"])

    def _block_mlp(self, prefix: str, x: Tensor) -> Tensor:
        h = ad.relu(self._linear(x, f"{prefix}.w1", f"{prefix}.b1"))
        return self._linear(h, f"{prefix}.w2", f"{prefix}.b2")

    def _positions(self, table: str, length: int) -> Tensor:
        return ad.embedding_lookup(self.params[table], np.arange(length))

    def encode_geometry(self, geo: np.ndarray, present: np.ndarray,
                        record: list | None = None) -> Tensor:
        """(B, N + M_max, 4) tokens -> (B, N + M_max, depth) memory.

        ``present`` flags real rows; absent object slots are replaced by the
        learned null token after projection.
        """
        geo = np.asarray(geo, dtype=self.dtype)
        b, length, four = geo.shape
        if four != 4:
            raise ValueError(f"geometry tokens must be (B, L, 4), got {geo.shape}")
        proj = ad.matmul(Tensor(geo), self.params["enc.proj"])
        pres = Tensor(present.astype(self.dtype)[:, :, None])
        null = ad.reshape(self.params["enc.null_object"], (1, 1, self.config.depth))
        x = ad.add(ad.mul(proj, pres), ad.mul(null, 1.0 - pres))
        x = ad.add(x, self._positions("enc.pos", length))
        for i in range(self.config.encoder_blocks):
            attn = self._attention(f"enc.b{i}.attn", x, x, record=record)
            x = self._post_norm(f"enc.b{i}.ln1", x, attn)
            x = self._post_norm(f"enc.b{i}.ln2", x, self._block_mlp(f"enc.b{i}.mlp", x))
        return x

    def _feature_token(self, features: Tensor) -> Tensor:
        tok = self._linear(features, "feat.proj.w", "feat.proj.b")
        b, d = tok.shape
        return ad.reshape(tok, (b, 1, d))

    def _embed_decoder(self, prev: np.ndarray | None, batch: int) -> Tensor:
        """[start token | projected waypoints] + positional embeddings."""
        d = self.config.depth
        start = ad.reshape(self.params["dec.start"], (1, 1, d))
        start = ad.add(start, Tensor(np.zeros((batch, 1, d), dtype=self.dtype)))
        if prev is None or prev.shape[1] == 0:
            x = start
        else:
            emb = ad.matmul(Tensor(np.asarray(prev, dtype=self.dtype)),
                            self.params["dec.proj"])
            x = ad.concat([start, emb], axis=1)
        return ad.add(x, self._positions("dec.pos", x.shape[1]))

    def _decode(self, x: Tensor, memory: Tensor, features: Tensor,
                record_self: list | None = None,
                record_cross: list | None = None) -> Tensor:
        full_memory = ad.concat([memory, self._feature_token(features)], axis=1)
        mask = _causal_mask(x.shape[1], self.dtype)
        for i in range(self.config.decoder_blocks):
            block_self = [] if record_self is not None else None
            block_cross = [] if record_cross is not None else None
            attn = self._attention(f"dec.b{i}.self", x, x, mask=mask,
                                   record=block_self)
            x = self._post_norm(f"dec.b{i}.ln1", x, attn)
            cross = self._attention(f"dec.b{i}.cross", x, full_memory,
                                    record=block_cross)
            x = self._post_norm(f"dec.b{i}.ln2", x, cross)
            x = self._post_norm(f"dec.b{i}.ln3", x, self._block_mlp(f"dec.b{i}.mlp", x))
            if record_self is not None:
                record_self.append(block_self[0])
            if record_cross is not None:
                record_cross.append(block_cross[0])
        return x

    def _head(self, x: Tensor, features: Tensor) -> Tensor:
        if self.config.feature_residual:
            b, t, _ = x.shape
            f = features.shape[-1]
            tiled = ad.add(ad.reshape(features, (b, 1, f)),
                           Tensor(np.zeros((b, t, f), dtype=self.dtype)))
            x = ad.concat([x, tiled], axis=-1)
        for i in range(self.config.output_layers):
            x = ad.relu(self._linear(x, f"head.w{i + 1}", f"head.b{i + 1}"))
        return ad.tanh(self._linear(x, "head.out_w", "head.out_b"))

    # -- public passes ------------------------------------------------------

    def forward_teacher_forced(self, geo: np.ndarray, present: np.ndarray,
                               features: Tensor, target: np.ndarray,
                               collect_attention: bool = False):
        """Predict every waypoint given the shifted ground truth.

        Returns (prediction Tensor (B, N, 4), Huber loss Tensor, attention
        dict or None).
        """
        target = np.asarray(target, dtype=self.dtype)
        b, n, _ = target.shape
        if n != self.config.n_waypoints:
            raise ValueError(f"target has {n} waypoints, config expects "
                             f"{self.config.n_waypoints}")
        rec_enc = [] if collect_attention else None
        rec_self = [] if collect_attention else None
        rec_cross = [] if collect_attention else None
        memory = self.encode_geometry(geo, present, record=rec_enc)
        x = self._embed_decoder(target[:, :-1], b)
        x = self._decode(x, memory, features, rec_self, rec_cross)
        pred = self._head(x, features)
        loss = ad.huber_loss(pred, Tensor(target))
        attn = None
        if collect_attention:
            attn = {"encoder": rec_enc, "decoder_self": rec_self,
                    "decoder_cross": rec_cross}
        return pred, loss, attn

    def generate(self, geo: np.ndarray, present: np.ndarray, features: Tensor,
                 collect_attention: bool = False):
        """Autoregressive decode: greedy, exactly N steps, deterministic.

        Returns (trajectories (B, N, 4) ndarray, attention dict or None) with
        attention taken from the final full-length pass.
        """
        b = geo.shape[0]
        n = self.config.n_waypoints
        memory = self.encode_geometry(geo, present)
        out = np.zeros((b, 0, 4), dtype=self.dtype)
        for _ in range(n):
            x = self._embed_decoder(out, b)
            h = self._decode(x, memory, features)
            step = self._head(h, features)
            out = np.concatenate([out, step.data[:, -1:]], axis=1)
        attn = None
        if collect_attention:
            rec_enc, rec_self, rec_cross = [], [], []
            self.encode_geometry(geo, present, record=rec_enc)
            x = self._embed_decoder(out[:, :-1], b)
            self._decode(x, memory, features, rec_self, rec_cross)
            attn = {"encoder": rec_enc, "decoder_self": rec_self,
                    "decoder_cross": rec_cross}
        return out, attn

    # -- parameter plumbing -------------------------------------------------

    def count_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: np.array(v.data, copy=True) for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)}, "
                             f"unexpected={sorted(extra)}")
        for k, tensor in self.params.items():
            arr = np.asarray(state[k])
            if arr.shape != tensor.shape:
                raise ValueError(f"parameter {k!r} shape {arr.shape} does not "
                                 f"match expected {tensor.shape}")
            tensor.data = arr.astype(self.dtype, copy=True)
            tensor.grad = None


def build_geometry_tokens(trajs, scenes, max_objects: int):
    """Stack trajectories and zero-speed object poses into (B, N + M_max, 4)
    token arrays plus the matching presence mask."""
    geos, masks = [], []
    for traj, scene in zip(trajs, scenes):
        n = len(traj)
        rows = np.zeros((n + max_objects, 4))
        rows[:n] = traj.points
        mask = np.zeros(n + max_objects)
        mask[:n] = 1.0
        if len(scene) > max_objects:
            raise ValueError(f"scene has {len(scene)} objects, limit {max_objects}")
        for j, obj in enumerate(scene.objects):
            rows[n + j, :3] = obj.position
            mask[n + j] = 1.0
        geos.append(rows)
        masks.append(mask)
    return np.stack(geos), np.stack(masks)
