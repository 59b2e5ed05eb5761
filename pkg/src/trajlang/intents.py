"""Structured command semantics and the template grammar.

A :class:`ModificationIntent` captures what a command asks for: the family
(cartesian shift, distance change relative to an object, or speed change),
its direction or polarity, an intensity multiplier, and the optional target
object.  ``render_text`` turns an intent into a natural-language command from
a closed phrase bank; ``parse_intent`` inverts it, and the two round-trip
exactly over the whole grammar.

The locality factor rides along on the intent but is *not* expressed in text,
so it is excluded from intent equality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Scene

DIRECTIONS = ("left", "right", "up", "down", "front", "back")
INTENSITIES = (1.5, 1.0, 0.7)

# surface word -> canonical direction
_DIRECTION_WORDS = {
    "left": "left", "right": "right",
    "up": "up", "top": "up",
    "down": "down", "bottom": "down",
    "front": "front", "back": "back",
}
# canonical direction -> surface words used when rendering
_DIRECTION_SURFACE = {
    "left": ["left"], "right": ["right"],
    "up": ["up", "top"], "down": ["down", "bottom"],
    "front": ["front"], "back": ["back"],
}

_STRONG_WORDS = ["very", "much", "a lot"]
_WEAK_WORDS = ["a bit", "a little"]

_MOTION_VERBS = ["pass", "drive", "walk", "go"]
_SPEED_VERBS = ["go", "drive", "walk"]

_LOCALITY_CLAUSES = [
    "when passing near the {obj}",
    "while passing nearby the {obj}",
    "when passing in the proximity of the {obj}",
    "while passing close to the {obj}",
    "when passing in the surrounding of the {obj}",
    "in the proximity of the {obj}",
    "when next to the {obj}",
]

_LOCALITY_MARKERS = {"near", "nearby", "proximity", "surrounding", "surroundings",
                     "close", "next"}


class ParseError(ValueError):
    """Raised when a command cannot be mapped to an intent."""

    def __init__(self, text: str, span: str, reason: str):
        self.span = span
        super().__init__(f"cannot parse {span!r} in {text!r}: {reason}")


@dataclass(frozen=True)
class ModificationIntent:
    """Structured meaning of one command.

    ``kind`` is one of cartesian / distance / speed_global / speed_local.
    ``locality_factor`` scales the spatial range of targeted fields; it is
    supplied out-of-band (slider, dataset column), never encoded in the text,
    and therefore does not participate in equality.
    """

    kind: str
    direction: str | None = None
    polarity: str | None = None
    intensity: float = 1.0
    target: str | None = None
    locality_factor: float = field(default=1.0, compare=False)

    def __post_init__(self):
        if self.kind not in ("cartesian", "distance", "speed_global", "speed_local"):
            raise ValueError(f"unknown intent kind {self.kind!r}")
        if self.intensity not in INTENSITIES:
            raise ValueError(f"intensity must be one of {INTENSITIES}, got {self.intensity}")
        if not 0.0 <= self.locality_factor <= 1.0:
            raise ValueError(f"locality factor must be in [0, 1], got {self.locality_factor}")
        if self.kind == "cartesian":
            if self.direction not in DIRECTIONS:
                raise ValueError(f"cartesian intent needs a direction, got {self.direction!r}")
            if self.target is not None:
                raise ValueError("cartesian intents take no target")
        elif self.kind == "distance":
            if self.polarity not in ("closer", "further"):
                raise ValueError(f"distance polarity must be closer/further, got {self.polarity!r}")
            if not self.target:
                raise ValueError("distance intents need a target object")
        else:
            if self.polarity not in ("faster", "slower"):
                raise ValueError(f"speed polarity must be faster/slower, got {self.polarity!r}")
            if self.kind == "speed_local" and not self.target:
                raise ValueError("localized speed intents need a target object")
            if self.kind == "speed_global" and self.target is not None:
                raise ValueError("global speed intents take no target")

    @property
    def family(self) -> str:
        return "speed" if self.kind.startswith("speed") else self.kind

    def with_locality(self, lf: float) -> "ModificationIntent":
        return replace(self, locality_factor=lf)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "direction": self.direction,
                "polarity": self.polarity, "intensity": self.intensity,
                "target": self.target, "locality_factor": self.locality_factor}

    @classmethod
    def from_dict(cls, d: dict) -> "ModificationIntent":
        return cls(kind=d["kind"], direction=d.get("direction"),
                   polarity=d.get("polarity"), intensity=d.get("intensity", 1.0),
                   target=d.get("target"),
                   locality_factor=d.get("locality_factor", 1.0))


# ---------------------------------------------------------------------------
# rendering

def _adjective(intensity: float, rng: np.random.Generator) -> str:
    if intensity == 1.0:
        return ""
    bank = _STRONG_WORDS if intensity == 1.5 else _WEAK_WORDS
    return str(bank[rng.integers(len(bank))]) + " "


def _pick(bank: list[str], rng: np.random.Generator) -> str:
    return str(bank[rng.integers(len(bank))])


def _render_cartesian(intent: ModificationIntent, rng: np.random.Generator) -> str:
    direction = _pick(_DIRECTION_SURFACE[intent.direction], rng)
    if intent.intensity == 1.0:
        bank = [
            "go to the {dir}",
            "drive to the {dir}",
            "walk to the {dir}",
            "go more to the {dir}",
            "stay on the {dir}",
            "stay on the {dir} part",
            "stay on the {dir} side",
        ]
        return _pick(bank, rng).format(dir=direction)
    adj = _pick(["much", "a lot"], rng) if intent.intensity == 1.5 else _pick(_WEAK_WORDS, rng)
    verb = _pick(_SPEED_VERBS, rng)
    return f"{verb} {adj} more to the {direction}"


def _render_distance(intent: ModificationIntent, rng: np.random.Generator) -> str:
    verb = _pick(_MOTION_VERBS, rng)
    adj = _adjective(intent.intensity, rng)
    # "keep a much smaller distance" reads fine; "a bit" already carries its
    # own article so the keep-template drops the leading "a" for it.
    keep_adj = {1.0: "a ", 1.5: "a much ", 0.7: "a bit "}[intent.intensity]
    size = "smaller" if intent.polarity == "closer" else "larger"
    if intent.polarity == "closer":
        bank = [
            f"{verb} {adj}closer to the {{obj}}",
            f"keep {keep_adj}{size} distance from the {{obj}}",
        ]
    else:
        bank = [
            f"{verb} {adj}further away from the {{obj}}",
            f"{verb} {adj}further from the {{obj}}",
            f"keep {keep_adj}{size} distance from the {{obj}}",
        ]
    return _pick(bank, rng).format(obj=intent.target)


def _speed_base(intent: ModificationIntent, rng: np.random.Generator) -> str:
    if intent.intensity == 1.0 and rng.random() < 0.4:
        if intent.polarity == "faster":
            return _pick(["increase the speed", "increase the velocity"], rng)
        return _pick(["decrease the speed", "reduce the velocity"], rng)
    verb = _pick(_SPEED_VERBS, rng)
    adj = _adjective(intent.intensity, rng)
    return f"{verb} {adj}{intent.polarity}"


def render_text(intent: ModificationIntent, rng: np.random.Generator) -> str:
    """Sample one command string realizing ``intent`` from the phrase bank."""
    if intent.kind == "cartesian":
        return _render_cartesian(intent, rng)
    if intent.kind == "distance":
        return _render_distance(intent, rng)
    base = _speed_base(intent, rng)
    if intent.kind == "speed_global":
        return base
    clause = _pick(_LOCALITY_CLAUSES, rng)
    return f"{base} {clause.format(obj=intent.target)}"


# ---------------------------------------------------------------------------
# parsing

def tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def _scan_intensity(tokens: list[str]) -> float:
    joined = " ".join(tokens)
    for word in _WEAK_WORDS:
        if re.search(rf"\b{word}\b", joined):
            return 0.7
    for word in _STRONG_WORDS:
        if re.search(rf"\b{word}\b", joined):
            return 1.5
    return 1.0


def _extract_target(text: str, tokens: list[str], scene: Scene | None) -> str:
    if scene is not None:
        joined = " ".join(tokens)
        matches = [name for name in scene.names()
                   if re.search(rf"\b{re.escape(' '.join(tokenize(name)))}\b", joined)]
        if matches:
            return max(matches, key=lambda n: len(" ".join(tokenize(n))))
        raise ParseError(text, text, "no scene object matches the command target")
    if "the" not in tokens:
        raise ParseError(text, text, "no target object phrase found")
    last = len(tokens) - 1 - tokens[::-1].index("the")
    target = " ".join(tokens[last + 1:])
    if not target:
        raise ParseError(text, text, "empty target after 'the'")
    return target


def parse_intent(text: str, scene: Scene | None = None) -> ModificationIntent:
    """Map a templated command back to its structured intent.

    When a ``scene`` is supplied the target is resolved by longest match
    against the scene's object names; otherwise the trailing noun phrase is
    taken verbatim.
    """
    if not text or not text.strip():
        raise ParseError(text, text, "empty command")
    tokens = tokenize(text)
    tokset = set(tokens)
    intensity = _scan_intensity(tokens)

    if "closer" in tokset or ("smaller" in tokset and "distance" in tokset):
        target = _extract_target(text, tokens, scene)
        return ModificationIntent(kind="distance", polarity="closer",
                                  intensity=intensity, target=target)
    if ("further" in tokset or "farther" in tokset
            or (("larger" in tokset or "greater" in tokset) and "distance" in tokset)):
        target = _extract_target(text, tokens, scene)
        return ModificationIntent(kind="distance", polarity="further",
                                  intensity=intensity, target=target)

    speedish = tokset & {"faster", "slower", "speed", "velocity"}
    if speedish:
        if "faster" in tokset or "increase" in tokset or "raise" in tokset:
            polarity = "faster"
        elif "slower" in tokset or "decrease" in tokset or "reduce" in tokset or "lower" in tokset:
            polarity = "slower"
        else:
            raise ParseError(text, " ".join(sorted(speedish)),
                             "speed command without a faster/slower cue")
        if tokset & _LOCALITY_MARKERS:
            target = _extract_target(text, tokens, scene)
            return ModificationIntent(kind="speed_local", polarity=polarity,
                                      intensity=intensity, target=target)
        return ModificationIntent(kind="speed_global", polarity=polarity,
                                  intensity=intensity)

    for tok in tokens:
        if tok in _DIRECTION_WORDS:
            return ModificationIntent(kind="cartesian",
                                      direction=_DIRECTION_WORDS[tok],
                                      intensity=intensity)

    raise ParseError(text, text, "no direction, distance, or speed cue recognized")


def grammar_words() -> set[str]:
    """Every token the grammar can emit; used to seed the encoder vocabulary."""
    words = set()
    for bank in (_MOTION_VERBS, _SPEED_VERBS, _STRONG_WORDS, _WEAK_WORDS,
                 _LOCALITY_CLAUSES):
        for item in bank:
            words.update(tokenize(item.replace("{obj}", "").replace("{dir}", "")))
    words.update(_DIRECTION_WORDS)
    words.update(["stay", "keep", "to", "on", "the", "more", "part", "side",
                  "away", "from", "closer", "further", "farther", "distance",
                  "smaller", "larger", "greater", "faster", "slower", "speed",
                  "velocity", "increase", "decrease", "reduce", "raise", "lower"])
    return words
