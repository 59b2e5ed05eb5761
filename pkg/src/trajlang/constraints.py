"""Hard workspace constraints and the raycast projection step.

The admissible region is one closed keep-in box minus a set of open keep-out
boxes (their strict interiors), so box boundaries themselves are admissible
and "stop before entering" is well defined.  Projection marches every
waypoint from its original position straight toward its modified position in
fixed-length steps and freezes it at the last admissible sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Trajectory

DEFAULT_MARCH_STEP = 0.01


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by two corners."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError(f"box corners must be length 3, got {lo.shape}/{hi.shape}")
        if (lo > hi).any():
            raise ValueError(f"box min corner {lo.tolist()} exceeds max {hi.tolist()}")
        object.__setattr__(self, "lo", tuple(float(c) for c in lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in hi))

    def contains_closed(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        return ((p >= np.asarray(self.lo)) & (p <= np.asarray(self.hi))).all(axis=-1)

    def contains_open(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        return ((p > np.asarray(self.lo)) & (p < np.asarray(self.hi))).all(axis=-1)

    def to_pair(self) -> list:
        return [list(self.lo), list(self.hi)]


_UNIT_CUBE = Box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


@dataclass(frozen=True)
class RaycastConfig:
    step: float = DEFAULT_MARCH_STEP

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"march step must be > 0, got {self.step}")


@dataclass(frozen=True)
class AdmissibleRegion:
    """Closed keep-in box minus open keep-out interiors."""

    keep_in: Box = _UNIT_CUBE
    keep_out: tuple[Box, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "keep_out", tuple(self.keep_out))

    def admissible_mask(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ok = self.keep_in.contains_closed(points)
        for box in self.keep_out:
            ok &= ~box.contains_open(points)
        return ok

    def march_mask(self, points: np.ndarray) -> np.ndarray:
        """Conservative admissibility for ray marching: keep-out faces count
        as blocked, so a march sample that lands exactly on a face (step
        multiples can round onto it) stops strictly before the box."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ok = self.keep_in.contains_closed(points)
        for box in self.keep_out:
            ok &= ~box.contains_closed(points)
        return ok

    def to_dict(self) -> dict:
        return {"keep_in": self.keep_in.to_pair(),
                "keep_out": [b.to_pair() for b in self.keep_out]}

    @classmethod
    def from_dict(cls, d: dict) -> "AdmissibleRegion":
        # explicit nulls mean "absent" so pydantic dumps round-trip
        keep_in = Box(*(d.get("keep_in") or _UNIT_CUBE.to_pair()))
        keep_out = tuple(Box(lo, hi) for lo, hi in (d.get("keep_out") or []))
        return cls(keep_in=keep_in, keep_out=keep_out)


def is_admissible(p, region: AdmissibleRegion) -> bool:
    return bool(region.admissible_mask(np.asarray(p, dtype=np.float64))[0])


def project_trajectory(original: Trajectory, modified: Trajectory,
                       region: AdmissibleRegion,
                       config: RaycastConfig = RaycastConfig()) -> Trajectory:
    """Clip ``modified`` against the region by raycasting from ``original``.

    Every waypoint marches from original toward modified; if the ray enters
    an inadmissible region the waypoint freezes at the last admissible
    sample.  Speeds are copied from ``modified`` untouched.
    """
    if len(original) != len(modified):
        raise ValueError(f"trajectory lengths differ: {len(original)} vs "
                         f"{len(modified)}")
    orig = original.positions
    dest = modified.positions
    ok_mask = region.admissible_mask(orig)
    if not ok_mask.all():
        bad = int(np.flatnonzero(~ok_mask)[0])
        raise ValueError(f"original waypoint {bad} at {orig[bad].tolist()} "
                         f"is not admissible; projection requires an "
                         f"admissible starting trajectory")
    out = np.empty_like(dest)
    for i in range(len(original)):
        o, m = orig[i], dest[i]
        dist = float(np.linalg.norm(m - o))
        if dist == 0.0:
            out[i] = o
            continue
        direction = (m - o) / dist
        best = o
        k = 1
        while True:
            t = k * config.step
            if t >= dist:
                if region.admissible_mask(m)[0]:
                    best = m
                break
            p = o + t * direction
            if not region.march_mask(p)[0]:
                break
            best = p
            k += 1
        out[i] = best
    points = np.concatenate([out, modified.speeds[:, None]], axis=1)
    return Trajectory(points)
