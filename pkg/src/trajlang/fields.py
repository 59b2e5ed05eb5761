"""Handcrafted vector fields that realize intents as trajectory edits.

Each intent family maps to a simple field over the workspace:

* cartesian   -- constant unit vector along the commanded axis direction,
                 no speed component.
* distance    -- radial unit vector toward (closer) or away from (further)
                 the target object, zero outside the locality radius,
                 no speed component.
* speed       -- pure speed increment, uniform for global commands and
                 restricted to the locality radius around the target for
                 localized ones; no positional component.

Field magnitudes equal the intent intensity.  ``apply_field`` integrates the
field with a fixed-step Euler loop, clamping to the workspace after every
step, so a full application moves affected waypoints by at most
``FIELD_STEPS * POSITION_GAIN * intensity`` in space and
``FIELD_STEPS * SPEED_GAIN * intensity`` in speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Scene, Trajectory
from .intents import ModificationIntent

FIELD_STEPS = 10
POSITION_GAIN = 0.03   # per-step; 10 steps x 0.03 = 0.3 total at intensity 1
SPEED_GAIN = 0.025     # per-step; 10 steps x 0.025 = 0.25 total at intensity 1

MIN_LOCALITY_RADIUS = 0.1
MAX_LOCALITY_RADIUS = 2.0

# +x is front, +y is left, +z is up
DIRECTION_VECTORS = {
    "front": np.array([1.0, 0.0, 0.0]),
    "back": np.array([-1.0, 0.0, 0.0]),
    "left": np.array([0.0, 1.0, 0.0]),
    "right": np.array([0.0, -1.0, 0.0]),
    "up": np.array([0.0, 0.0, 1.0]),
    "down": np.array([0.0, 0.0, -1.0]),
}


def locality_radius(locality_factor: float) -> float:
    """Map the [0, 1] locality factor to a workspace radius.

    The floor keeps a small neighborhood active even at factor 0; the ceiling
    spans the whole workspace diagonal direction-wise at factor 1.
    """
    if not 0.0 <= locality_factor <= 1.0:
        raise ValueError(f"locality factor must be in [0, 1], got {locality_factor}")
    return MIN_LOCALITY_RADIUS + (MAX_LOCALITY_RADIUS - MIN_LOCALITY_RADIUS) * locality_factor


def direction_vector(name: str) -> np.ndarray:
    if name not in DIRECTION_VECTORS:
        raise ValueError(f"unknown direction {name!r}; expected one of "
                         f"{sorted(DIRECTION_VECTORS)}")
    return DIRECTION_VECTORS[name].copy()


@dataclass(frozen=True)
class ForceField:
    """Evaluatable field: points (M, 3) -> (displacement (M, 3), dv (M,))."""

    kind: str
    intensity: float
    vector: np.ndarray | None = None    # cartesian direction
    center: np.ndarray | None = None    # target position for localized kinds
    sign: float = 1.0                   # +1 further/faster, -1 closer/slower
    radius: float = float("inf")

    def __call__(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"field expects (M, 3) points, got {pts.shape}")
        m = pts.shape[0]
        disp = np.zeros((m, 3))
        dv = np.zeros(m)
        if self.kind == "cartesian":
            disp[:] = self.vector * self.intensity
            return disp, dv
        offsets = pts - self.center
        dist = np.linalg.norm(offsets, axis=1)
        inside = dist <= self.radius
        if self.kind == "distance":
            # radial direction is undefined at the center itself; leave those
            # points untouched
            safe = inside & (dist > 1e-12)
            disp[safe] = (offsets[safe] / dist[safe, None]) * (self.sign * self.intensity)
            return disp, dv
        if self.kind == "speed":
            dv[inside] = self.sign * self.intensity
            return disp, dv
        raise ValueError(f"unknown field kind {self.kind!r}")


def make_field(intent: ModificationIntent, scene: Scene | None = None) -> ForceField:
    """Build the field realizing ``intent``; targeted intents resolve their
    object against ``scene`` (KeyError when the name is missing)."""
    if intent.kind == "cartesian":
        return ForceField(kind="cartesian", intensity=intent.intensity,
                          vector=direction_vector(intent.direction))
    if intent.kind == "speed_global":
        sign = 1.0 if intent.polarity == "faster" else -1.0
        return ForceField(kind="speed", intensity=intent.intensity, sign=sign,
                          center=np.zeros(3), radius=float("inf"))
    if scene is None:
        raise ValueError(f"{intent.kind} intents need a scene to resolve "
                         f"target {intent.target!r}")
    obj = scene.find(intent.target)
    center = np.asarray(obj.position, dtype=np.float64)
    radius = locality_radius(intent.locality_factor)
    if intent.kind == "distance":
        sign = 1.0 if intent.polarity == "further" else -1.0
        return ForceField(kind="distance", intensity=intent.intensity,
                          center=center, sign=sign, radius=radius)
    sign = 1.0 if intent.polarity == "faster" else -1.0
    return ForceField(kind="speed", intensity=intent.intensity,
                      center=center, sign=sign, radius=radius)


def apply_field(traj: Trajectory, force: ForceField,
                steps: int = FIELD_STEPS) -> Trajectory:
    """Integrate ``force`` over the trajectory with ``steps`` Euler updates,
    clamping positions and speeds to the workspace after every step."""
    pos = traj.positions.copy()
    spd = traj.speeds.copy()
    for _ in range(steps):
        disp, dv = force(pos)
        pos = np.clip(pos + POSITION_GAIN * disp, -1.0, 1.0)
        spd = np.clip(spd + SPEED_GAIN * dv, -1.0, 1.0)
    return Trajectory(np.concatenate([pos, spd[:, None]], axis=1))
