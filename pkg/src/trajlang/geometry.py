"""Trajectory and scene primitives: normalized waypoints, spline generation,
resampling, and error metrics.

Everything lives in the normalized workspace: positions in [-1, 1]^3 and the
speed channel in [-1, 1].  A trajectory is a fixed-length sequence of
(x, y, z, v) waypoints stored as an (N, 4) array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUND_TOL = 1e-6   # slack for float32 round-trips at the workspace boundary

WALK_STEPS = 100
WALK_STEP_RANGE = 0.1     # per-axis uniform step in [-0.1, 0.1]
WALK_START_RANGE = 0.5    # start uniform in [-0.5, 0.5]^3
DEFAULT_CONTROL_POINTS = 6
DEFAULT_WAYPOINTS = 40
DEFAULT_MAX_OBJECTS = 6


def _check_bounds(arr: np.ndarray, what: str) -> np.ndarray:
    if arr.size and np.abs(arr).max() > 1.0 + BOUND_TOL:
        raise ValueError(f"{what} outside the normalized range [-1, 1]: "
                         f"max |component| = {np.abs(arr).max():.6g}")
    return np.clip(arr, -1.0, 1.0)


@dataclass(frozen=True)
class Waypoint:
    """One trajectory sample: position (x, y, z) and speed v, all in [-1, 1]."""

    x: float
    y: float
    z: float
    v: float

    def __post_init__(self):
        for name in ("x", "y", "z", "v"):
            val = getattr(self, name)
            if not -1.0 - BOUND_TOL <= val <= 1.0 + BOUND_TOL:
                raise ValueError(f"waypoint component {name}={val} outside [-1, 1]")


class Trajectory:
    """Ordered sequence of N waypoints, stored as an (N, 4) float array."""

    def __init__(self, points):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError(f"trajectory must have shape (N, 4), got {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("trajectory needs at least one waypoint")
        self.points = _check_bounds(arr, "trajectory waypoints")

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Trajectory) and np.array_equal(self.points, other.points)

    def __getitem__(self, i: int) -> Waypoint:
        return Waypoint(*self.points[i])

    @property
    def positions(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def speeds(self) -> np.ndarray:
        return self.points[:, 3]

    def copy(self) -> "Trajectory":
        return Trajectory(self.points.copy())

    def to_list(self) -> list[list[float]]:
        return [[float(c) for c in row] for row in self.points]

    def __repr__(self) -> str:
        return f"Trajectory(n={len(self)})"


@dataclass(frozen=True)
class SceneObject:
    """Named landmark at a normalized position; the label grounds commands."""

    name: str
    position: tuple[float, float, float]
    image_ref: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("scene object needs a non-empty name")
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.shape != (3,):
            raise ValueError(f"object position must be length 3, got {pos.shape}")
        _check_bounds(pos, f"object {self.name!r} position")
        object.__setattr__(self, "position", tuple(float(c) for c in pos))


@dataclass
class Scene:
    """Collection of uniquely named objects in the workspace."""

    objects: list[SceneObject] = field(default_factory=list)

    def __post_init__(self):
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise ValueError(f"scene object names must be unique, got {names}")

    def __len__(self) -> int:
        return len(self.objects)

    def names(self) -> list[str]:
        return [o.name for o in self.objects]

    def find(self, name: str) -> SceneObject:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(f"no object named {name!r} in scene {self.names()}")


# ---------------------------------------------------------------------------
# generation

def _catmull_rom(control: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Uniform Catmull-Rom curve through ``control`` evaluated at global
    parameters ``ts`` in [0, n_segments]; endpoints are duplicated so the
    curve interpolates every control point."""
    padded = np.vstack([control[:1], control, control[-1:]])
    n_seg = control.shape[0] - 1
    seg = np.clip(np.floor(ts).astype(int), 0, n_seg - 1)
    u = (ts - seg)[:, None]
    p0 = padded[seg]
    p1 = padded[seg + 1]
    p2 = padded[seg + 2]
    p3 = padded[seg + 3]
    return 0.5 * (
        2.0 * p1
        + (p2 - p0) * u
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u**2
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u**3
    )


def random_walk_spline(seed: int, n_control: int = DEFAULT_CONTROL_POINTS,
                       n_waypoints: int = DEFAULT_WAYPOINTS) -> Trajectory:
    """Base-trajectory generator: a seeded Cartesian random walk, a smooth
    spline through evenly spaced points of the walk, resampled to
    ``n_waypoints``.  The speed profile starts flat at 0 (mid-range)."""
    if n_control < 4:
        raise ValueError(f"need at least 4 control points, got {n_control}")
    if n_waypoints < n_control:
        raise ValueError(f"n_waypoints ({n_waypoints}) must be >= n_control ({n_control})")
    rng = np.random.default_rng(seed)
    start = rng.uniform(-WALK_START_RANGE, WALK_START_RANGE, size=3)
    steps = rng.uniform(-WALK_STEP_RANGE, WALK_STEP_RANGE, size=(WALK_STEPS, 3))
    walk = np.clip(start + np.cumsum(steps, axis=0), -1.0, 1.0)
    picks = np.linspace(0, WALK_STEPS - 1, n_control).round().astype(int)
    control = walk[picks]
    ts = np.linspace(0.0, n_control - 1, n_waypoints)
    xyz = np.clip(_catmull_rom(control, ts), -1.0, 1.0)
    points = np.concatenate([xyz, np.zeros((n_waypoints, 1))], axis=1)
    return Trajectory(points)


# ---------------------------------------------------------------------------
# metrics and resampling

def trajectory_mse(a: Trajectory, b: Trajectory) -> float:
    """Mean squared difference over all N x 4 components."""
    if len(a) != len(b):
        raise ValueError(f"trajectory lengths differ: {len(a)} vs {len(b)}")
    diff = a.points - b.points
    return float(np.mean(diff * diff))


def resample(traj: Trajectory, n_new: int) -> Trajectory:
    """Piecewise-linear re-parameterization by waypoint index; endpoints are
    preserved exactly."""
    n = len(traj)
    if n < 2 or n_new < 2:
        raise ValueError("resample needs at least 2 waypoints on both sides")
    old_t = np.arange(n, dtype=np.float64)
    new_t = np.linspace(0.0, n - 1, n_new)
    cols = [np.interp(new_t, old_t, traj.points[:, c]) for c in range(4)]
    out = np.stack(cols, axis=1)
    out[0] = traj.points[0]
    out[-1] = traj.points[-1]
    return Trajectory(out)


# ---------------------------------------------------------------------------
# shared JSON schema ({"waypoints": [[x,y,z,v],...], "objects": [...]})

def trajectory_to_dict(traj: Trajectory) -> dict:
    return {"waypoints": traj.to_list()}


def trajectory_from_dict(data: dict) -> Trajectory:
    if "waypoints" not in data:
        raise ValueError("trajectory JSON needs a 'waypoints' field")
    return Trajectory(data["waypoints"])


def scene_to_dict(scene: Scene) -> dict:
    return {"objects": [{"name": o.name, "position": list(o.position)}
                        for o in scene.objects]}


def scene_from_dict(data: dict) -> Scene:
    objects = [SceneObject(name=o["name"], position=tuple(o["position"]))
               for o in data.get("objects", [])]
    return Scene(objects)


def as_trajectory(value) -> Trajectory:
    """Coerce a Trajectory, (N, 4) array-like, or schema dict to a Trajectory."""
    if isinstance(value, Trajectory):
        return value
    if isinstance(value, dict):
        return trajectory_from_dict(value)
    return Trajectory(value)


def as_scene(value) -> Scene:
    """Coerce a Scene, list of SceneObjects, or schema dict to a Scene."""
    if isinstance(value, Scene):
        return value
    if isinstance(value, dict):
        return scene_from_dict(value)
    return Scene(list(value))
