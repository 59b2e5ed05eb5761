"""Synthetic pair generation: (base trajectory, command, scene) -> modified.

Every sample is produced from a single integer seed so regeneration is
byte-identical.  The modified trajectory is the field integration of the
rendered command's intent over the base trajectory.

Geometric augmentation shifts and scales all geometric values of a sample
(waypoints of both trajectories and object positions) with one shared
transform, retrying until everything stays inside the workspace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .fields import apply_field, make_field
from .geometry import (DEFAULT_MAX_OBJECTS, DEFAULT_WAYPOINTS, Scene, SceneObject,
                       Trajectory, random_walk_spline, scene_from_dict,
                       scene_to_dict)
from .intents import DIRECTIONS, INTENSITIES, ModificationIntent, render_text
from .labels import OBJECT_NAMES


@dataclass(frozen=True)
class DatasetConfig:
    n_waypoints: int = DEFAULT_WAYPOINTS
    max_objects: int = DEFAULT_MAX_OBJECTS
    lf_enabled: bool = False   # include the locality factor in records


@dataclass(frozen=True)
class AugmentationConfig:
    shift_range: float = 0.2
    scale_min: float = 0.6
    scale_max: float = 1.2
    max_retries: int = 20


@dataclass(frozen=True)
class DatasetSample:
    seed: int
    base: Trajectory
    scene: Scene
    text: str
    intent: ModificationIntent
    modified: Trajectory

    def to_dict(self, include_lf: bool = True) -> dict:
        intent = self.intent.to_dict()
        if not include_lf:
            del intent["locality_factor"]
        return {"seed": self.seed,
                "text": self.text,
                "intent": intent,
                "base": self.base.to_list(),
                "modified": self.modified.to_list(),
                **scene_to_dict(self.scene)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSample":
        return cls(seed=d["seed"],
                   base=Trajectory(d["base"]),
                   scene=scene_from_dict(d),
                   text=d["text"],
                   intent=ModificationIntent.from_dict(d["intent"]),
                   modified=Trajectory(d["modified"]))


def sample_scene(rng: np.random.Generator,
                 max_objects: int = DEFAULT_MAX_OBJECTS) -> Scene:
    """Scene with 1..max_objects uniquely named objects placed uniformly."""
    n = int(rng.integers(1, max_objects + 1))
    idx = rng.choice(len(OBJECT_NAMES), size=n, replace=False)
    objects = [SceneObject(name=OBJECT_NAMES[i],
                           position=tuple(rng.uniform(-1.0, 1.0, size=3)))
               for i in idx]
    return Scene(objects)


def sample_intent(rng: np.random.Generator, scene: Scene) -> ModificationIntent:
    """Uniform over the three families; targets drawn from the scene."""
    family = ("cartesian", "distance", "speed")[rng.integers(3)]
    intensity = float(INTENSITIES[rng.integers(len(INTENSITIES))])
    lf = float(rng.uniform(0.0, 1.0))
    if family == "cartesian":
        return ModificationIntent(kind="cartesian",
                                  direction=DIRECTIONS[rng.integers(len(DIRECTIONS))],
                                  intensity=intensity, locality_factor=lf)
    target = scene.objects[rng.integers(len(scene))].name
    if family == "distance":
        polarity = ("closer", "further")[rng.integers(2)]
        return ModificationIntent(kind="distance", polarity=polarity,
                                  intensity=intensity, target=target,
                                  locality_factor=lf)
    polarity = ("faster", "slower")[rng.integers(2)]
    if rng.random() < 0.5:
        return ModificationIntent(kind="speed_global", polarity=polarity,
                                  intensity=intensity, locality_factor=lf)
    return ModificationIntent(kind="speed_local", polarity=polarity,
                              intensity=intensity, target=target,
                              locality_factor=lf)


def generate_sample(seed: int, config: DatasetConfig = DatasetConfig()) -> DatasetSample:
    """Fully seeded sample: walk spline, scene, intent, text, field result."""
    rng = np.random.default_rng(seed)
    base = random_walk_spline(int(rng.integers(2**31)),
                              n_waypoints=config.n_waypoints)
    scene = sample_scene(rng, config.max_objects)
    intent = sample_intent(rng, scene)
    text = render_text(intent, rng)
    modified = apply_field(base, make_field(intent, scene))
    return DatasetSample(seed=seed, base=base, scene=scene, text=text,
                         intent=intent, modified=modified)


def generate_dataset(n: int, seed: int,
                     config: DatasetConfig = DatasetConfig()) -> list[DatasetSample]:
    sub_seeds = np.random.SeedSequence(seed).generate_state(n)
    return [generate_sample(int(s), config) for s in sub_seeds]


def augment_sample(sample: DatasetSample, rng: np.random.Generator,
                   config: AugmentationConfig = AugmentationConfig()) -> DatasetSample:
    """One shared shift-then-scale transform over the sample's geometry.

    Speeds are untouched.  Falls back to the untransformed sample when no
    in-bounds transform is found within the retry budget.
    """
    base_xyz = sample.base.positions
    mod_xyz = sample.modified.positions
    obj_xyz = np.array([o.position for o in sample.scene.objects])
    for _ in range(config.max_retries):
        shift = rng.uniform(-config.shift_range, config.shift_range, size=3)
        scale = rng.uniform(config.scale_min, config.scale_max)
        pieces = [(p + shift) * scale for p in (base_xyz, mod_xyz, obj_xyz)]
        if max(np.abs(p).max() for p in pieces) <= 1.0:
            new_base, new_mod, new_obj = pieces
            objects = [replace(o, position=tuple(p))
                       for o, p in zip(sample.scene.objects, new_obj)]
            return replace(
                sample,
                base=Trajectory(np.concatenate(
                    [new_base, sample.base.speeds[:, None]], axis=1)),
                modified=Trajectory(np.concatenate(
                    [new_mod, sample.modified.speeds[:, None]], axis=1)),
                scene=Scene(objects))
    return sample


# ---------------------------------------------------------------------------
# JSONL persistence

def write_jsonl(samples: list[DatasetSample], path,
                include_lf: bool = True) -> None:
    with open(path, "w") as f:
        for s in samples:
            f.write(json.dumps(s.to_dict(include_lf=include_lf),
                               sort_keys=True) + "\n")


def read_jsonl(path) -> list[DatasetSample]:
    samples = []
    with open(path) as f:
        for line in f:
            if line.strip():
                samples.append(DatasetSample.from_dict(json.loads(line)))
    return samples
