"""Natural-language trajectory reshaping toolkit.

Synthesizes ground-truth trajectory edits from handcrafted vector fields,
trains a multimodal autoregressive transformer to imitate them, keeps results
inside hard workspace constraints, and serves the loop over CLI and HTTP.
"""

from .autodiff import Tape, Tensor
from .constraints import AdmissibleRegion, Box, RaycastConfig, is_admissible, project_trajectory
from .dataset import (AugmentationConfig, DatasetConfig, DatasetSample,
                      augment_sample, generate_dataset, generate_sample,
                      read_jsonl, write_jsonl)
from .encoders import (ImportedTextEncoder, TrainableTextEncoder, Vocabulary,
                       build_feature_embedding, object_similarity)
from .estimator import TrajectoryReshaper, train_val_split
from .fields import ForceField, apply_field, locality_radius, make_field
from .geometry import (Scene, SceneObject, Trajectory, Waypoint,
                       random_walk_spline, resample, trajectory_mse)
from .intents import ModificationIntent, ParseError, parse_intent, render_text
from .model import ModelConfig, TrajectoryTransformer

__version__ = "1.0.0"

__all__ = [
    "AdmissibleRegion", "AugmentationConfig", "Box", "DatasetConfig",
    "DatasetSample", "ForceField", "ImportedTextEncoder", "ModelConfig",
    "ModificationIntent", "ParseError", "RaycastConfig", "Scene",
    "SceneObject", "Tape", "Tensor", "TrajectoryReshaper",
    "TrajectoryTransformer", "Trajectory", "TrainableTextEncoder",
    "Vocabulary", "Waypoint", "apply_field", "augment_sample",
    "build_feature_embedding", "generate_dataset", "generate_sample",
    "is_admissible", "locality_radius", "make_field", "object_similarity",
    "parse_intent", "project_trajectory", "random_walk_spline", "read_jsonl",
    "render_text", "resample", "trajectory_mse", "train_val_split",
    "write_jsonl",
]
