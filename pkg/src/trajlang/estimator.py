"""Scikit-learn style estimator wrapping the reshaping network.

``TrajectoryReshaper`` follows the fit/predict/score protocol: fit consumes a
list of dataset samples (teacher-forced Huber training with Adam + linear
warmup, 90/10 seeded train/validation split, best-validation weights
retained), predict decodes autoregressively, score returns negative MSE so
bigger is better.  ``evaluate`` gives the full per-family report.
"""

from __future__ import annotations

import json
import time

import numpy as np
from sklearn.base import BaseEstimator

from . import autodiff as ad
from .autodiff import Tape
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import AugmentationConfig, DatasetSample, augment_sample
from .encoders import (ImportedTextEncoder, TrainableTextEncoder, Vocabulary,
                       build_feature_batch)
from .geometry import Trajectory, as_scene, as_trajectory
from .model import ModelConfig, TrajectoryTransformer, build_geometry_tokens
from .optim import AdamState, adam_step


def train_val_split(n: int, seed: int, val_fraction: float = 0.1):
    """Deterministic index split; at least one sample stays in training."""
    order = np.random.default_rng(seed).permutation(n)
    n_val = min(int(round(n * val_fraction)), n - 1)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _prediction_mse(pred: np.ndarray, target: np.ndarray) -> float:
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(diff * diff))


class TrajectoryReshaper(BaseEstimator):
    """Reshapes trajectories from natural-language commands.

    Parameters mirror the architecture and training hyperparameters; learned
    state lives in attributes with a trailing underscore after ``fit``.
    """

    def __init__(self, depth=64, heads=8, encoder_blocks=1, decoder_blocks=5,
                 block_hidden=128, output_hidden=128, n_waypoints=40,
                 max_objects=6, d_sem=64, lf_enabled=False,
                 feature_residual=False, epochs=60, batch_size=16, lr=1e-4,
                 warmup_epochs=15, val_fraction=0.1, augment=False,
                 max_steps=None, early_stop_loss=None, seed=0,
                 encoder_mode="trainable", encoder_path=None,
                 metrics_path=None, huber_delta=1.0, verbose=False):
        self.depth = depth
        self.heads = heads
        self.encoder_blocks = encoder_blocks
        self.decoder_blocks = decoder_blocks
        self.block_hidden = block_hidden
        self.output_hidden = output_hidden
        self.n_waypoints = n_waypoints
        self.max_objects = max_objects
        self.d_sem = d_sem
        self.lf_enabled = lf_enabled
        self.feature_residual = feature_residual
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.warmup_epochs = warmup_epochs
        self.val_fraction = val_fraction
        self.augment = augment
        self.max_steps = max_steps
        self.early_stop_loss = early_stop_loss
        self.seed = seed
        self.encoder_mode = encoder_mode
        self.encoder_path = encoder_path
        self.metrics_path = metrics_path
        self.huber_delta = huber_delta
        self.verbose = verbose

    # -- construction helpers ------------------------------------------------

    def _model_config(self) -> ModelConfig:
        return ModelConfig(depth=self.depth, heads=self.heads,
                           encoder_blocks=self.encoder_blocks,
                           decoder_blocks=self.decoder_blocks,
                           block_hidden=self.block_hidden,
                           output_hidden=self.output_hidden,
                           n_waypoints=self.n_waypoints,
                           max_objects=self.max_objects, d_sem=self.d_sem,
                           lf_enabled=self.lf_enabled,
                           feature_residual=self.feature_residual)

    def _build_encoder(self):
        if self.encoder_mode == "trainable":
            return TrainableTextEncoder(dim=self.d_sem, seed=self.seed)
        if self.encoder_mode == "import":
            if not self.encoder_path:
                raise ValueError("encoder_mode='import' needs encoder_path")
            enc = ImportedTextEncoder.from_jsonl(self.encoder_path)
            if enc.dim != self.d_sem:
                raise ValueError(f"imported embeddings have dim {enc.dim}, "
                                 f"config expects d_sem={self.d_sem}")
            return enc
        raise ValueError(f"unknown encoder_mode {self.encoder_mode!r}")

    def _check_schema(self, samples: list[DatasetSample]) -> None:
        if not samples:
            raise ValueError("empty dataset")
        for s in samples[:50]:
            if len(s.base) != self.n_waypoints or len(s.modified) != self.n_waypoints:
                raise ValueError(
                    f"sample {s.seed} has {len(s.base)} waypoints, config "
                    f"expects {self.n_waypoints}")
            if len(s.scene) > self.max_objects:
                raise ValueError(f"sample {s.seed} has {len(s.scene)} objects, "
                                 f"limit is {self.max_objects}")

    def _batch_arrays(self, samples: list[DatasetSample]):
        geo, present = build_geometry_tokens([s.base for s in samples],
                                             [s.scene for s in samples],
                                             self.max_objects)
        lfs = ([s.intent.locality_factor for s in samples]
               if self.lf_enabled else None)
        features = build_feature_batch(self.encoder_, [s.text for s in samples],
                                       [s.scene for s in samples], lfs,
                                       self.max_objects)
        target = np.stack([s.modified.points for s in samples])
        return geo, present, features, target

    def _teacher_mse(self, samples: list[DatasetSample]) -> float:
        total, count = 0.0, 0
        for lo in range(0, len(samples), self.batch_size):
            chunk = samples[lo:lo + self.batch_size]
            geo, present, features, target = self._batch_arrays(chunk)
            pred, _, _ = self.model_.forward_teacher_forced(geo, present,
                                                            features, target)
            total += _prediction_mse(pred.data, target) * len(chunk)
            count += len(chunk)
        return total / count

    # -- fitting ---------------------------------------------------------------

    def fit(self, X, y=None):
        """Train on a list of DatasetSample records."""
        samples = list(X)
        self._check_schema(samples)
        self.config_ = self._model_config()
        self.encoder_ = self._build_encoder()
        self.model_ = TrajectoryTransformer(self.config_, seed=self.seed)
        all_params = {**self.model_.params, **self.encoder_.params}
        state = AdamState(all_params, lr=self.lr,
                          warmup_epochs=self.warmup_epochs)

        train_idx, val_idx = train_val_split(len(samples), self.seed,
                                             self.val_fraction)
        train = [samples[i] for i in train_idx]
        val = [samples[i] for i in val_idx]
        shuffle_rng = np.random.default_rng(np.random.SeedSequence(
            entropy=(self.seed, 0xA5)))
        aug_rng = np.random.default_rng(np.random.SeedSequence(
            entropy=(self.seed, 0x9C)))
        aug_cfg = AugmentationConfig()

        self.history_ = []
        self.loss_curve_ = []
        best_val = float("inf")
        best_state = None
        best_epoch = -1
        step = 0
        t0 = time.monotonic()
        stop = False
        for epoch in range(self.epochs):
            order = shuffle_rng.permutation(len(train))
            epoch_mse, seen = 0.0, 0
            for lo in range(0, len(train), self.batch_size):
                chunk = [train[i] for i in order[lo:lo + self.batch_size]]
                if self.augment:
                    chunk = [augment_sample(s, aug_rng, aug_cfg) for s in chunk]
                with Tape():
                    geo, present, features, target = self._batch_arrays(chunk)
                    pred, loss, _ = self.model_.forward_teacher_forced(
                        geo, present, features, target)
                    ad.backward(loss)
                adam_step(state, epoch=epoch)
                loss_val = float(loss.data)
                self.loss_curve_.append(loss_val)
                epoch_mse += _prediction_mse(pred.data, target) * len(chunk)
                seen += len(chunk)
                step += 1
                if self.early_stop_loss is not None and loss_val < self.early_stop_loss:
                    stop = True
                    break
                if self.max_steps is not None and step >= self.max_steps:
                    stop = True
                    break
            val_mse = self._teacher_mse(val) if val else epoch_mse / max(seen, 1)
            record = {"epoch": epoch, "train_mse": epoch_mse / max(seen, 1),
                      "val_mse": val_mse, "lr": state.effective_lr(epoch)}
            self.history_.append(record)
            if self.verbose:
                elapsed = time.monotonic() - t0
                print(f"epoch {epoch}: train {record['train_mse']:.6f} "
                      f"val {val_mse:.6f} ({elapsed:.0f}s)", flush=True)
            if val_mse < best_val:
                best_val = val_mse
                best_epoch = epoch
                best_state = {**self.model_.state_dict(),
                              **{k: np.array(v.data, copy=True)
                                 for k, v in self.encoder_.params.items()}}
            if stop:
                break
        if best_state is not None:
            self._install_state(best_state)
        self.best_val_mse_ = best_val
        self.best_epoch_ = best_epoch
        self.n_samples_ = len(samples)
        if self.metrics_path:
            with open(self.metrics_path, "w") as f:
                for record in self.history_:
                    f.write(json.dumps(record) + "\n")
        return self

    def _install_state(self, state: dict[str, np.ndarray]) -> None:
        model_state = {k: v for k, v in state.items() if k in self.model_.params}
        self.model_.load_state_dict(model_state)
        for k, tensor in self.encoder_.params.items():
            tensor.data = state[k].astype(tensor.dtype, copy=True)
            tensor.grad = None

    # -- inference ---------------------------------------------------------------

    def _coerce_inputs(self, X):
        """Accept DatasetSample lists or (trajectory, scene, text[, lf]) tuples."""
        rows = []
        for item in X:
            if isinstance(item, DatasetSample):
                rows.append((item.base, item.scene, item.text,
                             item.intent.locality_factor))
            else:
                traj, scene, text = item[0], item[1], item[2]
                lf = item[3] if len(item) > 3 else 1.0
                rows.append((as_trajectory(traj), as_scene(scene), text, lf))
        return rows

    def predict(self, X) -> list[Trajectory]:
        """Autoregressive reshapes for (trajectory, scene, text[, lf]) inputs."""
        rows = self._coerce_inputs(X)
        out: list[Trajectory] = []
        for lo in range(0, len(rows), self.batch_size):
            chunk = rows[lo:lo + self.batch_size]
            geo, present = build_geometry_tokens([r[0] for r in chunk],
                                                 [r[1] for r in chunk],
                                                 self.max_objects)
            lfs = [r[3] for r in chunk] if self.lf_enabled else None
            features = build_feature_batch(self.encoder_, [r[2] for r in chunk],
                                           [r[1] for r in chunk], lfs,
                                           self.max_objects)
            pred, _ = self.model_.generate(geo, present, features)
            out.extend(Trajectory(np.clip(p, -1.0, 1.0)) for p in pred)
        return out

    def predict_one(self, trajectory, scene, text: str, lf: float = 1.0,
                    collect_attention: bool = False):
        """Single reshape; optionally returns the attention maps."""
        traj = as_trajectory(trajectory)
        scn = as_scene(scene)
        geo, present = build_geometry_tokens([traj], [scn], self.max_objects)
        lfs = [lf] if self.lf_enabled else None
        features = build_feature_batch(self.encoder_, [text], [scn], lfs,
                                       self.max_objects)
        pred, attn = self.model_.generate(geo, present, features,
                                          collect_attention=collect_attention)
        similarity = features.data[0, :self.max_objects].tolist()
        return Trajectory(np.clip(pred[0], -1.0, 1.0)), similarity, attn

    def evaluate(self, samples: list[DatasetSample]) -> dict:
        """Autoregressive + teacher-forced MSE with per-family breakdown."""
        samples = list(samples)
        preds = self.predict(samples)
        per_family: dict[str, list[float]] = {}
        errors = []
        for s, p in zip(samples, preds):
            mse = _prediction_mse(p.points, s.modified.points)
            errors.append(mse)
            per_family.setdefault(s.intent.family, []).append(mse)
        return {
            "n": len(samples),
            "mse": float(np.mean(errors)),
            "mse_teacher_forced": self._teacher_mse(samples),
            "per_family": {k: float(np.mean(v)) for k, v in
                           sorted(per_family.items())},
        }

    def score(self, X, y=None) -> float:
        """Negative autoregressive MSE (sklearn: larger is better)."""
        return -self.evaluate(list(X))["mse"]

    def export_attention(self, samples: list[DatasetSample],
                         path=None) -> dict:
        """Head- and sample-averaged attention heatmaps.

        Returns one (N+M)x(N+M) encoder map, and per decoder block one NxN
        causal self map and one Nx(N+M+1) cross map; optionally written as
        JSON.  Rows stay stochastic because averaging preserves row sums.
        """
        samples = list(samples)
        sums: dict[str, list[np.ndarray] | None] = {
            "encoder": None, "decoder_self": None, "decoder_cross": None}
        total = 0
        for lo in range(0, len(samples), self.batch_size):
            chunk = samples[lo:lo + self.batch_size]
            geo, present, features, _ = self._batch_arrays(chunk)
            _, attn = self.model_.generate(geo, present, features,
                                           collect_attention=True)
            total += len(chunk)
            for key in sums:
                # (B, H, T, S) -> sum over batch, mean over heads
                partial = [a.mean(axis=1).sum(axis=0) for a in attn[key]]
                if sums[key] is None:
                    sums[key] = partial
                else:
                    sums[key] = [acc + p for acc, p in zip(sums[key], partial)]
        report = {
            "n_waypoints": self.config_.n_waypoints,
            "max_objects": self.config_.max_objects,
            "encoder": (sum(sums["encoder"]) / (len(sums["encoder"]) * total)).tolist(),
            "decoder_self": [(m / total).tolist() for m in sums["decoder_self"]],
            "decoder_cross": [(m / total).tolist() for m in sums["decoder_cross"]],
        }
        if path is not None:
            with open(path, "w") as f:
                json.dump(report, f)
        return report

    # -- persistence -------------------------------------------------------------

    def save(self, path) -> None:
        params = {**self.model_.state_dict(),
                  **{k: np.array(v.data, copy=True)
                     for k, v in self.encoder_.params.items()}}
        metadata = {"epoch": self.best_epoch_,
                    "best_val_mse": self.best_val_mse_,
                    "seed": self.seed, "n_samples": self.n_samples_,
                    "val_fraction": self.val_fraction}
        encoder_info = {"mode": self.encoder_.mode, "dim": self.encoder_.dim}
        if self.encoder_.mode == "trainable":
            encoder_info["vocab"] = self.encoder_.vocab.tokens
        else:
            encoder_info["path"] = str(self.encoder_path)
        save_checkpoint(path, self.config_, params, metadata, encoder_info)

    @classmethod
    def load(cls, path, encoder_path=None) -> "TrajectoryReshaper":
        ckpt = load_checkpoint(path)
        cfg = ckpt.config
        est = cls(depth=cfg.depth, heads=cfg.heads,
                  encoder_blocks=cfg.encoder_blocks,
                  decoder_blocks=cfg.decoder_blocks,
                  block_hidden=cfg.block_hidden,
                  output_hidden=cfg.output_hidden,
                  n_waypoints=cfg.n_waypoints, max_objects=cfg.max_objects,
                  d_sem=cfg.d_sem, lf_enabled=cfg.lf_enabled,
                  feature_residual=cfg.feature_residual,
                  seed=ckpt.metadata.get("seed", 0),
                  val_fraction=ckpt.metadata.get("val_fraction", 0.1),
                  encoder_mode=ckpt.encoder.get("mode", "trainable"),
                  encoder_path=encoder_path or ckpt.encoder.get("path"))
        est.config_ = cfg
        mode = ckpt.encoder.get("mode", "trainable")
        if mode == "trainable":
            vocab = Vocabulary(ckpt.encoder["vocab"])
            if vocab.tokens != ckpt.encoder["vocab"]:
                raise ValueError("checkpoint vocabulary is not in canonical order")
            est.encoder_ = TrainableTextEncoder(dim=cfg.d_sem, vocab=vocab)
            table = ckpt.params["text_embedding"]
            if table.shape != est.encoder_.table.shape:
                raise ValueError(f"text embedding shape {table.shape} does not "
                                 f"match vocabulary ({est.encoder_.table.shape})")
            est.encoder_.table.data = table.astype(est.encoder_.table.dtype,
                                                   copy=True)
        else:
            est.encoder_ = est._build_encoder()
        est.model_ = TrajectoryTransformer(cfg, seed=est.seed)
        est.model_.load_state_dict({k: v for k, v in ckpt.params.items()
                                    if k != "text_embedding"})
        est.best_val_mse_ = ckpt.metadata.get("best_val_mse", float("nan"))
        est.best_epoch_ = ckpt.metadata.get("epoch", -1)
        est.n_samples_ = ckpt.metadata.get("n_samples", 0)
        return est
