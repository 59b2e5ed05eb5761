"""Command-line entry points for every pipeline stage.

Subcommands: gen-data, train, eval, reshape, export-attention, serve.  All
take --seed where randomness is involved; exit code 0 on success, 1 on
runtime failure (message on stderr), 2 on bad flags (argparse).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter

import numpy as np

from .constraints import AdmissibleRegion, project_trajectory
from .dataset import (DatasetConfig, augment_sample, generate_dataset,
                      read_jsonl, write_jsonl)
from .estimator import TrajectoryReshaper
from .fields import apply_field, make_field
from .geometry import (scene_from_dict, trajectory_from_dict,
                       trajectory_to_dict)
from .intents import parse_intent
from .model import ModelConfig

PORT_ENV_VAR = "TRAJLANG_PORT"


def _add_encoder_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--encoder", default="default",
                        help="text encoder: 'default' (trainable) or "
                             "'import:<embeddings.jsonl>'")


def _encoder_kwargs(flag: str) -> dict:
    if flag == "default":
        return {"encoder_mode": "trainable", "encoder_path": None}
    if flag.startswith("import:"):
        return {"encoder_mode": "import", "encoder_path": flag[len("import:"):]}
    raise SystemExit(f"error: --encoder must be 'default' or 'import:<path>', "
                     f"got {flag!r}")


def _dataset_has_lf(path) -> bool:
    with open(path) as f:
        for line in f:
            if line.strip():
                return "locality_factor" in json.loads(line)["intent"]
    raise SystemExit(f"error: dataset {path} is empty")


def cmd_gen_data(args) -> int:
    config = DatasetConfig(n_waypoints=args.n_waypoints,
                           max_objects=args.max_objects,
                           lf_enabled=args.lf_enabled)
    samples = generate_dataset(args.n, args.seed, config)
    if args.augment:
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=(args.seed, 0x617567)))
        samples = samples + [augment_sample(s, rng) for s in samples]
    write_jsonl(samples, args.out, include_lf=args.lf_enabled)
    families = Counter(s.intent.family for s in samples)
    print(json.dumps({"n": len(samples), "out": str(args.out),
                      "families": dict(sorted(families.items()))}))
    return 0


def cmd_train(args) -> int:
    samples = read_jsonl(args.data)
    has_lf = _dataset_has_lf(args.data)
    if args.lf_enabled and not has_lf:
        print("error: --lf-enabled but the dataset has no locality_factor "
              "column", file=sys.stderr)
        return 1
    if args.full_scale:
        scale = ModelConfig.full_scale()
        args.depth = scale.depth
        args.block_hidden = scale.block_hidden
        args.output_hidden = scale.output_hidden
        args.d_sem = scale.d_sem
    est = TrajectoryReshaper(
        depth=args.depth, heads=args.heads, block_hidden=args.block_hidden,
        output_hidden=args.output_hidden,
        n_waypoints=len(samples[0].base) if samples else 40,
        max_objects=args.max_objects, d_sem=args.d_sem,
        lf_enabled=args.lf_enabled, feature_residual=args.feature_residual,
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        warmup_epochs=args.warmup_epochs, augment=args.augment,
        seed=args.seed, metrics_path=args.metrics, verbose=args.verbose,
        **_encoder_kwargs(args.encoder))
    est.fit(samples)
    est.save(args.out)
    print(json.dumps({"checkpoint": str(args.out),
                      "best_epoch": est.best_epoch_,
                      "best_val_mse": est.best_val_mse_,
                      "parameters": est.model_.count_params()}))
    return 0


def cmd_eval(args) -> int:
    samples = read_jsonl(args.data)
    est = TrajectoryReshaper.load(args.checkpoint, encoder_path=args.encoder_path)
    report = est.evaluate(samples)
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(payload + "\n")
    print(payload)
    return 0


def cmd_reshape(args) -> int:
    with open(args.infile) as f:
        doc = json.load(f)
    traj = trajectory_from_dict(doc)
    scene = scene_from_dict(doc)
    region = AdmissibleRegion()
    if args.region:
        with open(args.region) as f:
            region = AdmissibleRegion.from_dict(json.load(f))
    lf = args.lf
    if args.engine == "oracle":
        intent = parse_intent(args.text, scene).with_locality(lf)
        modified = apply_field(traj, make_field(intent, scene))
    else:
        if not args.checkpoint:
            print("error: --engine model requires --checkpoint",
                  file=sys.stderr)
            return 1
        est = TrajectoryReshaper.load(args.checkpoint,
                                      encoder_path=args.encoder_path)
        modified, _, _ = est.predict_one(traj, scene, args.text, lf)
    clipped = project_trajectory(traj, modified, region)
    out_doc = trajectory_to_dict(clipped)
    if args.full:
        out_doc = {"original": trajectory_to_dict(traj),
                   "modified": trajectory_to_dict(modified),
                   "clipped": trajectory_to_dict(clipped)}
    payload = json.dumps(out_doc)
    if args.out:
        with open(args.out, "w") as f:
            f.write(payload + "\n")
    else:
        print(payload)
    return 0


def cmd_export_attention(args) -> int:
    samples = read_jsonl(args.data)
    est = TrajectoryReshaper.load(args.checkpoint,
                                  encoder_path=args.encoder_path)
    est.export_attention(samples, path=args.out)
    print(json.dumps({"out": str(args.out), "n": len(samples)}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    encoder = _encoder_kwargs(args.encoder)
    app = create_app(checkpoint_path=args.checkpoint,
                     encoder_path=encoder["encoder_path"],
                     snapshot_path=args.snapshot,
                     default_engine=args.engine,
                     static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajlang",
        description="Reshape robot trajectories from natural-language commands.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-waypoints", type=int, default=40)
    p.add_argument("--max-objects", type=int, default=6)
    p.add_argument("--lf-enabled", action="store_true",
                   help="record the locality factor with each sample")
    p.add_argument("--augment", action="store_true",
                   help="bake one geometric shift+scale into every sample")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the reshaping model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--warmup-epochs", type=int, default=15)
    p.add_argument("--depth", type=int, default=64)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--block-hidden", type=int, default=128)
    p.add_argument("--output-hidden", type=int, default=128)
    p.add_argument("--max-objects", type=int, default=6)
    p.add_argument("--d-sem", type=int, default=64)
    p.add_argument("--full-scale", action="store_true",
                   help="use the d=400 configuration "
                        "(depth 400, hidden 512, d_sem 768)")
    p.add_argument("--lf-enabled", action="store_true")
    p.add_argument("--feature-residual", action="store_true")
    p.add_argument("--augment", action="store_true",
                   help="fresh geometric augmentation every epoch")
    p.add_argument("--metrics", default=None,
                   help="JSON-lines metrics log path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    _add_encoder_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--encoder-path", default=None,
                   help="embeddings file for import-mode checkpoints")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reshape", help="single-shot reshape of a trajectory file")
    p.add_argument("--in", dest="infile", required=True,
                   help="JSON file with waypoints and objects")
    p.add_argument("--text", required=True)
    p.add_argument("--lf", type=float, default=1.0)
    p.add_argument("--engine", choices=("oracle", "model"), default="oracle")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--encoder-path", default=None)
    p.add_argument("--region", default=None,
                   help="admissible-region JSON file")
    p.add_argument("--full", action="store_true",
                   help="emit original/modified/clipped instead of clipped only")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reshape)

    p = sub.add_parser("export-attention", help="write averaged attention maps")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--encoder-path", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_attention)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get(PORT_ENV_VAR, "8000")))
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--engine", choices=("oracle", "model"), default=None)
    p.add_argument("--snapshot", default=None,
                   help="session snapshot JSON, loaded at start, saved at exit")
    p.add_argument("--static", default=None,
                   help="directory of UI assets to serve at /")
    _add_encoder_flag(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
