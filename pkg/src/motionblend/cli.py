"""Command-line interface: train / blend / eval / inspect-checkpoint.

Every command is driven by a declarative experiment config; outputs land in
a run directory with the config copied in.  The compute device can be forced
through the MOTIONBLEND_DEVICE environment variable.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .blending import blend, load_schedule
from .bvh import write_bvh
from .config import ingest_motions, load_experiment
from .evaluation import (
    EvalOptions,
    blend_smoothness_probe,
    compute_metrics,
    generate_samples,
)
from .pyramid import load_checkpoint, save_checkpoint
from .report import emit_report
from .training import train

DEVICE_ENV_VAR = "MOTIONBLEND_DEVICE"


def _device_override() -> str | None:
    return os.environ.get(DEVICE_ENV_VAR) or None


def _prepare_run_dir(out_dir: Path, config_path: Path, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(config_path, out_dir / "config.yaml")
    resolved_path = out_dir / "resolved_config.yaml"
    resolved_path.write_text(yaml.safe_dump(resolved, sort_keys=True))


def cmd_train(args) -> int:
    config, resolved = load_experiment(args.config, args.set)
    out_dir = Path(args.out) if args.out else config.output_dir
    if args.seed is not None:
        config.seed = args.seed
    skeleton, tensors, _ = ingest_motions(config)
    train_config = config.train_config()
    device = _device_override()
    if device:
        train_config.device = device

    _prepare_run_dir(out_dir, Path(args.config), resolved)
    telemetry_path = out_dir / "telemetry.csv"
    model = train(train_config, tensors, skeleton, telemetry_path=telemetry_path)
    checkpoint_path = out_dir / "checkpoint.pkl"
    save_checkpoint(model, checkpoint_path)
    print(f"checkpoint: {checkpoint_path}")
    print(f"telemetry:  {telemetry_path}")
    return 0


def cmd_blend(args) -> int:
    model = load_checkpoint(args.checkpoint)
    schedule = load_schedule(args.schedule)
    tensor, raw = blend(model, schedule, seed=args.seed)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(write_bvh(model.skeleton, raw))
    print(f"schedule:  {schedule.describe()}")
    print(f"blend bvh: {out_path}  ({tensor.num_frames} frames @ {tensor.fps:g} fps)")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    config, _ = load_experiment(args.config, args.set)
    skeleton, reals, _ = ingest_motions(config)
    if skeleton.names != model.skeleton.names:
        raise ValueError(
            "config motions use a different skeleton than the checkpoint"
        )
    m = config.metrics
    options = EvalOptions(
        window=int(m.get("window", 30)),
        local_window=int(m.get("local_window", 8)),
        num_samples=args.samples if args.samples else int(m.get("num_samples", 50)),
        fid_components=int(m.get("fid_components", 64)),
        seed=args.seed if args.seed is not None else config.seed,
    )
    out_dir = Path(args.out) if args.out else config.output_dir / "eval"

    samples = generate_samples(model, options.num_samples, options.seed)
    metrics = compute_metrics(reals, samples, options)
    series = blend_smoothness_probe(
        model, seed=options.seed, probe_joints=config.probe_joints
    )
    written = emit_report(metrics, out_dir, smoothness_series=series)
    for key in ("fid", "cov", "gdiv", "ldiv", "inter_div", "intra_div"):
        value = metrics[key]
        print(f"{key:10s} {value if isinstance(value, str) else f'{value:.6f}'}")
    print("report files:")
    for path in written:
        print(f"  {path}")
    return 0


def cmd_inspect(args) -> int:
    model = load_checkpoint(args.checkpoint)
    amps = model.noise_amplitudes.tolist()
    print(f"version:            {1}")
    print(f"identities:         {', '.join(model.identities)}")
    print(f"levels (frames):    {list(model.level_spec.level_lengths)}")
    print(f"modulation:         {model.config.modulation}")
    print(f"conditioned levels: {sorted(model.conditioned_levels) or 'none'}")
    print(f"joints/contacts:    {model.skeleton.num_joints} joints, {model.num_contacts} contact labels")
    print(f"feature dim:        {model.feature_dim}")
    print(f"fps:                {model.fps:g}")
    print(f"trained stages:     {model.trained_stages}/7")
    print(f"noise amplitudes:   {[round(a, 5) for a in amps]}")
    print(f"config hash:        {model.config_hash or 'n/a'}")
    params = sum(p.numel() for p in model.parameters())
    print(f"parameters:         {params}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionblend",
        description="Train a single-shot motion blending model, generate blends, evaluate them.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from an experiment config")
    p_train.add_argument("config", help="experiment YAML")
    p_train.add_argument("--out", help="run directory (default: config output_dir)")
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (dotted path), e.g. train.iterations_per_level=500",
    )
    p_train.set_defaults(func=cmd_train)

    p_blend = sub.add_parser("blend", help="generate a scheduled blend from a checkpoint")
    p_blend.add_argument("checkpoint")
    p_blend.add_argument("schedule", help="schedule file: identity=frames lines")
    p_blend.add_argument("--seed", type=int, default=0)
    p_blend.add_argument("--out", required=True, help="output BVH path")
    p_blend.set_defaults(func=cmd_blend)

    p_eval = sub.add_parser("eval", help="compute the metric report for a checkpoint")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("config", help="experiment YAML naming the real motions")
    p_eval.add_argument("--out", help="report directory (default: output_dir/eval)")
    p_eval.add_argument("--samples", type=int, default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_eval.set_defaults(func=cmd_eval)

    p_inspect = sub.add_parser("inspect-checkpoint", help="print checkpoint metadata")
    p_inspect.add_argument("checkpoint")
    p_inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: report and exit non-zero
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
