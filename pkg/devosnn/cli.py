"""CLI entry point for devosnn."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from datetime import datetime
from pathlib import Path

import pandas as pd

from devosnn.config import (
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    resolve_param_key,
    validate_config,
)
from devosnn.console import (
    get_console,
    metrics_table,
    print_error,
    print_muted,
    print_phase,
    print_success,
    print_warning,
    sweep_table,
)
from devosnn.data.registry import create_default_registry
from devosnn.network import Model
from devosnn.persistence import (
    CHECKPOINT_NAME,
    CheckpointError,
    active_run,
    checkpoint_load,
    list_runs,
    load_run_info,
)
from devosnn.pruning import compression_rate
from devosnn.report import report_table, structure_report
from devosnn.trainer import TrainingAborted, TrainingEngine, evaluate, run_training

log = logging.getLogger(__name__)


def _summary_line(acc: float, compression: float) -> str:
    return f"acc={acc:.2f} compression={compression:.2f}"


def _flag_overrides(args: argparse.Namespace) -> list[str]:
    overrides = list(getattr(args, "set", None) or [])
    for flag, key in (("mode", "train.mode"), ("seed", "train.seed"), ("epochs", "train.epochs")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return overrides


def _load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config, _flag_overrides(args))
    validate_config(cfg)
    return cfg


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_experiment(args)
    run_dir = Path(args.out) if args.out else None
    try:
        result = run_training(cfg, run_dir=run_dir)
    except TrainingAborted as e:
        print_error(f"Training aborted: {e}")
        return 1
    get_console().print(metrics_table(result.metrics[-5:], title="Last epochs"))
    print_success(f"Run finished: {result.run_dir}")
    print(_summary_line(result.test_acc, result.compression))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _load_experiment(args)
    key = resolve_param_key(args.param)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        print_error("--values is empty")
        return 1
    configs = [apply_overrides(base, [f"{key}={v}"]) for v in values]
    for cfg in configs:
        validate_config(cfg, check_files=False)

    if args.out:
        sweep_dir = Path(args.out)
    else:
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        sweep_dir = base.output.runs_path / f"{stamp}_sweep-{key.replace('.', '-')}"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    log.info("Sweep over %s (%s) into %s", key, ", ".join(values), sweep_dir)

    rows: list[tuple[str, float, float, str]] = []
    failed = 0
    for value, cfg in zip(values, configs):
        print_phase(f"{key} = {value}")
        run_dir = sweep_dir / f"{key.split('.')[-1]}-{value}"
        try:
            result = run_training(cfg, run_dir=run_dir, quiet=not args.progress)
        except TrainingAborted as e:
            print_error(f"{key}={value}: training aborted: {e}")
            failed += 1
            continue
        print_muted(_summary_line(result.test_acc, result.compression))
        rows.append((value, result.test_acc, result.compression, str(run_dir)))

    pd.DataFrame(
        [{"value": v, "test_acc": a, "compression": c, "run_dir": d} for v, a, c, d in rows]
    ).to_csv(sweep_dir / "sweep.csv", index=False)
    get_console().print(sweep_table(key, rows))
    return 1 if failed else 0


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = checkpoint_load(args.checkpoint)
    cfg = config_from_dict(ckpt.config)
    spec = cfg.network_spec()
    registry = create_default_registry()

    if args.data:
        source = registry.find_reader(Path(args.data))
        if source is None:
            print_error(f"No readable test split in {args.data} (expected MNIST IDX files or test.frames)")
            return 1
        cfg.data.path = str(args.data)
    else:
        source = registry.get(cfg.data.source)
        if source is None:
            print_error(f"Unknown data source in checkpoint: {cfg.data.source}")
            return 1
    dataset = source.load(cfg.data, "test")

    model = Model(spec, ckpt.params, ckpt.mask)
    acc = evaluate(model, dataset)
    print_muted(f"{spec.architecture}, epoch {ckpt.epoch}, {len(dataset)} test samples ({source.name})")
    print(_summary_line(acc, compression_rate(ckpt.mask, ckpt.params)))
    return 0


def cmd_resume(args: argparse.Namespace) -> int:
    if args.run:
        run_dir = Path(args.run)
    else:
        run_dir = active_run(load_config(args.config).output.runs_path)
        if run_dir is None:
            print("No active run found. Nothing to resume.")
            return 1

    checkpoint = run_dir / CHECKPOINT_NAME
    if not checkpoint.exists():
        print(f"Cannot resume: no checkpoint in {run_dir}")
        return 1
    cfg = load_config(run_dir / "config.yaml")
    validate_config(cfg)
    engine = TrainingEngine(cfg, run_dir=run_dir)
    try:
        engine.resume(checkpoint_load(checkpoint))
    except TrainingAborted as e:
        print_error(f"Training aborted: {e}")
        return 1
    history = engine.ctx.history
    print_success(f"Resumed and completed: {run_dir}")
    if history:
        print(_summary_line(history[-1].test_acc, history[-1].compression))
    return 0


def cmd_status(args: argparse.Namespace) -> int:
    runs_path = load_config(args.config).output.runs_path
    active = active_run(runs_path)
    runs = list_runs(runs_path)

    if not runs:
        print("No runs found.")
        return 0

    if active is None:
        print("No active run.")
    else:
        info = load_run_info(active)
        print(f"Active run: {active.name} ({info.status if info else 'unknown'})")

    print(f"Stored runs: {len(runs)}")
    for run_id, info in runs:
        status = "active" if active and run_id == active.name else "completed" if info.completed else "stopped"
        summary = f" {_summary_line(info.summary['test_acc'], info.summary['compression'])}" if info.summary else ""
        print(f"- {run_id} [{status}] mode={info.mode} epoch={info.epoch + 1}/{info.epochs}{summary}")
        if info.last_error:
            print_muted(f"    {info.last_error}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config_path, args.set or [])
        validate_config(cfg)
    except (ValueError, FileNotFoundError) as e:
        print(f"Invalid config: {e}", file=sys.stderr)
        return 1
    spec = cfg.network_spec()
    synapses = sum(math.prod(s) for s in spec.weight_shapes())
    print(f"Valid config: {args.config_path}")
    print(f"  Network:    {spec.architecture} (T={spec.time_steps}, tau={spec.tau}, v_th={spec.v_th}, a={spec.a})")
    print(f"  Synapses:   {synapses}")
    print(f"  Data:       {cfg.data.source} {cfg.data.shape} x {cfg.data.class_count} classes")
    print(f"  Mode:       {cfg.mode.value}, {cfg.train.epochs} epochs, batch {cfg.train.batch_size}")
    print(f"  Pruning:    start {cfg.start_epoch}, mid {cfg.mid_epoch}, rho_conv {cfg.prune.rho_conv}, "
          f"rho_fc {cfg.prune.rho_fc}")
    print(f"  Constraint: t_num {cfg.constraint.t_num}, epsilon {cfg.constraint.epsilon}; "
          f"regeneration t_num {cfg.regen_t_num}")
    return 0


def cmd_sources(args: argparse.Namespace) -> int:
    registry = create_default_registry()
    sources = registry.list_sources()
    print(f"Registered data sources ({len(sources)}):")
    for source in sources:
        print(f"  - {source.name}: {source.description}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    ckpt = checkpoint_load(args.checkpoint)
    layers = [args.layer] if args.layer is not None else list(range(len(ckpt.mask) - 1))
    console = get_console()
    for layer in layers:
        report = structure_report(ckpt.bounds, ckpt.mask, layer)
        console.print(report_table(report, limit=args.limit))
        print(
            f"layer {layer}: pruned {report.pruned_units}/{report.units} units ({report.pruned_pct:.2f}%), "
            f"regenerated {report.regenerated_synapses} synapses on regrown units ({report.regenerated_pct:.2f}%)"
        )
    if not layers:
        print_warning("Network has no prunable layers.")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devosnn",
        description="Spiking network training with synaptic constraint, structural pruning and regeneration",
    )
    parser.add_argument(
        "--verbose", "-v",
        action="store_true",
        help="Enable debug logging",
    )
    sub = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", default=None, help="Path to config file (default: bundled config.yaml)")

    overrides = argparse.ArgumentParser(add_help=False)
    overrides.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key (repeatable)")
    overrides.add_argument("--mode", default=None, help="baseline | constraint_only | no_regeneration | full")
    overrides.add_argument("--seed", type=int, default=None, help="Training seed")
    overrides.add_argument("--epochs", type=int, default=None, help="Number of epochs")

    # train
    p_train = sub.add_parser("train", parents=[common, overrides], help="Train one network")
    p_train.add_argument("--out", default=None, help="Run directory (default: new directory under runs_dir)")

    # sweep
    p_sweep = sub.add_parser("sweep", parents=[common, overrides], help="Train once per value of a config key")
    p_sweep.add_argument("--param", required=True, help="Config key, dotted or bare (e.g. t_num, prune.rho_fc)")
    p_sweep.add_argument("--values", required=True, help="Comma-separated values")
    p_sweep.add_argument("--out", default=None, help="Sweep directory holding one run per value")
    p_sweep.add_argument("--progress", action="store_true", help="Print every epoch of every run")

    # eval
    p_eval = sub.add_parser("eval", help="Evaluate a checkpoint on a test split")
    p_eval.add_argument("--checkpoint", required=True, help="Path to checkpoint.npz")
    p_eval.add_argument("--data", default=None, help="Directory with IDX test files or test.frames")

    # resume
    p_resume = sub.add_parser("resume", parents=[common], help="Resume the active (or given) run")
    p_resume.add_argument("--run", default=None, help="Run directory to resume")

    # status
    sub.add_parser("status", parents=[common], help="List runs and the active run")

    # validate
    p_val = sub.add_parser("validate", help="Validate a config without training")
    p_val.add_argument("config_path", help="Path to config file")
    p_val.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key (repeatable)")

    # sources
    sub.add_parser("sources", help="List registered data sources")

    # report
    p_report = sub.add_parser("report", help="Per-unit structure report of a checkpoint")
    p_report.add_argument("--checkpoint", required=True, help="Path to checkpoint.npz")
    p_report.add_argument("--layer", type=int, default=None, help="Weighted layer index (default: all prunable)")
    p_report.add_argument("--limit", type=int, default=40, help="Rows per table")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-8s %(name)s: %(message)s",
    )

    commands = {
        "train": cmd_train,
        "sweep": cmd_sweep,
        "eval": cmd_eval,
        "resume": cmd_resume,
        "status": cmd_status,
        "validate": cmd_validate,
        "sources": cmd_sources,
        "report": cmd_report,
    }

    if args.command is None:
        parser.print_help()
        return 0

    handler = commands.get(args.command)
    if handler is None:
        parser.print_help()
        return 1

    try:
        return handler(args)
    except CheckpointError as e:
        print_error(f"Bad checkpoint: {e}")
        return 1
    except (FileNotFoundError, ValueError, OSError) as e:
        print_error(str(e))
        return 1
