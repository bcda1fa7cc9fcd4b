"""
Run Controller - benchmark runs and hyperparameter sweeps.
"""

import argparse
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from fatesim.config import settings
from fatesim.model.agent_model import SWEEP_GRIDS
from fatesim.model.bench_model import ExperimentConfig, RunRecord
from fatesim.services.artifacts import (
    output_dir, render_report, write_chart, write_manifest, write_report, write_run_csv, write_summary,
)
from fatesim.services.runner import plan_jobs, run_matrix
from fatesim.services.stats import compare
from fatesim.utils.errors import ConfigError, InsufficientRunsError, RunFailedError
from fatesim.utils.response import success_response


def add_experiment_arguments(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", help="synthetic preset, e.g. social/20_str")
    source.add_argument("--model", dest="model_path", help="path to a JSON app model")
    parser.add_argument("--reps", dest="repetitions", type=int, help="runs per algorithm")
    parser.add_argument("--seed", dest="base_seed", type=int, help="seed of the first run")
    parser.add_argument("--steps", type=int, help="environment steps per run")
    parser.add_argument("--episode-length", type=int, help="steps per episode")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--alpha", type=float, help="family-wise significance level")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--config", help="JSON file with experiment settings; flags override it")
    parser.add_argument(
        "--set", dest="knobs", action="append", default=[], metavar="ALGO.KNOB=VALUE",
        help="hyperparameter override, repeatable",
    )
    parser.add_argument(
        "--desk", action="store_true",
        help=f"desk scale: {settings.DESK_SCALE_REPETITIONS} repetitions unless --reps is given",
    )


def register(subparsers):
    run = subparsers.add_parser("run", help="run algorithms on a model and compare them")
    add_experiment_arguments(run)
    run.add_argument("--algos", help="comma-separated algorithms (default: all)")
    run.set_defaults(handler=cmd_run)

    sweep = subparsers.add_parser("sweep", help="run a hyperparameter grid as labelled configurations")
    add_experiment_arguments(sweep)
    sweep.add_argument("--grid", required=True, choices=sorted(SWEEP_GRIDS))
    sweep.set_defaults(handler=cmd_sweep)


def parse_knobs(knobs: List[str]) -> Dict[str, Dict[str, Any]]:
    """Turn ['ddpg.nb_train_steps=25'] into {'ddpg': {'nb_train_steps': 25}}."""
    overrides: Dict[str, Dict[str, Any]] = {}
    for knob in knobs:
        name, separator, raw = knob.partition("=")
        algorithm, dot, field = name.partition(".")
        if not separator or not dot or not algorithm or not field:
            raise ConfigError(f"Malformed override '{knob}', expected ALGO.KNOB=VALUE")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides.setdefault(algorithm, {})[field] = value
    return overrides


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e.msg} (line {e.lineno})")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def build_config(args: argparse.Namespace, default_repetitions: int, **fixed) -> ExperimentConfig:
    """Merge the --config file, command-line flags and command-fixed fields into one config."""
    data = load_config_file(args.config)
    for field in ("preset", "model_path", "repetitions", "base_seed", "steps",
                  "episode_length", "workers", "alpha", "out_dir"):
        value = getattr(args, field)
        if value is not None:
            data[field] = value
    if args.preset is not None:
        data.pop("model_path", None)
    if args.model_path is not None:
        data.pop("preset", None)

    for algorithm, knobs in parse_knobs(args.knobs).items():
        data.setdefault("overrides", {}).setdefault(algorithm, {}).update(knobs)

    if "repetitions" not in data:
        if args.desk:
            logger.warning(
                f"Desk scale: {settings.DESK_SCALE_REPETITIONS} repetitions per algorithm; "
                f"significance is weaker than with {default_repetitions}"
            )
            data["repetitions"] = settings.DESK_SCALE_REPETITIONS
        else:
            data["repetitions"] = default_repetitions
    data.setdefault("workers", settings.WORKERS)
    data.update(fixed)
    return ExperimentConfig.model_validate(data)


def execute(config: ExperimentConfig) -> int:
    """Run the matrix, write every artifact and report. Failed runs still leave partial artifacts."""
    out = output_dir(config.out_dir, config.model_source)
    out.mkdir(parents=True, exist_ok=True)
    run_ids = [f"{job.variant.label}__seed{job.seed}" for job in plan_jobs(config)]
    logger.info(f"Writing artifacts to {out}")

    records, failures = run_matrix(config)
    for record in records:
        write_run_csv(record, out)
    write_summary(out, config, records, failures)
    write_manifest(out, run_ids, failures)
    write_chart(out, records, title=config.model_source)
    text = _report(out, records, config.alpha)

    if failures:
        raise RunFailedError(f"{len(failures)} of {len(run_ids)} run(s) failed; see {out / 'manifest.json'}")
    return success_response(None, text=text or f"{len(records)} run(s) written to {out}")


def _report(out: Path, records: List[RunRecord], alpha: float) -> Optional[str]:
    try:
        report = compare(records, alpha)
    except InsufficientRunsError as e:
        logger.warning(f"No comparison report: {e.message}")
        return None
    write_report(out, report)
    return render_report(report)


def cmd_run(args: argparse.Namespace) -> int:
    fixed = {}
    if args.algos is not None:
        fixed["algorithms"] = [name.strip() for name in args.algos.split(",") if name.strip()]
    config = build_config(args, settings.DEFAULT_REPETITIONS, **fixed)
    logger.info(f"Run requested: {', '.join(config.algorithms)} on {config.model_source}")
    return execute(config)


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args, settings.SWEEP_REPETITIONS, grid=args.grid, algorithms=[args.grid])
    logger.info(f"Sweep requested: grid {args.grid} ({len(SWEEP_GRIDS[args.grid])} configurations)")
    return execute(config)
