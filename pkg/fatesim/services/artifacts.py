"""
Experiment artifacts: per-run trace CSVs, the summary and manifest JSON,
the comparison report (JSON and text table) and the SVG coverage chart.
Everything `stats --in DIR` needs to rebuild a report is read back here too.
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402
from scipy.stats import sem  # noqa: E402

from fatesim.config import settings  # noqa: E402
from fatesim.model.bench_model import ComparisonReport, ExperimentConfig, RunRecord  # noqa: E402
from fatesim.services.stats import auc  # noqa: E402
from fatesim.utils.errors import ConfigError  # noqa: E402

TRACE_COLUMNS = [
    "run_id", "step", "episode", "node", "action_slot", "string_index",
    "mode", "reward", "coverage", "crash_flag", "crash_transition",
]
RUNS_DIR = "runs"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"
CHART_FILE = "coverage.svg"

_RUN_FILE = re.compile(r"^(?P<label>.+)__seed(?P<seed>-?\d+)\.csv$")

PathLike = Union[str, Path]


def output_dir(requested: Optional[str], source: str) -> Path:
    """FATESIM_OUT wins over --out, which wins over results/<source>."""
    if settings.FATESIM_OUT:
        return Path(settings.FATESIM_OUT)
    if requested:
        return Path(requested)
    slug = re.sub(r"[^A-Za-z0-9_.-]+", "_", Path(source).stem if source.endswith(".json") else source)
    return Path(settings.DEFAULT_OUT_DIR) / slug


def _write_json(path: Path, payload: Any):
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")


# Trace CSVs

def trace_frame(record: RunRecord) -> pd.DataFrame:
    steps = record.steps
    return pd.DataFrame({
        "run_id": [record.run_id] * steps,
        "step": np.arange(1, steps + 1),
        "episode": record.episodes,
        "node": record.nodes,
        "action_slot": record.slots,
        "string_index": record.string_indices,
        "mode": record.modes,
        "reward": record.rewards,
        "coverage": record.coverage,
        "crash_flag": np.asarray(record.crash_flags, dtype=int),
        "crash_transition": record.crash_transitions,
    }, columns=TRACE_COLUMNS)


def write_run_csv(record: RunRecord, out: Path) -> Path:
    runs = out / RUNS_DIR
    runs.mkdir(parents=True, exist_ok=True)
    path = runs / f"{record.run_id}.csv"
    trace_frame(record).to_csv(path, index=False, lineterminator="\n")
    return path


def read_run_csv(path: PathLike, preset: str = "") -> RunRecord:
    path = Path(path)
    match = _RUN_FILE.match(path.name)
    if match is None:
        raise ConfigError(f"Unexpected run file name '{path.name}'")
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(f"{path} lacks column(s) {', '.join(missing)}")
    if frame.empty:
        raise ConfigError(f"{path} holds no steps")

    crash_rows = frame[frame["crash_flag"] == 1]
    crashes = sorted({(str(node), int(tid)) for node, tid in zip(crash_rows["node"], crash_rows["crash_transition"])})
    return RunRecord(
        algorithm=match.group("label"),
        preset=preset,
        seed=int(match.group("seed")),
        coverage=frame["coverage"].astype(float).tolist(),
        rewards=frame["reward"].astype(float).tolist(),
        episodes=frame["episode"].astype(int).tolist(),
        nodes=frame["node"].astype(str).tolist(),
        slots=frame["action_slot"].astype(int).tolist(),
        string_indices=frame["string_index"].astype(int).tolist(),
        modes=frame["mode"].astype(int).tolist(),
        crash_flags=frame["crash_flag"].astype(bool).tolist(),
        crash_transitions=frame["crash_transition"].astype(int).tolist(),
        crashes=crashes,
    )


# Summary and manifest

def write_summary(out: Path, config: ExperimentConfig, records: Sequence[RunRecord], failures: Mapping[str, str]) -> Path:
    path = out / SUMMARY_FILE
    _write_json(path, {
        "config": config.model_dump(mode="json"),
        "seeds": config.seeds(),
        "runs": [
            {
                "run_id": record.run_id,
                "algorithm": record.algorithm,
                "seed": record.seed,
                "auc": auc(record.coverage),
                "final_coverage": record.coverage[-1],
                "crash_count": len(record.crashes),
                "crashes": [list(crash) for crash in record.crashes],
            }
            for record in records
        ],
        "failures": dict(failures),
    })
    return path


def write_manifest(out: Path, run_ids: Sequence[str], failures: Mapping[str, str]) -> Path:
    path = out / MANIFEST_FILE
    _write_json(path, {
        "complete": not failures,
        "runs": {run_id: ("failed" if run_id in failures else "ok") for run_id in run_ids},
        "failures": dict(failures),
    })
    return path


def read_summary(in_dir: Path) -> Optional[Dict[str, Any]]:
    path = in_dir / SUMMARY_FILE
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Corrupt {path}: {e.msg}")


def load_run_directory(in_dir: PathLike) -> Tuple[Optional[ExperimentConfig], List[RunRecord]]:
    """Read every run CSV under `in_dir`, plus the resolved config when summary.json is present."""
    in_dir = Path(in_dir)
    runs = in_dir / RUNS_DIR
    if not runs.is_dir():
        raise ConfigError(f"No '{RUNS_DIR}' directory under {in_dir}")
    summary = read_summary(in_dir)
    config = ExperimentConfig.model_validate(summary["config"]) if summary else None
    preset = config.model_source if config else ""
    records = [read_run_csv(path, preset) for path in sorted(runs.glob("*.csv"))]
    logger.info(f"Loaded {len(records)} run(s) from {runs}")
    return config, records


# Comparison report

def report_table(report: ComparisonReport) -> pd.DataFrame:
    tests = {p.algorithm: p for p in report.pairwise}
    rows = []
    for name, summary in report.algorithms.items():
        test = tests.get(name)
        rows.append({
            "algorithm": f"*{name}" if name == report.winner else name,
            "runs": summary.runs,
            "mean_auc": round(summary.mean_auc, 1),
            "std_auc": round(summary.std_auc, 1),
            "final_cov": round(summary.mean_final_coverage, 2),
            "crashes": round(summary.mean_crashes, 2),
            "p_value": "-" if test is None else f"{test.p_value:.4g}",
            "holm": "-" if test is None else ("reject" if test.reject else "keep"),
            "a12": "-" if test is None or test.a12 is None else f"{test.a12:.3f} ({test.magnitude})",
        })
    return pd.DataFrame(rows).sort_values("mean_auc", ascending=False, kind="stable")


def render_report(report: ComparisonReport) -> str:
    lines = [
        f"Model: {report.preset}",
        f"Winner: {report.winner} (alpha {report.alpha}, Holm-Bonferroni)",
        f"Effect sizes: {report.effect_sizes or 'none significant'}",
        "",
        report_table(report).to_string(index=False),
    ]
    return "\n".join(lines) + "\n"


def write_report(out: Path, report: ComparisonReport) -> Tuple[Path, Path]:
    json_path, text_path = out / REPORT_JSON, out / REPORT_TEXT
    _write_json(json_path, {**report.model_dump(mode="json"), "effect_sizes": report.effect_sizes})
    text_path.write_text(render_report(report), encoding="utf-8")
    return json_path, text_path


# Coverage chart

def coverage_bands(records: Sequence[RunRecord]) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Per algorithm: mean coverage per step and its standard error over runs."""
    groups: Dict[str, List[List[float]]] = {}
    for record in sorted(records, key=lambda r: (r.algorithm, r.seed)):
        groups.setdefault(record.algorithm, []).append(record.coverage)
    bands = {}
    for name, curves in groups.items():
        matrix = np.asarray(curves, dtype=float)
        error = sem(matrix, axis=0, ddof=1) if len(curves) > 1 else np.zeros(matrix.shape[1])
        bands[name] = (matrix.mean(axis=0), error)
    return bands


def write_chart(out: Path, records: Sequence[RunRecord], title: str = "") -> Optional[Path]:
    if not records:
        logger.warning("No successful runs; skipping the coverage chart")
        return None
    path = out / CHART_FILE
    plt.rcParams["svg.hashsalt"] = settings.APP_NAME
    fig, ax = plt.subplots(figsize=(8, 5))
    for name, (mean, error) in coverage_bands(records).items():
        steps = np.arange(1, len(mean) + 1)
        ax.plot(steps, mean, label=name, linewidth=1.2)
        ax.fill_between(steps, mean - error, mean + error, alpha=0.25)
    ax.set_xlabel("Step")
    ax.set_ylabel("Activity coverage (%)")
    ax.set_title(title or "Coverage over steps (mean ± SEM)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path
