"""
Statistics for comparing exploration algorithms: coverage AUC, the Wilcoxon
rank-sum test (exact or normal approximation), Holm-Bonferroni correction
and the Vargha-Delaney A12 effect size.
"""

from math import comb
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import trapezoid
from scipy.stats import norm, rankdata

from fatesim.model.bench_model import AlgorithmSummary, ComparisonReport, Magnitude, PairwiseResult, RunRecord
from fatesim.utils.errors import InsufficientRunsError

EXACT_LIMIT = 20
A12_THRESHOLDS: Tuple[Tuple[float, Magnitude], ...] = ((0.21, "L"), (0.14, "M"), (0.06, "S"))


def auc(coverage: Sequence[float]) -> float:
    """Trapezoidal area under a coverage curve over unit-spaced steps (percent x steps)."""
    if len(coverage) == 0:
        raise ValueError("Cannot compute the AUC of an empty coverage vector")
    return float(trapezoid(np.asarray(coverage, dtype=np.float64)))


def wilcoxon_rank_sum(
    xs: Sequence[float], ys: Sequence[float], method: Literal["auto", "exact", "normal"] = "auto"
) -> float:
    """
    Two-sided p-value of the rank-sum test for independent samples.

    Ties get midranks. `auto` enumerates the exact rank-sum distribution when
    the samples total at most EXACT_LIMIT values and otherwise uses the
    normal approximation with tie and continuity corrections.
    """
    n, m = len(xs), len(ys)
    if n == 0 or m == 0:
        raise ValueError("Both samples must be nonempty")
    ranks = rankdata(np.concatenate([np.asarray(xs, float), np.asarray(ys, float)]))
    if method == "exact" or (method == "auto" and n + m <= EXACT_LIMIT):
        return _exact_p(ranks, n)
    return _normal_p(ranks, n, m)


def _exact_p(ranks: np.ndarray, n: int) -> float:
    # Midranks are multiples of 1/2, so doubled rank sums are exact integers.
    doubled = np.rint(2 * ranks).astype(int)
    total = len(doubled)
    observed = int(doubled[:n].sum())
    expected = n * (total + 1)

    max_sum = int(doubled.sum())
    # ways[k][s]: subsets of size k with doubled rank sum s
    ways = np.zeros((n + 1, max_sum + 1), dtype=np.int64)
    ways[0][0] = 1
    for r in doubled:
        for k in range(n, 0, -1):
            ways[k][r:] = ways[k][r:] + ways[k - 1][:max_sum + 1 - r]

    deviation = abs(observed - expected)
    extreme = sum(int(ways[n][s]) for s in range(max_sum + 1) if abs(s - expected) >= deviation)
    return min(1.0, extreme / comb(total, n))


def _normal_p(ranks: np.ndarray, n: int, m: int) -> float:
    total = n + m
    u = ranks[:n].sum() - n * (n + 1) / 2.0
    mean = n * m / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(counts ** 3 - counts)) / (total * (total - 1))
    variance = n * m / 12.0 * ((total + 1) - tie_term)
    if variance <= 0:
        return 1.0
    z = max(abs(u - mean) - 0.5, 0.0) / np.sqrt(variance)
    return float(min(1.0, 2.0 * norm.sf(z)))


def holm_bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> List[bool]:
    """Step-down Holm procedure; rejection flags in input order."""
    count = len(p_values)
    order = np.argsort(np.asarray(p_values, dtype=float), kind="stable")
    flags = [False] * count
    for position, index in enumerate(order):
        if p_values[index] > alpha / (count - position):
            break
        flags[index] = True
    return flags


def a12(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, Magnitude]:
    """Vargha-Delaney A12: probability that a draw from xs beats one from ys, ties counting half."""
    x = np.asarray(xs, dtype=float)[:, None]
    y = np.asarray(ys, dtype=float)[None, :]
    if x.size == 0 or y.size == 0:
        raise ValueError("Both samples must be nonempty")
    value = (np.sum(x > y) + 0.5 * np.sum(x == y)) / (x.size * y.size)
    return float(value), magnitude(float(value))


def magnitude(value: float) -> Magnitude:
    distance = abs(value - 0.5)
    for threshold, label in A12_THRESHOLDS:
        if distance >= threshold:
            return label
    return "N"


def compare_aucs(
    aucs: Mapping[str, Sequence[float]],
    alpha: float = 0.05,
    preset: str = "",
    summaries: Optional[Dict[str, AlgorithmSummary]] = None,
) -> ComparisonReport:
    """
    Winner (highest mean AUC) against every other algorithm, Holm-corrected,
    with effect sizes only for the pairs that stay significant.
    """
    if len(aucs) < 2:
        raise InsufficientRunsError("Comparison needs at least two algorithms")
    for name, values in aucs.items():
        if len(values) < 2:
            raise InsufficientRunsError(f"Algorithm '{name}' has {len(values)} run(s); at least 2 are required")

    means = {name: float(np.mean(values)) for name, values in aucs.items()}
    winner = max(means, key=lambda name: means[name])
    others = [name for name in aucs if name != winner]
    p_values = [wilcoxon_rank_sum(aucs[winner], aucs[name]) for name in others]
    rejections = holm_bonferroni(p_values, alpha)

    pairwise = []
    for name, p_value, reject in zip(others, p_values, rejections):
        result = PairwiseResult(algorithm=name, p_value=p_value, reject=reject)
        if reject:
            result.a12, result.magnitude = a12(aucs[winner], aucs[name])
        pairwise.append(result)

    if summaries is None:
        summaries = {
            name: AlgorithmSummary(
                runs=len(values), seeds=[], aucs=list(values), mean_auc=means[name],
                std_auc=float(np.std(values, ddof=1)), mean_final_coverage=0.0, mean_crashes=0.0,
            )
            for name, values in aucs.items()
        }
    report = ComparisonReport(preset=preset, alpha=alpha, winner=winner, algorithms=summaries, pairwise=pairwise)
    logger.info(f"Winner on {preset or 'model'}: {winner} ({report.effect_sizes or 'no significant effects'})")
    return report


def compare(records: Sequence[RunRecord], alpha: float = 0.05) -> ComparisonReport:
    """Group run records by algorithm label and compare. Input order does not matter."""
    groups: Dict[str, List[RunRecord]] = {}
    for record in sorted(records, key=lambda r: (r.algorithm, r.seed)):
        groups.setdefault(record.algorithm, []).append(record)

    aucs = {name: [auc(r.coverage) for r in runs] for name, runs in groups.items()}
    summaries = {}
    for name, runs in groups.items():
        values = aucs[name]
        summaries[name] = AlgorithmSummary(
            runs=len(runs),
            seeds=[r.seed for r in runs],
            aucs=values,
            mean_auc=float(np.mean(values)),
            std_auc=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
            mean_final_coverage=float(np.mean([r.coverage[-1] for r in runs])),
            mean_crashes=float(np.mean([len(r.crashes) for r in runs])),
        )
    preset = records[0].preset if records else ""
    return compare_aucs(aucs, alpha, preset, summaries)
