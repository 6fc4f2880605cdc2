"""Year x vendor aggregation, era comparisons, shares, rankings and correlations."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .filters import canonical_year
from .metrics import IDLE, RunMetrics, compute_metrics
from .parser import BenchmarkRun, Vendor


class EmptySelectionError(ValueError):
    pass


class AnalysedRun(NamedTuple):
    run: BenchmarkRun
    metrics: RunMetrics

    @property
    def year(self) -> int:
        return canonical_year(self.run)

    @property
    def result_id(self) -> str:
        return self.run.result_id


def analyse(runs: Iterable[BenchmarkRun]) -> list[AnalysedRun]:
    return [AnalysedRun(run, compute_metrics(run)) for run in runs]


# A selector maps a run to one value or, for pooled distributions, several.
Selector = Callable[[AnalysedRun], "float | Sequence[float] | None"]


def per_socket_power_at(level: float) -> Selector:
    return lambda a: a.metrics.per_socket_power[level]


def relative_efficiency_at(*levels: float) -> Selector:
    if len(levels) == 1:
        return lambda a: a.metrics.relative_efficiency[levels[0]]
    return lambda a: [a.metrics.relative_efficiency[lvl] for lvl in levels]


def overall_efficiency(a: AnalysedRun) -> float:
    return a.metrics.overall_efficiency


def idle_fraction(a: AnalysedRun) -> float:
    return a.metrics.idle_fraction


def eiq(a: AnalysedRun) -> float:
    return a.metrics.eiq


def idle_power_per_socket(a: AnalysedRun) -> float:
    return a.metrics.per_socket_power[IDLE]


def _values(a: AnalysedRun, selector: Selector) -> list[float]:
    value = selector(a)
    if value is None:
        return []
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in value]


# ---------------------------------------------------------------------------
# eras

def until(year: int) -> Callable[[int], bool]:
    return lambda y: y <= year


def since(year: int) -> Callable[[int], bool]:
    return lambda y: y >= year


def before(year: int) -> Callable[[int], bool]:
    return lambda y: y < year


def between(first: int, last: int) -> Callable[[int], bool]:
    return lambda y: first <= y <= last


def in_era(runs: Iterable[AnalysedRun], era: Callable[[int], bool]) -> list[AnalysedRun]:
    return [a for a in runs if era(a.year)]


# ---------------------------------------------------------------------------
# distributions

@dataclass(frozen=True)
class DistributionSummary:
    n: int
    mean: float
    std: float
    min: float
    p25: float
    median: float
    p75: float
    max: float

    @classmethod
    def from_values(cls, values: Sequence[float], ddof: int = 0) -> "DistributionSummary":
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            raise EmptySelectionError("cannot summarise an empty sample")
        p25, median, p75 = np.quantile(arr, [0.25, 0.5, 0.75])
        std = float(arr.std(ddof=ddof)) if arr.size > ddof else math.nan
        return cls(int(arr.size), float(arr.mean()), std, float(arr.min()),
                   float(p25), float(median), float(p75), float(arr.max()))


def bin_by_year_vendor(runs: Iterable[AnalysedRun], selector: Selector,
                       ddof: int = 0) -> dict[tuple[int, Vendor], DistributionSummary]:
    """One summary per (hardware-availability year, Intel/AMD) bin, sorted by key."""
    bins: dict[tuple[int, Vendor], list[float]] = defaultdict(list)
    for a in runs:
        if a.run.vendor is Vendor.OTHER:
            continue
        bins[(a.year, a.run.vendor)].extend(_values(a, selector))
    return {key: DistributionSummary.from_values(vals, ddof)
            for key, vals in sorted(bins.items(), key=lambda kv: (kv[0][0], kv[0][1].value)) if vals}


def bin_by_year(runs: Iterable[AnalysedRun], selector: Selector, ddof: int = 0) -> dict[int, DistributionSummary]:
    """Vendor-pooled variant of :func:`bin_by_year_vendor`."""
    bins: dict[int, list[float]] = defaultdict(list)
    for a in runs:
        bins[a.year].extend(_values(a, selector))
    return {year: DistributionSummary.from_values(vals, ddof) for year, vals in sorted(bins.items()) if vals}


def era_mean(runs: Iterable[AnalysedRun], era: Callable[[int], bool], selector: Selector) -> float:
    values = [v for a in in_era(runs, era) for v in _values(a, selector)]
    if not values:
        raise EmptySelectionError("era selects no runs")
    return float(np.mean(values))


def top_k_vendor_counts(runs: Sequence[AnalysedRun], selector: Selector, k: int) -> dict[Vendor, int]:
    runs = list(runs)
    if k > len(runs):
        raise ValueError(f"k={k} exceeds population of {len(runs)}")
    ranked = sorted(runs, key=lambda a: (-float(selector(a)), a.result_id))
    counts = Counter(a.run.vendor for a in ranked[:k])
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].value)))


def feature_share(runs: Iterable[AnalysedRun | BenchmarkRun], feature: Callable[[BenchmarkRun], object],
                  per_year: bool = True) -> dict:
    """Category fractions of ``feature``, per canonical year or pooled.

    Returns ``{year: {category: fraction}}`` or, pooled, ``{category: fraction}``.
    """
    groups: dict[object, Counter] = defaultdict(Counter)
    for item in runs:
        run = item.run if isinstance(item, AnalysedRun) else item
        key = canonical_year(run) if per_year else None
        value = feature(run)
        groups[key][getattr(value, "value", value)] += 1

    def fractions(counter):
        total = sum(counter.values())
        return {cat: n / total for cat, n in sorted(counter.items(), key=lambda kv: str(kv[0]))}

    if not per_year:
        return fractions(groups[None]) if groups else {}
    return {year: fractions(c) for year, c in sorted(groups.items())}


def submission_rate(runs: Iterable[AnalysedRun | BenchmarkRun], first_year: int, last_year: int) -> float:
    """Runs per year over the inclusive year range (empty years count as zero)."""
    if last_year < first_year:
        raise ValueError("empty year range")
    n = 0
    for item in runs:
        run = item.run if isinstance(item, AnalysedRun) else item
        if first_year <= canonical_year(run) <= last_year:
            n += 1
    return n / (last_year - first_year + 1)


# ---------------------------------------------------------------------------
# correlations

FEATURES: dict[str, Selector] = {
    "cores_total": lambda a: a.run.cores_total,
    "threads_total": lambda a: a.run.threads_total,
    "sockets": lambda a: a.run.sockets,
    "cpu_nominal_ghz": lambda a: a.run.cpu_nominal_mhz / 1000,
    "memory_gb": lambda a: a.run.memory_gb,
    "full_load_power_per_socket_w": per_socket_power_at(1.0),
    "overall_efficiency": overall_efficiency,
    "idle_fraction": idle_fraction,
    "eiq": eiq,
}


@dataclass(frozen=True)
class FeatureStats:
    n: int
    mean: float
    std: float


@dataclass(frozen=True)
class CorrelationScan:
    features: tuple[str, ...]
    # None marks an undefined coefficient (a constant feature)
    matrix: tuple[tuple[float | None, ...], ...]
    vendor_stats: dict[str, dict[str, FeatureStats]]

    def coefficient(self, a: str, b: str) -> float | None:
        return self.matrix[self.features.index(a)][self.features.index(b)]


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    dx, dy = x - x.mean(), y - y.mean()
    r = float((dx @ dy) / math.sqrt(float(dx @ dx) * float(dy @ dy)))
    return max(-1.0, min(1.0, r))


def correlation_scan(runs: Sequence[AnalysedRun], features: Mapping[str, Selector] | None = None,
                     ddof: int = 0) -> CorrelationScan:
    """Pairwise Pearson coefficients plus per-vendor mean/std of each feature.

    Runs missing a feature are left out of the pairs involving it.
    """
    features = dict(features or FEATURES)
    runs = list(runs)
    if len(runs) < 3:
        raise ValueError("correlation scan needs at least three runs")
    names = tuple(features)
    columns = {}
    for name, selector in features.items():
        vals = []
        for a in runs:
            v = selector(a)
            vals.append(math.nan if v is None else float(v))
        columns[name] = np.array(vals)

    matrix = []
    for a_name in names:
        row = []
        for b_name in names:
            x, y = columns[a_name], columns[b_name]
            ok = ~(np.isnan(x) | np.isnan(y))
            row.append(_pearson(x[ok], y[ok]))
        matrix.append(tuple(row))

    vendor_stats: dict[str, dict[str, FeatureStats]] = {}
    vendors = np.array([a.run.vendor.value for a in runs])
    for vendor in sorted(set(vendors)):
        stats = {}
        for name in names:
            col = columns[name][vendors == vendor]
            col = col[~np.isnan(col)]
            if col.size:
                std = float(col.std(ddof=ddof)) if col.size > ddof else math.nan
                stats[name] = FeatureStats(int(col.size), float(col.mean()), std)
        vendor_stats[vendor] = stats
    return CorrelationScan(names, tuple(matrix), vendor_stats)
