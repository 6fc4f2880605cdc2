"""End-to-end pipeline and the emitted tables, records and plots.

Tables are comma-separated with a header row, preceded by one ``#`` comment
line naming the population they were computed over.  Ratios are printed with
4 significant digits, watts and ssj_ops/W with one decimal.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import svgplot, trends
from .corpus import RawResultDocument
from .filters import (ExclusionRecord, FilterConfig, FilterReport, comparability_filter, consistency_filter)
from .metrics import IDLE, metrics_to_record
from .parser import BenchmarkRun, ParseFailure, Vendor, dumps_record, failure_to_record, parse_many, run_to_record
from .trends import AnalysedRun, DistributionSummary

SCHEMA_VERSION = 1
FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")


def fmt_ratio(v: float | None) -> str:
    if v is None or not np.isfinite(v):
        return ""
    return np.format_float_positional(v, precision=4, unique=False, fractional=False, trim="-")


def fmt_watts(v: float | None) -> str:
    if v is None or not np.isfinite(v):
        return ""
    return f"{v:.1f}"


@dataclass
class PipelineResult:
    parsed: list[BenchmarkRun]
    failures: list[ParseFailure]
    consistency_report: FilterReport
    comparability_report: FilterReport
    exclusions: list[ExclusionRecord]
    consistent: list[AnalysedRun]
    filtered: list[AnalysedRun]
    config: dict = field(default_factory=dict)

    def exclusion_for(self, result_id: str) -> ExclusionRecord | None:
        for rec in self.exclusions:
            if rec.result_id == result_id:
                return rec
        return None


def run_pipeline(docs: Iterable[RawResultDocument], config: dict, jobs: int = 1) -> PipelineResult:
    century = config.get("parse", {}).get("two_digit_century")
    parsed, failures = parse_many(docs, jobs=jobs, two_digit_century=century)
    parsed.sort(key=lambda r: r.result_id)
    failures.sort(key=lambda f: f.result_id)
    fcfg = FilterConfig.from_mapping(config.get("filters", {}))
    consistent, c_report, c_excl = consistency_filter(parsed, fcfg)
    comparable, k_report, k_excl = comparability_filter(consistent, fcfg)
    return PipelineResult(
        parsed=parsed,
        failures=failures,
        consistency_report=c_report,
        comparability_report=k_report,
        exclusions=c_excl + k_excl,
        consistent=trends.analyse(consistent),
        filtered=trends.analyse(comparable),
        config=config,
    )


# ---------------------------------------------------------------------------
# tables

@dataclass
class Table:
    name: str
    population: str
    n: int
    columns: Sequence[str]
    rows: list[Sequence[object]]

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# table={self.name} population={self.population} n={self.n} schema={SCHEMA_VERSION}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()


SUMMARY_COLUMNS = ("n", "mean", "std", "min", "p25", "median", "p75", "max")


def _summary_cells(s: DistributionSummary, fmt: Callable[[float], str]) -> list[str]:
    return [str(s.n)] + [fmt(getattr(s, c)) for c in SUMMARY_COLUMNS[1:]]


def _binned_rows(runs, selector, fmt, ddof, prefix=()):
    rows = []
    for (year, vendor), s in trends.bin_by_year_vendor(runs, selector, ddof).items():
        rows.append([year, vendor.value, *prefix, *_summary_cells(s, fmt)])
    for year, s in trends.bin_by_year(runs, selector, ddof).items():
        rows.append([year, "All", *prefix, *_summary_cells(s, fmt)])
    rows.sort(key=lambda r: (r[0], {"Intel": 0, "AMD": 1, "All": 2}.get(r[1], 3), *map(str, r[2:2 + len(prefix)])))
    return rows


def _level_label(level: float) -> str:
    return "idle" if level == IDLE else f"{round(level * 100)}%"


def fig1_feature_share(result: PipelineResult) -> Table:
    features = {
        "os_family": lambda r: r.os_family,
        "vendor": lambda r: r.vendor,
        "nodes": lambda r: str(r.nodes) if r.nodes is not None and r.nodes <= 1 else ">1",
    }
    rows = []
    for fname, fn in features.items():
        for year, shares in trends.feature_share(result.consistent, fn, per_year=True).items():
            for cat, frac in shares.items():
                rows.append([year, fname, cat, fmt_ratio(frac)])
    return Table("fig1_feature_share", "consistency-filtered", len(result.consistent),
                 ["year", "feature", "category", "share"], rows)


def fig2_per_socket_power(result: PipelineResult) -> Table:
    ddof = result.config.get("analysis", {}).get("std_ddof", 0)
    rows = []
    for level in (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, IDLE):
        rows += _binned_rows(result.filtered, trends.per_socket_power_at(level), fmt_watts, ddof,
                             prefix=(_level_label(level),))
    order = {_level_label(l): i for i, l in enumerate((1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, IDLE))}
    rows.sort(key=lambda r: (order[r[2]], r[0], {"Intel": 0, "AMD": 1, "All": 2}[r[1]]))
    return Table("fig2_per_socket_power", "comparability-filtered", len(result.filtered),
                 ["year", "vendor", "level", *SUMMARY_COLUMNS], rows)


def fig3_overall_efficiency(result: PipelineResult) -> Table:
    ddof = result.config.get("analysis", {}).get("std_ddof", 0)
    rows = _binned_rows(result.filtered, trends.overall_efficiency, fmt_watts, ddof)
    return Table("fig3_overall_efficiency", "comparability-filtered", len(result.filtered),
                 ["year", "vendor", *SUMMARY_COLUMNS], rows)


def fig4_relative_efficiency(result: PipelineResult) -> Table:
    analysis = result.config.get("analysis", {})
    ddof = analysis.get("std_ddof", 0)
    levels = tuple(analysis.get("relative_levels", (0.6, 0.7, 0.8, 0.9)))
    pooled_label = f"{round(min(levels) * 100)}-{round(max(levels) * 100)}%"
    rows = _binned_rows(result.filtered, trends.relative_efficiency_at(*levels), fmt_ratio, ddof,
                        prefix=(pooled_label,))
    for level in levels:
        rows += _binned_rows(result.filtered, trends.relative_efficiency_at(level), fmt_ratio, ddof,
                             prefix=(_level_label(level),))
    rows.sort(key=lambda r: (r[0], {"Intel": 0, "AMD": 1, "All": 2}[r[1]], r[2] != pooled_label, r[2]))
    return Table("fig4_relative_efficiency", "comparability-filtered", len(result.filtered),
                 ["year", "vendor", "levels", *SUMMARY_COLUMNS], rows)


def fig5_idle_fraction(result: PipelineResult) -> Table:
    ddof = result.config.get("analysis", {}).get("std_ddof", 0)
    rows = _binned_rows(result.filtered, trends.idle_fraction, fmt_ratio, ddof)
    return Table("fig5_idle_fraction", "comparability-filtered", len(result.filtered),
                 ["year", "vendor", *SUMMARY_COLUMNS], rows)


def fig6_eiq(result: PipelineResult) -> Table:
    ddof = result.config.get("analysis", {}).get("std_ddof", 0)
    rows = _binned_rows(result.filtered, trends.eiq, fmt_ratio, ddof)
    return Table("fig6_eiq", "comparability-filtered", len(result.filtered),
                 ["year", "vendor", *SUMMARY_COLUMNS], rows)


FIGURE_TABLES: dict[str, Callable[[PipelineResult], Table]] = {
    "fig1": fig1_feature_share,
    "fig2": fig2_per_socket_power,
    "fig3": fig3_overall_efficiency,
    "fig4": fig4_relative_efficiency,
    "fig5": fig5_idle_fraction,
    "fig6": fig6_eiq,
}


def filter_report_table(result: PipelineResult) -> Table:
    rows = [["parse", "ParseFailure", len(result.failures)]]
    for pass_name, report in (("consistency", result.consistency_report),
                              ("comparability", result.comparability_report)):
        for stage, n in report.per_stage_counts.items():
            rows.append([pass_name, stage.value, n])
        rows.append([pass_name, "retained", report.retained_count])
    return Table("filter_report", "parsed", len(result.parsed) + len(result.failures),
                 ["pass", "stage", "count"], rows)


def exclusions_table(result: PipelineResult) -> Table:
    rows = [[e.result_id, e.stage.value, e.detail] for e in result.exclusions]
    return Table("exclusions", "parsed", len(result.parsed), ["result_id", "stage", "detail"], rows)


# ---------------------------------------------------------------------------
# records and plots

def run_records(result: PipelineResult) -> str:
    """Run records, each followed by its verdict and (if it has one) its metrics record."""
    metrics = {a.result_id: a.metrics for a in result.consistent}
    excluded = {e.result_id: e for e in result.exclusions}
    lines = []
    for run in result.parsed:
        lines.append(dumps_record(run_to_record(run)))
        exc = excluded.get(run.result_id)
        verdict = {"record": "verdict", "result_id": run.result_id,
                   "retained": exc is None,
                   "stage": exc.stage.value if exc else None,
                   "detail": exc.detail if exc else None}
        lines.append(dumps_record(verdict))
        if run.result_id in metrics:
            lines.append(dumps_record(metrics_to_record(metrics[run.result_id])))
    return "".join(line + "\n" for line in lines)


def failure_records(result: PipelineResult) -> str:
    return "".join(dumps_record(failure_to_record(f)) + "\n" for f in result.failures)


_SVG_SPECS = {
    "fig2": ("Power per socket at full load", "W / socket", lambda a: a.metrics.per_socket_power[1.0]),
    "fig3": ("Overall efficiency", "ssj_ops / W", lambda a: a.metrics.overall_efficiency),
    "fig4": ("Relative efficiency, 60-90% load", "relative efficiency",
             lambda a: float(np.mean([a.metrics.relative_efficiency[l] for l in (0.6, 0.7, 0.8, 0.9)]))),
    "fig5": ("Idle fraction", "idle / full-load power", lambda a: a.metrics.idle_fraction),
    "fig6": ("Extrapolated / measured active idle power", "EIQ", lambda a: a.metrics.eiq),
}


def figure_svg(result: PipelineResult, fig: str) -> str:
    if fig == "fig1":
        shares = trends.feature_share(result.consistent, lambda r: r.vendor, per_year=True)
        lines = {}
        for vendor in ("Intel", "AMD"):
            lines[vendor] = [(year, s.get(vendor, 0.0)) for year, s in shares.items()]
        os_shares = trends.feature_share(result.consistent, lambda r: r.os_family, per_year=True)
        lines["Linux"] = [(year, s.get("Linux", 0.0)) for year, s in os_shares.items()]
        return svgplot.render("Share of features per year", "hardware availability year", "share", lines=lines)

    title, ylabel, value = _SVG_SPECS[fig]
    points: dict[str, list] = {}
    for a in sorted(result.filtered, key=lambda a: a.result_id):
        if a.run.vendor is Vendor.OTHER:
            continue
        points.setdefault(a.run.vendor.value, []).append((a.year + (a.run.hw_availability.month - 0.5) / 12, value(a)))
    means = {year: s.mean for year, s in trends.bin_by_year(result.filtered, value).items()}
    lines = {"All": [(year + 0.5, m) for year, m in means.items()]}
    return svgplot.render(title, "hardware availability", ylabel, points=points, lines=lines)


# ---------------------------------------------------------------------------
# headline statistics

def headline(result: PipelineResult) -> dict:
    """The summary numbers quoted alongside the figures, keyed by a stable name."""
    analysis = result.config.get("analysis", {})
    early, recent = analysis.get("early_until", 2010), analysis.get("recent_since", 2022)
    split = analysis.get("split_year", 2018)
    corr_since = analysis.get("correlation_since", 2021)
    top_k = analysis.get("top_k", 100)
    ddof = analysis.get("std_ddof", 0)
    filtered, consistent = result.filtered, result.consistent
    out: dict = {
        "counts": {
            "parsed": len(result.parsed),
            "parse_failures": len(result.failures),
            "consistency": result.consistency_report.as_plain(),
            "consistent": result.consistency_report.retained_count,
            "comparability": result.comparability_report.as_plain(),
            "filtered": result.comparability_report.retained_count,
        }
    }

    def safe(fn):
        try:
            return fn()
        except (ValueError, KeyError):
            return None

    power = {}
    for level in (1.0, 0.2, 0.7):
        lo = safe(lambda: trends.era_mean(filtered, trends.until(early), trends.per_socket_power_at(level)))
        hi = safe(lambda: trends.era_mean(filtered, trends.since(recent), trends.per_socket_power_at(level)))
        power[_level_label(level)] = {f"until_{early}": lo, f"since_{recent}": hi,
                                      "ratio": hi / lo if lo and hi else None}
    out["per_socket_power_era_means"] = power
    if filtered:
        agree = sum(abs(a.metrics.overall_efficiency - a.run.reported_overall_efficiency) <= 0.5 for a in filtered)
        out["overall_efficiency_within_0.5"] = {"runs": agree, "of": len(filtered), "share": agree / len(filtered)}
    out["idle_fraction_yearly_mean"] = {y: s.mean for y, s in trends.bin_by_year(filtered, trends.idle_fraction).items()}
    if len(filtered) >= top_k:
        out[f"top_{top_k}_overall_efficiency"] = {
            v.value: n for v, n in trends.top_k_vendor_counts(filtered, trends.overall_efficiency, top_k).items()}

    shares = {}
    for label, era in ((f"before_{split}", trends.before(split)), (f"since_{split}", trends.since(split))):
        subset = trends.in_era(consistent, era)
        shares[label] = {
            "os_family": trends.feature_share(subset, lambda r: r.os_family, per_year=False),
            "vendor": trends.feature_share(subset, lambda r: r.vendor, per_year=False),
        }
    out["feature_shares"] = shares
    out["submission_rate"] = {
        "2005-2023": trends.submission_rate(consistent, 2005, 2023),
        "2013-2017": trends.submission_rate(consistent, 2013, 2017),
    }
    recent_runs = trends.in_era(filtered, trends.since(corr_since))
    if len(recent_runs) >= 3:
        scan = trends.correlation_scan(recent_runs, ddof=ddof)
        out[f"features_since_{corr_since}"] = {
            vendor: {name: {"n": s.n, "mean": s.mean, "std": s.std} for name, s in stats.items()
                     if name in ("cores_total", "cpu_nominal_ghz", "idle_fraction")}
            for vendor, stats in scan.vendor_stats.items()
        }
        out[f"correlation_with_idle_fraction_since_{corr_since}"] = {
            name: scan.coefficient("idle_fraction", name) for name in scan.features}
    return out


def headline_text(result: PipelineResult) -> str:
    return json.dumps(headline(result), indent=2, sort_keys=True, default=str) + "\n"
