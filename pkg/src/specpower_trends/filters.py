"""Staged exclusion of runs, with a ledger of what was dropped where.

Two passes, each a list of named predicates applied in a fixed order.  A run
is charged to the first stage it fails, so per-stage counts depend on the
order while the retained set does not.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Mapping, Sequence

from .parser import BenchmarkRun, MarketingClass, MonthYear, Vendor


class Stage(str, enum.Enum):
    NOT_ACCEPTED = "NotAccepted"
    AMBIGUOUS_DATE = "AmbiguousDate"
    IMPLAUSIBLE_DATE = "ImplausibleDate"
    AMBIGUOUS_CPU_NAME = "AmbiguousCpuName"
    MISSING_NODE_COUNT = "MissingNodeCount"
    INCONSISTENT_CORE_THREAD = "InconsistentCoreThread"
    IMPLAUSIBLE_CORE_THREAD = "ImplausibleCoreThread"
    NON_INTEL_AMD = "NonIntelAmd"
    NON_SERVER_CLASS = "NonServerClass"
    MULTI_NODE_OR_MANY_SOCKET = "MultiNodeOrManySocket"


CONSISTENCY_STAGES = (
    Stage.NOT_ACCEPTED,
    Stage.AMBIGUOUS_DATE,
    Stage.IMPLAUSIBLE_DATE,
    Stage.AMBIGUOUS_CPU_NAME,
    Stage.MISSING_NODE_COUNT,
    Stage.INCONSISTENT_CORE_THREAD,
    Stage.IMPLAUSIBLE_CORE_THREAD,
)
COMPARABILITY_STAGES = (
    Stage.NON_INTEL_AMD,
    Stage.NON_SERVER_CLASS,
    Stage.MULTI_NODE_OR_MANY_SOCKET,
)


@dataclass(frozen=True)
class FilterConfig:
    earliest_date: MonthYear = MonthYear(2004, 1)
    latest_date: MonthYear = MonthYear(2024, 6)
    max_hw_after_test_months: int = 24
    smt_ratios: tuple[int, ...] = (1, 2)
    max_cores_per_chip: int = 256
    max_nodes: int = 1
    max_sockets: int = 2

    @classmethod
    def from_mapping(cls, section: Mapping) -> "FilterConfig":
        def month(value):
            return value if isinstance(value, MonthYear) else MonthYear.from_string(str(value))

        defaults = cls()
        return cls(
            earliest_date=month(section.get("earliest_date", defaults.earliest_date)),
            latest_date=month(section.get("latest_date", defaults.latest_date)),
            max_hw_after_test_months=int(section.get("max_hw_after_test_months", defaults.max_hw_after_test_months)),
            smt_ratios=tuple(int(r) for r in section.get("smt_ratios", defaults.smt_ratios)),
            max_cores_per_chip=int(section.get("max_cores_per_chip", defaults.max_cores_per_chip)),
            max_nodes=int(section.get("max_nodes", defaults.max_nodes)),
            max_sockets=int(section.get("max_sockets", defaults.max_sockets)),
        )


@dataclass(frozen=True)
class ExclusionRecord:
    result_id: str
    stage: Stage
    detail: str


@dataclass(frozen=True)
class FilterReport:
    per_stage_counts: dict[Stage, int]
    retained_count: int
    input_count: int

    def __post_init__(self):
        if self.input_count != self.retained_count + sum(self.per_stage_counts.values()):
            raise ValueError("filter report does not add up")

    def as_plain(self) -> dict[str, int]:
        return {stage.value: n for stage, n in self.per_stage_counts.items()}


# Each check returns None when the run passes, else a detail string quoting
# the offending value.
Check = Callable[[BenchmarkRun, FilterConfig], "str | None"]


def _not_accepted(run, cfg):
    if not run.accepted:
        return f"acceptance_marker={run.acceptance_marker!r}"


def _ambiguous_date(run, cfg):
    if run.date_issues:
        return "; ".join(f"{name}={text!r}" for name, text in sorted(run.date_issues.items()))


def _implausible_date(run, cfg):
    dates = {
        "test_date": run.test_date,
        "submission_date": run.submission_date,
        "hw_availability": run.hw_availability,
        "sw_availability": run.sw_availability,
    }
    for name, value in dates.items():
        if value is not None and not cfg.earliest_date <= value <= cfg.latest_date:
            return f"{name}='{value}' outside [{cfg.earliest_date}, {cfg.latest_date}]"
    if run.hw_availability is None:
        return "hw_availability=None"
    if run.test_date is not None:
        lag = run.hw_availability.months_since(run.test_date)
        if lag > cfg.max_hw_after_test_months:
            return (f"hw_availability='{run.hw_availability}' is {lag} months after "
                    f"test_date='{run.test_date}'")


def _ambiguous_cpu_name(run, cfg):
    if len(run.cpu_names) > 1:
        return "cpu_names=" + " | ".join(repr(n) for n in run.cpu_names)
    lowered = run.cpu_name.lower()
    if run.vendor is Vendor.OTHER and "intel" in lowered and "amd" in lowered:
        return f"cpu_name={run.cpu_name!r}"


def _missing_node_count(run, cfg):
    if run.nodes is None:
        return "nodes=None"


def _inconsistent_core_thread(run, cfg):
    if run.cores_total != run.sockets * run.cores_per_chip:
        return (f"cores_total={run.cores_total} != sockets={run.sockets} x "
                f"cores_per_chip={run.cores_per_chip}")
    if run.threads_total is not None and run.threads_total % run.cores_total:
        return f"threads_total={run.threads_total} not a multiple of cores_total={run.cores_total}"


def _implausible_core_thread(run, cfg):
    if run.cores_per_chip > cfg.max_cores_per_chip:
        return f"cores_per_chip={run.cores_per_chip} > {cfg.max_cores_per_chip}"
    if run.threads_total is not None:
        ratio = run.threads_total // run.cores_total
        if ratio not in cfg.smt_ratios:
            return (f"threads_total={run.threads_total} / cores_total={run.cores_total} = {ratio} "
                    f"not in {list(cfg.smt_ratios)}")


def _non_intel_amd(run, cfg):
    if run.vendor is Vendor.OTHER:
        return f"cpu_name={run.cpu_name!r}"


def _non_server_class(run, cfg):
    if run.marketing_class is MarketingClass.OTHER:
        return f"cpu_name={run.cpu_name!r}"


def _multi_node_or_many_socket(run, cfg):
    if (run.nodes or 1) > cfg.max_nodes or run.sockets > cfg.max_sockets:
        return f"nodes={run.nodes} sockets={run.sockets}"


CHECKS: dict[Stage, Check] = {
    Stage.NOT_ACCEPTED: _not_accepted,
    Stage.AMBIGUOUS_DATE: _ambiguous_date,
    Stage.IMPLAUSIBLE_DATE: _implausible_date,
    Stage.AMBIGUOUS_CPU_NAME: _ambiguous_cpu_name,
    Stage.MISSING_NODE_COUNT: _missing_node_count,
    Stage.INCONSISTENT_CORE_THREAD: _inconsistent_core_thread,
    Stage.IMPLAUSIBLE_CORE_THREAD: _implausible_core_thread,
    Stage.NON_INTEL_AMD: _non_intel_amd,
    Stage.NON_SERVER_CLASS: _non_server_class,
    Stage.MULTI_NODE_OR_MANY_SOCKET: _multi_node_or_many_socket,
}


def apply_stages(runs: Iterable[BenchmarkRun], stages: Sequence[Stage], config: FilterConfig | None = None):
    config = config or FilterConfig()
    counts = {stage: 0 for stage in stages}
    retained, exclusions = [], []
    runs = list(runs)
    for run in runs:
        for stage in stages:
            detail = CHECKS[stage](run, config)
            if detail is not None:
                counts[stage] += 1
                exclusions.append(ExclusionRecord(run.result_id, stage, detail))
                break
        else:
            retained.append(run)
    report = FilterReport(per_stage_counts=counts, retained_count=len(retained), input_count=len(runs))
    return retained, report, exclusions


def consistency_filter(runs: Iterable[BenchmarkRun], config: FilterConfig | None = None,
                       stages: Sequence[Stage] = CONSISTENCY_STAGES):
    """Drop runs that are not accepted or whose dates / CPU fields do not hold together."""
    return apply_stages(runs, stages, config)


def comparability_filter(runs: Iterable[BenchmarkRun], config: FilterConfig | None = None,
                         stages: Sequence[Stage] = COMPARABILITY_STAGES):
    """Keep single-node, one- or two-socket Xeon/Opteron/EPYC systems."""
    return apply_stages(runs, stages, config)


def canonical_year(run: BenchmarkRun) -> int:
    if run.hw_availability is None:
        raise ValueError(f"{run.result_id}: no hardware availability date")
    return run.hw_availability.year


def write_exclusions(fh: IO[str], exclusions: Iterable[ExclusionRecord]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["result_id", "stage", "detail"])
    for rec in exclusions:
        writer.writerow([rec.result_id, rec.stage.value, rec.detail])


def read_exclusions(fh: IO[str]) -> list[ExclusionRecord]:
    return [ExclusionRecord(row["result_id"], Stage(row["stage"]), row["detail"]) for row in csv.DictReader(fh)]
