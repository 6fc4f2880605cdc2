"""Per-run efficiency, proportionality and idle-power metrics.

All values are plain floats computed from the measured primitives (ssj_ops
and average power per target load, plus active idle power); the ratios printed
in the reports are never reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .parser import TARGET_LOADS, BenchmarkRun

IDLE = 0.0  # target-load key for the active idle interval


@dataclass(frozen=True)
class RunMetrics:
    result_id: str
    efficiency_per_level: dict[float, float]
    overall_efficiency: float
    relative_efficiency: dict[float, float]
    idle_fraction: float
    per_socket_power: dict[float, float]
    extrapolated_idle_w: float
    eiq: float
    # set when the two-point extrapolation lands at or below zero watts
    extrapolation_flag: bool


def _power_at(run: BenchmarkRun, level: float) -> float:
    if level == IDLE:
        return run.idle_power_w
    return run.level(level).avg_power_w


def efficiency_at(run: BenchmarkRun, level: float) -> float:
    m = run.level(level)
    return m.ssj_ops / m.avg_power_w


def overall_efficiency(run: BenchmarkRun) -> float:
    """Sum of ssj_ops over the ten load levels divided by the summed power, idle included."""
    total_ops = sum(m.ssj_ops for m in run.levels)
    total_power = sum(m.avg_power_w for m in run.levels) + run.idle_power_w
    return total_ops / total_power


def relative_efficiency(run: BenchmarkRun, level: float) -> float:
    if level == 1.0:
        return 1.0
    return efficiency_at(run, level) / efficiency_at(run, 1.0)


def idle_fraction(run: BenchmarkRun) -> float:
    return run.idle_power_w / run.level(1.0).avg_power_w


def extrapolated_idle(run: BenchmarkRun, levels: tuple[float, ...] = (0.1, 0.2)) -> float:
    """Active idle power predicted by a least-squares line through the low-load power readings.

    With the default two levels the line passes exactly through both points,
    so the result is ``2*P10 - P20``.  It can be zero or negative when power
    climbs steeply between 10% and 20%; that is returned unchanged.
    """
    loads = np.array([100 * lvl for lvl in levels])
    power = np.array([run.level(lvl).avg_power_w for lvl in levels])
    slope, intercept = np.polyfit(loads, power, 1)
    return float(intercept)


def eiq(run: BenchmarkRun) -> float:
    """Extrapolated idle power over measured active idle power (1 = no idle-specific savings)."""
    return extrapolated_idle(run) / run.idle_power_w


def per_socket_power(run: BenchmarkRun, level: float) -> float:
    """Average power per socket; pass ``IDLE`` for the active idle interval."""
    if run.sockets < 1:
        raise ValueError(f"{run.result_id}: sockets={run.sockets}")
    return _power_at(run, level) / run.sockets


def compute_metrics(run: BenchmarkRun) -> RunMetrics:
    extrapolated = extrapolated_idle(run)
    return RunMetrics(
        result_id=run.result_id,
        efficiency_per_level={lvl: efficiency_at(run, lvl) for lvl in TARGET_LOADS},
        overall_efficiency=overall_efficiency(run),
        relative_efficiency={lvl: relative_efficiency(run, lvl) for lvl in TARGET_LOADS},
        idle_fraction=idle_fraction(run),
        per_socket_power={lvl: per_socket_power(run, lvl) for lvl in (*TARGET_LOADS, IDLE)},
        extrapolated_idle_w=extrapolated,
        eiq=extrapolated / run.idle_power_w,
        extrapolation_flag=extrapolated <= 0,
    )


def _key(level: float) -> str:
    return "idle" if level == IDLE else f"{round(level * 100)}%"


def metrics_to_record(m: RunMetrics) -> dict:
    return {
        "record": "metrics",
        "result_id": m.result_id,
        "efficiency_per_level": {_key(k): v for k, v in m.efficiency_per_level.items()},
        "overall_efficiency": m.overall_efficiency,
        "relative_efficiency": {_key(k): v for k, v in m.relative_efficiency.items()},
        "idle_fraction": m.idle_fraction,
        "per_socket_power": {_key(k): v for k, v in m.per_socket_power.items()},
        "extrapolated_idle_w": m.extrapolated_idle_w,
        "eiq": m.eiq,
        "extrapolation_flag": m.extrapolation_flag,
    }


def _unkey(key: str) -> float:
    return IDLE if key == "idle" else int(key.rstrip("%")) / 100


def metrics_from_record(rec: dict) -> RunMetrics:
    return RunMetrics(
        result_id=rec["result_id"],
        efficiency_per_level={_unkey(k): v for k, v in rec["efficiency_per_level"].items()},
        overall_efficiency=rec["overall_efficiency"],
        relative_efficiency={_unkey(k): v for k, v in rec["relative_efficiency"].items()},
        idle_fraction=rec["idle_fraction"],
        per_socket_power={_unkey(k): v for k, v in rec["per_socket_power"].items()},
        extrapolated_idle_w=rec["extrapolated_idle_w"],
        eiq=rec["eiq"],
        extrapolation_flag=rec["extrapolation_flag"],
    )
