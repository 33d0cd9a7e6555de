"""Robustness metrics over replay logs.

Percentiles use numpy's default linear interpolation. Jerk comes from the
flown positions: a centered moving average first (the sim log is clean, but
measured tracks are not), then a third central difference. Displacement
compares wind-on and wind-off replays of the same plan on their shared
timebase.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoOverlap, TooFewSamples, ValidationError, ZeroBaseline
from .flightsim import FlightLog


def p95(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise TooFewSamples("series", "p95 of an empty series")
    return float(np.percentile(values, 95))


def deviation_series(log: FlightLog, reference=None) -> tuple[np.ndarray, np.ndarray]:
    """Time-synchronous distance between flown and reference position.

    With `reference` given (anything exposing state_at), the reference is
    re-evaluated at the log timestamps, holding the goal past its horizon;
    otherwise the reference positions recorded in the log are used.
    """
    if reference is None:
        ref = log.ref_pos
    else:
        ref = np.array([reference.state_at(t)[0] for t in log.t])
    d = np.hypot(log.pos[:, 0] - ref[:, 0], log.pos[:, 1] - ref[:, 1])
    return log.t.copy(), d


def path_length(pos: np.ndarray) -> float:
    pos = np.asarray(pos, dtype=np.float64)
    if len(pos) < 2:
        return 0.0
    return float(np.hypot(*np.diff(pos, axis=0).T).sum())


def displacement(log_a: FlightLog, log_b: FlightLog) -> float:
    """Max distance between two flown tracks over the overlapping time
    window, with log_b linearly resampled onto log_a's timestamps. Raises
    NoOverlap when the windows share fewer than two samples."""
    t_end = min(log_a.t[-1], log_b.t[-1])
    mask = log_a.t <= t_end + 1e-12
    if mask.sum() < 2:
        raise NoOverlap("logs", "replay logs share fewer than two samples")
    ta = log_a.t[mask]
    pa = log_a.pos[mask]
    bx = np.interp(ta, log_b.t, log_b.pos[:, 0])
    by = np.interp(ta, log_b.t, log_b.pos[:, 1])
    return float(np.hypot(pa[:, 0] - bx, pa[:, 1] - by).max())


def discrete_frechet(p: np.ndarray, q: np.ndarray) -> float:
    """Discrete Frechet distance between two polylines (coupling DP)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if len(p) == 0 or len(q) == 0:
        raise TooFewSamples("polyline", "frechet needs non-empty polylines")
    d = np.hypot(
        p[:, None, 0] - q[None, :, 0],
        p[:, None, 1] - q[None, :, 1],
    )
    n, m = d.shape
    ca = np.empty((n, m))
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, m):
            ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]), d[i, j])
    return float(ca[-1, -1])


@dataclass
class JerkStats:
    mean: float
    max: float
    series: np.ndarray  # per-sample |jerk|, interior samples only


def jerk_stats(log_or_pos, dt: float | None = None, window: int = 5) -> JerkStats:
    """Jerk magnitude statistics from a FlightLog or raw position series.

    Each axis is smoothed with a centered length-`window` moving average
    (window=1 disables filtering), then differentiated with the third
    central difference (f[i+2] - 2 f[i+1] + 2 f[i-1] - f[i-2]) / (2 dt^3).
    """
    if isinstance(log_or_pos, FlightLog):
        pos = log_or_pos.pos
        dt = log_or_pos.dt
    else:
        pos = np.asarray(log_or_pos, dtype=np.float64)
        if dt is None:
            raise ValueError("dt is required for a raw position series")
    if pos.ndim == 1:
        pos = pos[:, None]
    if window < 1 or window % 2 == 0:
        raise ValidationError("window", "must be a positive odd integer")
    if len(pos) < window + 4:
        raise TooFewSamples("log", f"need at least {window + 4} samples, got {len(pos)}")
    if window > 1:
        kernel = np.full(window, 1.0 / window)
        f = np.stack(
            [np.convolve(pos[:, a], kernel, mode="valid") for a in range(pos.shape[1])],
            axis=1,
        )
    else:
        f = pos
    jerk = (f[4:] - 2.0 * f[3:-1] + 2.0 * f[1:-3] - f[:-4]) / (2.0 * dt**3)
    mag = np.sqrt((jerk**2).sum(axis=1))
    return JerkStats(mean=float(mag.mean()), max=float(mag.max()), series=mag)


def relative_reduction(delta_base: float, delta_improved: float) -> float:
    """Percent reduction of the improved value relative to the baseline."""
    if not delta_base > 0:
        raise ZeroBaseline("delta_base", f"baseline value {delta_base} is not positive")
    return (delta_base - delta_improved) / delta_base * 100.0


def wind_penalty(with_wind: float, without_wind: float) -> float:
    """Percent degradation caused by wind on a scalar metric."""
    if abs(without_wind) < 1e-15:
        raise ZeroBaseline("without_wind", "wind-off metric is zero")
    return (with_wind - without_wind) / without_wind * 100.0


@dataclass
class MetricsReport:
    """Per-replay scalar metrics. p95_dev <= max_dev by construction."""

    label: str
    max_dev: float
    p95_dev: float
    mean_dev: float
    frechet: float | None
    mean_jerk: float
    max_jerk: float
    path_length: float
    flight_time: float
    collided: bool
    collision_index: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "max_dev": self.max_dev,
            "p95_dev": self.p95_dev,
            "mean_dev": self.mean_dev,
            "frechet": self.frechet,
            "mean_jerk": self.mean_jerk,
            "max_jerk": self.max_jerk,
            "path_length": self.path_length,
            "flight_time": self.flight_time,
            "collided": self.collided,
            "collision_index": self.collision_index,
        }
        out.update(self.extra)
        return out


def report_from_log(
    log: FlightLog,
    label: str,
    *,
    reference=None,
    collided: bool = False,
    collision_index: int | None = None,
    plan_xy: np.ndarray | None = None,
) -> MetricsReport:
    _, dev = deviation_series(log, reference)
    jerk = jerk_stats(log)
    frech = None
    if plan_xy is not None:
        frech = discrete_frechet(log.pos, np.asarray(plan_xy, dtype=np.float64))
    return MetricsReport(
        label=label,
        max_dev=float(dev.max()),
        p95_dev=p95(dev),
        mean_dev=float(dev.mean()),
        frechet=frech,
        mean_jerk=jerk.mean,
        max_jerk=jerk.max,
        path_length=path_length(log.pos),
        flight_time=float(log.t[-1]),
        collided=collided,
        collision_index=collision_index,
    )


def aggregate_reports(reports: list[MetricsReport], label: str) -> MetricsReport:
    """Mean over trials per metric; collisions OR together (earliest index)."""
    if not reports:
        raise ValidationError("reports", "nothing to aggregate")
    def mean(key):
        return float(np.mean([getattr(r, key) for r in reports]))
    frechets = [r.frechet for r in reports]
    indices = [r.collision_index for r in reports if r.collision_index is not None]
    return MetricsReport(
        label=label,
        max_dev=mean("max_dev"),
        p95_dev=mean("p95_dev"),
        mean_dev=mean("mean_dev"),
        frechet=None if any(f is None for f in frechets) else float(np.mean(frechets)),
        mean_jerk=mean("mean_jerk"),
        max_jerk=mean("max_jerk"),
        path_length=mean("path_length"),
        flight_time=mean("flight_time"),
        collided=any(r.collided for r in reports),
        collision_index=min(indices) if indices else None,
        extra={"trials": len(reports)},
    )


_COMPARED = ("max_dev", "p95_dev", "mean_dev", "mean_jerk", "max_jerk", "path_length")


@dataclass
class ComparisonReport:
    """Wind-on vs wind-off comparison across the two planner modes.

    `penalties` maps planner -> metric -> (no_wind, wind, penalty_pct or
    None when the wind-off value is zero). `displacement_m` maps planner ->
    the max wind-induced track shift; `relative_reduction_pct` maps metric
    labels (including 'displacement') to the base-vs-improved reduction.
    """

    scenario: str
    penalties: dict
    displacement_m: dict
    relative_reduction_pct: dict
    trials: int = 1
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trials": self.trials,
            "penalties": self.penalties,
            "displacement_m": self.displacement_m,
            "relative_reduction_pct": self.relative_reduction_pct,
            **self.extra,
        }


def build_comparison(
    scenario: str,
    reports: dict[tuple[str, str], MetricsReport],
    displacements: dict[str, float],
    trials: int = 1,
) -> ComparisonReport:
    """Assemble the comparison from per-(planner, wind-state) reports.

    `reports` is keyed by (planner, "wind" | "calm"); `displacements` by
    planner name with "base" serving as the reduction baseline.
    """
    planners = sorted({p for (p, _) in reports})
    penalties: dict = {}
    for planner in planners:
        calm = reports[(planner, "calm")].to_dict()
        windy = reports[(planner, "wind")].to_dict()
        rows = {}
        for key in _COMPARED:
            m_nw, m_w = calm[key], windy[key]
            try:
                pen = wind_penalty(m_w, m_nw)
            except ZeroBaseline:
                pen = None
            rows[key] = {"no_wind": m_nw, "wind": m_w, "penalty_pct": pen}
        penalties[planner] = rows

    reductions: dict = {}
    if "base" in displacements:
        base_delta = displacements["base"]
        for planner, delta in displacements.items():
            if planner == "base":
                continue
            try:
                reductions["displacement"] = relative_reduction(base_delta, delta)
            except ZeroBaseline:
                reductions["displacement"] = None
    return ComparisonReport(
        scenario=scenario,
        penalties=penalties,
        displacement_m=dict(displacements),
        relative_reduction_pct=reductions,
        trials=trials,
    )


def write_comparison_json(report: ComparisonReport, out: str | Path) -> None:
    Path(out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_metrics_csv(rows: list[dict], out: str | Path) -> None:
    """Flat table, one row per (env, planner, wind, trial)."""
    head = ["env", "planner", "wind", "trial"]
    metric_keys: list[str] = []
    for row in rows:
        for key in row:
            if key not in head and key not in metric_keys:
                metric_keys.append(key)
    lines = [",".join(head + metric_keys)]
    for row in rows:
        cells = [str(row.get(k, "")) for k in head]
        for key in metric_keys:
            value = row.get(key, "")
            if isinstance(value, float):
                value = "%.17g" % value
            cells.append(str(value))
        lines.append(",".join(cells))
    Path(out).write_text("\n".join(lines) + "\n")
