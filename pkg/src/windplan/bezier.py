"""Bezier trajectory refinement over the A* seed.

A single curve r(s) = sum_i B_{i,n}(s) P_i spans start to goal over a free
duration T, with physical time t = s * T. Derivatives come from hodographs
(control-point differencing) scaled by 1/T^k. The composite objective blends
path fidelity to the A* polyline, integrated squared snap, a thrust proxy
that charges the drag force needed to fight the relative wind, and a wall
barrier built from softplus of the clearance deficit.

Refinement is block coordinate descent: a golden-section line search per
interior control-point coordinate inside its trust box, then one over T.
Candidates are only accepted when they lower the objective, so the cost is
non-increasing sweep over sweep by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costmap import CostMap
from .errors import NonFiniteObjective, ParseError, ValidationError
from .lbm import WindField


def bernstein(i: int, n: int, s: float) -> float:
    """Bernstein basis polynomial B_{i,n}(s)."""
    if not 0 <= i <= n:
        raise ValidationError("bernstein", f"index {i} outside degree {n}")
    return math.comb(n, i) * s**i * (1.0 - s) ** (n - i)


def _decasteljau(points: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate a Bezier curve at parameters s, shape (m, dim)."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    layers = np.broadcast_to(points, (len(s),) + points.shape).copy()
    t = s[:, None, None]
    while layers.shape[1] > 1:
        layers = layers[:, :-1, :] * (1.0 - t) + layers[:, 1:, :] * t
    return layers[:, 0, :]


def derivative_points(points: np.ndarray, order: int) -> np.ndarray:
    """Control points of the order-th hodograph; a single zero point once
    the differencing exhausts the degree."""
    q = np.asarray(points, dtype=np.float64)
    n = len(q) - 1
    for r in range(order):
        if len(q) == 1:
            return np.zeros((1, q.shape[1]))
        q = (n - r) * (q[1:] - q[:-1])
    return q


@dataclass
class BezierTrajectory:
    control_points: np.ndarray  # (degree + 1, 2)
    T: float

    def __post_init__(self):
        self.control_points = np.ascontiguousarray(self.control_points, dtype=np.float64)
        if self.control_points.ndim != 2 or self.control_points.shape[1] != 2:
            raise ValidationError("trajectory", "control points must have shape (n+1, 2)")
        if len(self.control_points) < 2:
            raise ValidationError("trajectory", "need at least two control points")
        if not self.T > 0:
            raise ValidationError("trajectory.T", "duration must be positive")

    @property
    def degree(self) -> int:
        return len(self.control_points) - 1

    def position(self, s) -> np.ndarray:
        return _decasteljau(self.control_points, s)

    def state_at(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(position, velocity, acceleration) at time t; holds the endpoint
        at rest beyond T."""
        if t >= self.T:
            return self.control_points[-1].copy(), np.zeros(2), np.zeros(2)
        s = max(t, 0.0) / self.T
        pos = _decasteljau(self.control_points, s)[0]
        vel = _decasteljau(derivative_points(self.control_points, 1), s)[0] / self.T
        acc = _decasteljau(derivative_points(self.control_points, 2), s)[0] / self.T**2
        return pos, vel, acc


def evaluate(traj: BezierTrajectory, s) -> np.ndarray:
    """Curve position at parameter s in [0, 1] (scalar or array)."""
    out = traj.position(s)
    return out[0] if np.isscalar(s) else out


def derivatives(
    traj: BezierTrajectory, t: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(position, velocity, acceleration, snap) at physical time t.

    Snap of a curve below degree 4 is identically the zero vector.
    """
    if not 0.0 <= t <= traj.T:
        raise ValidationError("t", f"{t} outside [0, {traj.T}]")
    s = t / traj.T
    p = traj.control_points
    pos = _decasteljau(p, s)[0]
    vel = _decasteljau(derivative_points(p, 1), s)[0] / traj.T
    acc = _decasteljau(derivative_points(p, 2), s)[0] / traj.T**2
    if traj.degree < 4:
        snap = np.zeros(2)
    else:
        snap = _decasteljau(derivative_points(p, 4), s)[0] / traj.T**4
    return pos, vel, acc, snap


@dataclass
class DragModel:
    mass: float
    drag_gain: float  # N per m/s of relative wind

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("drag.mass", "must be positive")
        if self.drag_gain < 0:
            raise ValidationError("drag.drag_gain", "must be non-negative")


@dataclass
class ObjectiveWeights:
    lambda_p: float = 1.0
    lambda_s: float = 1.0
    lambda_t: float = 1.0
    lambda_w: float = 10.0

    def __post_init__(self):
        vals = (self.lambda_p, self.lambda_s, self.lambda_t, self.lambda_w)
        if any(v < 0 for v in vals):
            raise ValidationError("weights", "must be non-negative")
        if not any(v > 0 for v in vals):
            raise ValidationError("weights", "at least one weight must be positive")


@dataclass
class CostTerms:
    j_path: float
    j_snap: float
    j_thrust: float
    j_wall: float

    def total(self, w: ObjectiveWeights) -> float:
        return (
            w.lambda_p * self.j_path
            + w.lambda_s * self.j_snap
            + w.lambda_t * self.j_thrust
            + w.lambda_w * self.j_wall
        )


@dataclass
class CostContext:
    """Fixed inputs of the objective during refinement."""

    path_xy: np.ndarray            # A* polyline vertices, meters
    field: WindField | None        # None = still air
    cm: CostMap
    drag: DragModel
    n_samples: int = 128
    wall_margin: float = 0.1

    def __post_init__(self):
        self.path_xy = np.asarray(self.path_xy, dtype=np.float64)
        if self.path_xy.ndim != 2 or self.path_xy.shape[1] != 2 or len(self.path_xy) < 1:
            raise ValidationError("path_xy", "must be an (n, 2) polyline")
        if self.n_samples < 32:
            raise ValidationError("n_samples", "need at least 32 quadrature samples")


def _point_polyline_d2(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Squared distance from each point to the nearest spot on the polyline."""
    if len(poly) == 1:
        return ((points - poly[0]) ** 2).sum(axis=1)
    a = poly[:-1][None, :, :]
    ab = (poly[1:] - poly[:-1])[None, :, :]
    denom = (ab**2).sum(axis=2)
    t = ((points[:, None, :] - a) * ab).sum(axis=2) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, :, None] * ab
    d2 = ((points[:, None, :] - proj) ** 2).sum(axis=2)
    return d2.min(axis=1)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def cost_terms(
    traj: BezierTrajectory,
    path_xy: np.ndarray,
    field: WindField | None,
    cm: CostMap | None,
    drag: DragModel,
    n_samples: int = 128,
    wall_margin: float = 0.1,
) -> CostTerms:
    """Objective components via midpoint quadrature with n_samples panels."""
    m = int(n_samples)
    s = (np.arange(m) + 0.5) / m
    dt = traj.T / m
    p = traj.control_points

    pos = _decasteljau(p, s)
    vel = _decasteljau(derivative_points(p, 1), s) / traj.T
    acc = _decasteljau(derivative_points(p, 2), s) / traj.T**2
    if traj.degree < 4:
        snap = np.zeros_like(pos)
    else:
        snap = _decasteljau(derivative_points(p, 4), s) / traj.T**4

    path_xy = np.asarray(path_xy, dtype=np.float64)
    j_path = float(_point_polyline_d2(pos, path_xy).mean())
    j_snap = float((snap**2).sum() * dt)

    if field is not None:
        wx, wy = field.sample_many(pos)
        wind = np.column_stack((wx, wy))
    else:
        wind = np.zeros_like(pos)
    resid = drag.mass * acc - drag.drag_gain * (wind - vel)
    j_thrust = float((resid**2).sum() * dt)

    if cm is None:
        j_wall = 0.0
    else:
        deficit = _softplus(wall_margin - cm.sample_clearance(pos))
        j_wall = float((deficit**2).sum())
        interior = traj.control_points[1:-1]
        if len(interior):
            cp_deficit = _softplus(wall_margin - cm.sample_clearance(interior))
            j_wall += float((cp_deficit**2).sum())

    return CostTerms(j_path=j_path, j_snap=j_snap, j_thrust=j_thrust, j_wall=j_wall)


def init_from_path(
    path_xy: np.ndarray,
    start: tuple[float, float],
    goal: tuple[float, float],
    degree: int,
    cruise_speed: float,
    box_halfwidth: float,
) -> tuple[BezierTrajectory, list[tuple[np.ndarray, np.ndarray]]]:
    """Seed control points along the polyline at equal arc-length stations
    and build the per-point trust boxes. Endpoints pin to start/goal."""
    if degree < 3:
        raise ValidationError("degree", "refinement needs degree >= 3")
    path_xy = np.asarray(path_xy, dtype=np.float64)
    seg = np.hypot(*np.diff(path_xy, axis=0).T) if len(path_xy) > 1 else np.zeros(1)
    arclen = np.concatenate(([0.0], np.cumsum(seg)))
    total = float(arclen[-1])
    if total <= 0.0:
        raise ValidationError("path_xy", "polyline has zero length")

    points = np.empty((degree + 1, 2))
    points[0] = start
    points[-1] = goal
    for k in range(1, degree):
        target = total * k / degree
        idx = int(np.searchsorted(arclen, target, side="right") - 1)
        idx = min(idx, len(path_xy) - 2)
        span = arclen[idx + 1] - arclen[idx]
        frac = (target - arclen[idx]) / span if span > 0 else 0.0
        points[k] = path_xy[idx] + frac * (path_xy[idx + 1] - path_xy[idx])

    bounds = [
        (points[k] - box_halfwidth, points[k] + box_halfwidth)
        for k in range(1, degree)
    ]
    return BezierTrajectory(points, T=total / cruise_speed), bounds


@dataclass
class OptimizeResult:
    trajectory: BezierTrajectory
    j_history: list[float]  # objective after each sweep, [0] = initial
    terms: CostTerms
    sweeps: int
    converged: bool


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(fn, lo: float, hi: float, iters: int = 32) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return (c, fc) if fc < fd else (d, fd)


def optimize(
    initial: BezierTrajectory,
    weights: ObjectiveWeights,
    bounds: list[tuple[np.ndarray, np.ndarray]],
    context: CostContext,
    *,
    tol: float = 1e-6,
    max_sweeps: int = 40,
    t_factors: tuple[float, float] = (0.5, 2.0),
) -> OptimizeResult:
    """Block coordinate descent; endpoints and the box walls are hard
    constraints, everything else only moves when the objective improves."""
    points = initial.control_points.copy()
    T = initial.T
    n = initial.degree
    if len(bounds) != n - 1:
        raise ValidationError("bounds", f"expected {n - 1} interior boxes, got {len(bounds)}")

    def objective(pts: np.ndarray, dur: float) -> float:
        return cost_terms(
            BezierTrajectory(pts, dur),
            context.path_xy,
            context.field,
            context.cm,
            context.drag,
            n_samples=context.n_samples,
            wall_margin=context.wall_margin,
        ).total(weights)

    current = objective(points, T)
    if not math.isfinite(current):
        raise NonFiniteObjective(f"initial objective is {current}")
    history = [current]
    t_lo = t_factors[0] * initial.T
    t_hi = t_factors[1] * initial.T

    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        before = current
        for k in range(1, n):
            lo, hi = bounds[k - 1]
            for axis in (0, 1):
                if hi[axis] <= lo[axis]:
                    continue

                def fn(x, k=k, axis=axis):
                    trial = points.copy()
                    trial[k, axis] = x
                    return objective(trial, T)

                best_x, best_j = _golden(fn, float(lo[axis]), float(hi[axis]))
                if best_j < current:
                    points[k, axis] = best_x
                    current = best_j

        best_t, best_j = _golden(lambda x: objective(points, x), t_lo, t_hi)
        if best_j < current:
            T = best_t
            current = best_j

        if not math.isfinite(current):
            raise NonFiniteObjective(f"objective became {current}")
        history.append(current)
        if before - current <= tol * max(abs(before), 1e-30):
            converged = True
            break

    traj = BezierTrajectory(points, T)
    final_terms = cost_terms(
        traj,
        context.path_xy,
        context.field,
        context.cm,
        context.drag,
        n_samples=context.n_samples,
        wall_margin=context.wall_margin,
    )
    return OptimizeResult(
        trajectory=traj,
        j_history=history,
        terms=final_terms,
        sweeps=sweeps,
        converged=converged,
    )


_FMT = "%.17g"


def write_trajectory_csv(traj: BezierTrajectory, out: str | Path, dt: float = 0.01) -> None:
    """Uniform-in-time samples with derivatives through jerk."""
    if dt <= 0:
        raise ValidationError("dt", "must be positive")
    n = int(math.floor(traj.T / dt))
    ts = [k * dt for k in range(n + 1)]
    if ts[-1] < traj.T:
        ts.append(traj.T)
    p = traj.control_points
    d1 = derivative_points(p, 1)
    d2 = derivative_points(p, 2)
    d3 = derivative_points(p, 3)
    s = np.array([t / traj.T for t in ts])
    pos = _decasteljau(p, s)
    vel = _decasteljau(d1, s) / traj.T
    acc = _decasteljau(d2, s) / traj.T**2
    jerk = _decasteljau(d3, s) / traj.T**3
    lines = [
        f"# trajectory degree={traj.degree} T={_FMT % traj.T} dt={_FMT % dt}",
        "t,x,y,vx,vy,ax,ay,jx,jy",
    ]
    for k, t in enumerate(ts):
        row = (t, pos[k, 0], pos[k, 1], vel[k, 0], vel[k, 1], acc[k, 0], acc[k, 1], jerk[k, 0], jerk[k, 1])
        lines.append(",".join(_FMT % v for v in row))
    Path(out).write_text("\n".join(lines) + "\n")


def write_control_csv(traj: BezierTrajectory, out: str | Path) -> None:
    lines = [f"# control degree={traj.degree} T={_FMT % traj.T}", "k,x,y"]
    for k, (x, y) in enumerate(traj.control_points):
        lines.append(f"{k},{_FMT % x},{_FMT % y}")
    Path(out).write_text("\n".join(lines) + "\n")


def read_control_csv(path: str | Path) -> BezierTrajectory:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not lines or not lines[0].startswith("# control"):
        raise ParseError(f"{path}: missing control-polygon header")
    meta = dict(tok.split("=") for tok in lines[0].split()[2:])
    try:
        degree = int(meta["degree"])
        T = float(meta["T"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad control-polygon header") from exc
    rows = lines[2:]
    if len(rows) != degree + 1:
        raise ParseError(f"{path}: expected {degree + 1} control points, found {len(rows)}")
    pts = np.zeros((degree + 1, 2))
    for row in rows:
        parts = row.split(",")
        if len(parts) != 3:
            raise ParseError(f"{path}: malformed row {row!r}")
        k = int(parts[0])
        if not 0 <= k <= degree:
            raise ParseError(f"{path}: control index {k} out of range")
        pts[k] = (float(parts[1]), float(parts[2]))
    return BezierTrajectory(pts, T)
