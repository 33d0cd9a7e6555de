"""Wind-aware traversal costs on the planning grid.

Each free cell blends three normalized penalties against the unit vector g
pointing from start to goal: wind speed ``c_s = s / s_max``, headwind
``c_d = 1 - (alpha + 1) / 2``, and misalignment ``c_a = 1 - |alpha|``, where
``alpha`` is the cosine between the local wind direction and g. Calm cells
have alpha defined as 0, which lands on (c_s, c_d, c_a) = (0, 0.5, 1): calmer
than a tailwind, cheaper than a headwind. The blended map is clamped, then
smoothed with an obstacle-masked Gaussian, and walls are stamped last.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np
from scipy import ndimage

from .env import OccupancyGrid, PipelineParams
from .errors import DegenerateGoal, DimensionMismatch, ValidationError
from .lbm import WindField


def goal_direction(
    start: tuple[float, float], goal: tuple[float, float], cell_size: float = 0.0
) -> np.ndarray:
    """Unit vector from start to goal; degenerate below half a cell apart."""
    d = np.array([goal[0] - start[0], goal[1] - start[1]], dtype=np.float64)
    norm = float(np.hypot(d[0], d[1]))
    if norm < max(cell_size / 2.0, 1e-12):
        raise DegenerateGoal("goal", "start and goal are closer than half a cell")
    return d / norm


def cell_cost(
    u: tuple[float, float],
    s_max: float,
    g: tuple[float, float],
    w_s: float,
    w_d: float,
    w_a: float,
) -> float:
    """Blended wind cost of one cell before clamping and smoothing."""
    ux, uy = float(u[0]), float(u[1])
    s = math.hypot(ux, uy)
    if s > 0.0 and s_max > 0.0:
        alpha = (ux * g[0] + uy * g[1]) / s
        c_s = s / s_max
    else:
        alpha = 0.0
        c_s = 0.0
    c_d = 1.0 - (alpha + 1.0) / 2.0
    c_a = 1.0 - abs(alpha)
    return w_s * c_s + w_d * c_d + w_a * c_a


@dataclass
class CostMap:
    width: int
    height: int
    cell_size: float
    cost: np.ndarray       # float64 (height, width)
    obstacle: np.ndarray   # bool (height, width)
    goal_dir: np.ndarray   # unit (2,)
    speed_norm: np.ndarray | None = None  # s / s_max per cell, 0 when flow-agnostic
    mean_alignment: float = 0.0           # mean alpha over free cells
    c_wall: float = 1000.0
    _clearance: np.ndarray | None = dfield(default=None, repr=False)

    def __post_init__(self):
        shape = (self.height, self.width)
        self.cost = np.ascontiguousarray(self.cost, dtype=np.float64)
        self.obstacle = np.ascontiguousarray(self.obstacle, dtype=bool)
        if self.cost.shape != shape or self.obstacle.shape != shape:
            raise ValidationError("costmap", f"arrays must have shape {shape}")
        if not np.isfinite(self.cost).all():
            raise ValidationError("costmap.cost", "must be finite")
        if self.speed_norm is None:
            self.speed_norm = np.zeros(shape)
        self.speed_norm = np.ascontiguousarray(self.speed_norm, dtype=np.float64)
        self.goal_dir = np.asarray(self.goal_dir, dtype=np.float64)

    @property
    def clearance_m(self) -> np.ndarray:
        """Distance (m) from each cell center to the nearest obstacle cell."""
        if self._clearance is None:
            self._clearance = (
                ndimage.distance_transform_edt(~self.obstacle) * self.cell_size
            )
        return self._clearance

    def sample_cost(self, points: np.ndarray) -> np.ndarray:
        """Bilinear cost at physical points; clamped to the domain edge."""
        return _bilinear(self.cost, points, self.cell_size)

    def sample_clearance(self, points: np.ndarray) -> np.ndarray:
        """Bilinear clearance at physical points; zero outside the domain."""
        points = np.asarray(points, dtype=np.float64)
        vals = _bilinear(self.clearance_m, points, self.cell_size)
        ex = self.width * self.cell_size
        ey = self.height * self.cell_size
        inside = (
            (points[:, 0] >= 0) & (points[:, 0] < ex)
            & (points[:, 1] >= 0) & (points[:, 1] < ey)
        )
        return np.where(inside, vals, 0.0)


def _bilinear(arr: np.ndarray, points: np.ndarray, cell_size: float) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    h, w = arr.shape
    u = np.clip(points[:, 0] / cell_size - 0.5, 0.0, w - 1.0)
    v = np.clip(points[:, 1] / cell_size - 0.5, 0.0, h - 1.0)
    i0 = np.minimum(u.astype(np.int64), w - 2) if w > 1 else np.zeros(len(u), np.int64)
    j0 = np.minimum(v.astype(np.int64), h - 2) if h > 1 else np.zeros(len(v), np.int64)
    fu = u - i0
    fv = v - j0
    return (
        arr[j0, i0] * (1 - fu) * (1 - fv)
        + arr[j0, i0 + 1] * fu * (1 - fv)
        + arr[j0 + 1, i0] * (1 - fu) * fv
        + arr[j0 + 1, i0 + 1] * fu * fv
    )


def build_costmap(
    field: WindField | None,
    grid: OccupancyGrid,
    start: tuple[float, float],
    goal: tuple[float, float],
    params: PipelineParams,
    flow_aware: bool = True,
) -> CostMap:
    """Cost map over a (dilated) occupancy grid.

    The wind field is bilinearly resampled when its resolution differs from
    the grid; physical extents must agree. With flow_aware off the map is
    flat at base_cost and the field may be None.
    """
    g = goal_direction(start, goal, grid.cell_size)
    shape = (grid.height, grid.width)

    if not flow_aware:
        cost = np.where(grid.solid, params.c_wall, params.base_cost)
        return CostMap(
            grid.width, grid.height, grid.cell_size, cost, grid.solid.copy(), g,
            c_wall=params.c_wall,
        )

    if field is None:
        raise ValidationError("field", "flow-aware cost map requires a wind field")
    vx, vy = _field_on_grid(field, grid)
    speed = np.hypot(vx, vy)
    s_max = float(speed.max(initial=0.0))

    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(speed > 0.0, (vx * g[0] + vy * g[1]) / speed, 0.0)
    c_s = speed / s_max if s_max > 0.0 else np.zeros(shape)
    c_d = 1.0 - (alpha + 1.0) / 2.0
    c_a = 1.0 - np.abs(alpha)
    raw = params.w_s * c_s + params.w_d * c_d + params.w_a * c_a
    clamped = np.clip(raw, params.clamp_min, params.clamp_max)

    smoothed = _masked_smooth(clamped, ~grid.solid, params.sigma_smooth)
    cost = np.where(grid.solid, params.c_wall, smoothed)

    free = ~grid.solid
    mean_alpha = float(alpha[free].mean()) if free.any() else 0.0
    return CostMap(
        grid.width,
        grid.height,
        grid.cell_size,
        cost,
        grid.solid.copy(),
        g,
        speed_norm=np.where(free, c_s, 0.0),
        mean_alignment=mean_alpha,
        c_wall=params.c_wall,
    )


def _field_on_grid(field: WindField, grid: OccupancyGrid) -> tuple[np.ndarray, np.ndarray]:
    same_shape = (field.width, field.height) == (grid.width, grid.height)
    if same_shape and abs(field.cell_size - grid.cell_size) < 1e-12:
        return field.vx, field.vy
    fx, fy = field.extent
    gx, gy = grid.extent
    if abs(fx - gx) > grid.cell_size / 2 or abs(fy - gy) > grid.cell_size / 2:
        raise DimensionMismatch(
            "field",
            f"field extent ({fx:.3f}, {fy:.3f}) does not cover grid ({gx:.3f}, {gy:.3f})",
        )
    jj, ii = np.mgrid[0 : grid.height, 0 : grid.width]
    centers = np.column_stack(
        (((ii + 0.5) * grid.cell_size).ravel(), ((jj + 0.5) * grid.cell_size).ravel())
    )
    vx, vy = field.sample_many(centers)
    return vx.reshape(jj.shape), vy.reshape(jj.shape)


def _masked_smooth(values: np.ndarray, free: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur over free cells only, kernel renormalized per cell so
    obstacle cells contribute no weight. Obstacle positions keep their input
    value (they are re-stamped by the caller anyway)."""
    if sigma <= 0.0:
        return values.copy()
    num = ndimage.gaussian_filter(
        np.where(free, values, 0.0), sigma, truncate=3.0, mode="constant", cval=0.0
    )
    den = ndimage.gaussian_filter(
        free.astype(np.float64), sigma, truncate=3.0, mode="constant", cval=0.0
    )
    out = values.copy()
    ok = free & (den > 0.0)
    out[ok] = num[ok] / den[ok]
    return out


def polyline_cost_integral(cm: CostMap, points: np.ndarray, ds: float | None = None) -> float:
    """Line integral of the (bilinear) cell cost along a polyline, via
    midpoint sampling at roughly half-cell resolution.

    Wall cells are held at the highest traversable cost so the integral
    measures wind exposure; the wall sentinel would otherwise leak into
    bilinear samples next to obstacles and swamp the comparison.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return 0.0
    if ds is None:
        ds = cm.cell_size / 2.0
    free = ~cm.obstacle
    ceiling = float(cm.cost[free].max()) if free.any() else float(cm.cost.max())
    cost = np.minimum(cm.cost, ceiling)
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        seg = float(np.hypot(*(b - a)))
        if seg == 0.0:
            continue
        n = max(1, int(math.ceil(seg / ds)))
        t = (np.arange(n) + 0.5) / n
        samples = a[None, :] + t[:, None] * (b - a)[None, :]
        total += float(_bilinear(cost, samples, cm.cell_size).sum()) * (seg / n)
    return total


_FMT = "%.17g"


def write_costmap_csv(cm: CostMap, path: str | Path) -> None:
    gd = f"{_FMT % cm.goal_dir[0]};{_FMT % cm.goal_dir[1]}"
    lines = [
        f"# costmap width={cm.width} height={cm.height} cell_size={_FMT % cm.cell_size} goal_dir={gd}",
        "i,j,cost,obstacle",
    ]
    for j in range(cm.height):
        for i in range(cm.width):
            lines.append(
                f"{i},{j},{_FMT % cm.cost[j, i]},{1 if cm.obstacle[j, i] else 0}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_costmap_pgm(cm: CostMap, path: str | Path) -> None:
    """8-bit heat rendering: free costs scaled to 0..254, obstacles at 255."""
    from . import pgm

    free = ~cm.obstacle
    img = np.full(cm.cost.shape, 255, dtype=np.uint8)
    if free.any():
        lo = float(cm.cost[free].min())
        hi = float(cm.cost[free].max())
        span = hi - lo
        if span <= 0.0:
            img[free] = 0
        else:
            img[free] = np.round((cm.cost[free] - lo) / span * 254.0).astype(np.uint8)
    pgm.write_pgm(path, img, 255)
