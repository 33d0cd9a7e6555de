"""Scenario ingestion: occupancy grids, height rasters, wind sources, parameters.

Conventions used everywhere downstream:

* grids are numpy arrays of shape ``(height, width)`` indexed ``[j, i]`` with
  ``i`` the x column and ``j`` the y row; cell ``(i, j)`` has its center at
  ``((i + 0.5) * cell_size, (j + 0.5) * cell_size)`` in meters,
* boundary sides are named N (j = height-1), S (j = 0), W (i = 0), E (i = width-1),
* scenario documents are JSON; occupancy is stored as run-length-encoded rows
  (alternating free/solid counts, free first) or referenced as a PGM raster.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import pgm
from .errors import DimensionMismatch, InletOnSolid, ParseError, ValidationError

SIDES = ("N", "S", "E", "W")

# Inward-pointing unit normal for each boundary side.
INWARD_NORMAL = {
    "W": (1.0, 0.0),
    "E": (-1.0, 0.0),
    "S": (0.0, 1.0),
    "N": (0.0, -1.0),
}


@dataclass
class PipelineParams:
    """Every tunable the pipeline consumes, with working defaults.

    Scenario files may override any subset under the ``params`` key; the
    full set is written back on save so documents round-trip exactly.
    """

    # occupancy / geometry
    h_min: float = 0.3            # depth-filter threshold for height rasters (m)
    b: float = 0.1                # obstacle safety buffer (m); also Bezier wall margin

    # wind solve
    re: float = 250.0             # target Reynolds number
    n_steps: int = 10000          # lattice steps for the steady-state solve
    u_lat_max: float = 0.1        # lattice speed assigned to the fastest source
    anchor_factor: float = 1.0    # scales the lattice->physical velocity map
    ref_length_cells: int = 0     # 0 = derive from the widest obstacle footprint
    conv_tol: float = 0.0         # 0 disables the early-stop residual check
    conv_interval: int = 100

    # cost map
    w_s: float = 1.0
    w_d: float = 1.0
    w_a: float = 1.0
    c_wall: float = 1000.0
    base_cost: float = 0.5        # free-cell cost when flow-aware is off
    clamp_min: float = 0.1
    clamp_max: float = 20.0
    sigma_smooth: float = 1.5     # Gaussian smoothing radius in cells

    # trajectory refinement
    lambda_p: float = 1.0
    lambda_s: float = 1.0
    lambda_t: float = 1.0
    lambda_w: float = 10.0
    bezier_degree: int = 7
    quad_samples: int = 128
    box_halfwidth_cells: float = 3.0
    cruise_speed: float = 0.5     # m/s, sets the initial trajectory duration
    bcd_tol: float = 1e-6
    bcd_max_sweeps: int = 40

    # replay
    mass: float = 0.03            # kg
    drag_gain: float = 0.009      # N per m/s of relative wind, so K/m = 0.3 1/s
    kp: float = 4.0
    kd: float = 3.0
    a_max: float = 5.0            # commanded-acceleration clamp (m/s^2)
    sim_dt: float = 0.01
    noise_std: float = 0.0

    def validate(self) -> None:
        pos = [
            "h_min", "re", "u_lat_max", "anchor_factor", "c_wall", "clamp_min",
            "clamp_max", "cruise_speed", "mass", "a_max", "sim_dt", "bcd_tol",
        ]
        for name in pos:
            if not getattr(self, name) > 0:
                raise ValidationError(f"params.{name}", "must be positive")
        nonneg = [
            "b", "w_s", "w_d", "w_a", "sigma_smooth", "lambda_p", "lambda_s",
            "lambda_t", "lambda_w", "box_halfwidth_cells", "drag_gain", "kp",
            "kd", "noise_std", "conv_tol",
        ]
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ValidationError(f"params.{name}", "must be non-negative")
        if self.n_steps < 1:
            raise ValidationError("params.n_steps", "must be at least 1")
        if self.conv_interval < 1:
            raise ValidationError("params.conv_interval", "must be at least 1")
        if not 0 < self.u_lat_max <= 0.3:
            raise ValidationError("params.u_lat_max", "must be in (0, 0.3]")
        if not self.clamp_min <= self.clamp_max:
            raise ValidationError("params.clamp_min", "exceeds clamp_max")
        if not self.clamp_min <= self.base_cost <= self.clamp_max:
            raise ValidationError("params.base_cost", "must lie within the clamp range")
        if self.bezier_degree < 3:
            raise ValidationError("params.bezier_degree", "must be at least 3")
        if self.quad_samples < 32:
            raise ValidationError("params.quad_samples", "must be at least 32")
        if self.bcd_max_sweeps < 1:
            raise ValidationError("params.bcd_max_sweeps", "must be at least 1")
        if not 0 < self.sim_dt <= 0.02:
            raise ValidationError("params.sim_dt", "must be in (0, 0.02]")
        if self.ref_length_cells < 0:
            raise ValidationError("params.ref_length_cells", "must be non-negative")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineParams":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ValidationError(f"params.{key}", "unknown parameter")
            kwargs[key] = value
        params = cls(**kwargs)
        # int fields arrive as JSON numbers; coerce cleanly or reject
        for f in fields(cls):
            value = getattr(params, f.name)
            try:
                if f.type == "int":
                    if float(value) != int(value):
                        raise ValidationError(f"params.{f.name}", "must be an integer")
                    setattr(params, f.name, int(value))
                else:
                    setattr(params, f.name, float(value))
            except (TypeError, ValueError):
                raise ValidationError(f"params.{f.name}", "must be a number") from None
        params.validate()
        return params


@dataclass
class OccupancyGrid:
    width: int
    height: int
    cell_size: float
    solid: np.ndarray  # bool (height, width)

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ValidationError("grid", "width and height must be at least 4 cells")
        if not self.cell_size > 0:
            raise ValidationError("grid.cell_size", "must be positive")
        self.solid = np.ascontiguousarray(self.solid, dtype=bool)
        if self.solid.shape != (self.height, self.width):
            raise ValidationError(
                "grid.solid",
                f"shape {self.solid.shape} does not match {self.height}x{self.width}",
            )

    @property
    def extent(self) -> tuple[float, float]:
        """Physical domain size (x_max, y_max) in meters."""
        return self.width * self.cell_size, self.height * self.cell_size

    def contains(self, x: float, y: float) -> bool:
        ex, ey = self.extent
        return 0.0 <= x < ex and 0.0 <= y < ey

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(x / self.cell_size), int(y / self.cell_size)

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (i + 0.5) * self.cell_size, (j + 0.5) * self.cell_size

    def solid_at(self, x: float, y: float) -> bool:
        """Solid test for a physical point; points outside the domain are free."""
        if not self.contains(x, y):
            return False
        i, j = self.cell_of(x, y)
        return bool(self.solid[j, i])


@dataclass
class HeightMap:
    width: int
    height: int
    cell_size: float
    heights: np.ndarray  # float64 (height, width), meters

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValidationError("heightmap.cell_size", "must be positive")
        self.heights = np.ascontiguousarray(self.heights, dtype=np.float64)
        if self.heights.shape != (self.height, self.width):
            raise ValidationError("heightmap", "raster shape does not match dimensions")
        if np.any(self.heights < 0):
            raise ValidationError("heightmap", "heights must be non-negative")


@dataclass
class WindSource:
    """Fan inlet: either a boundary segment (side/start/length) or an interior rect.

    ``direction`` is normalized on construction; boundary segments must blow
    into the domain (positive inward-normal component).
    """

    direction: tuple[float, float]
    speed: float
    side: str | None = None
    start: int = 0
    length: int = 0
    rect: tuple[int, int, int, int] | None = None  # (i0, j0, w, h)

    def __post_init__(self):
        dx, dy = float(self.direction[0]), float(self.direction[1])
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            raise ValidationError("source.direction", "must be a nonzero vector")
        self.direction = (dx / norm, dy / norm)
        if self.speed < 0:
            raise ValidationError("source.speed", "must be non-negative")
        if (self.side is None) == (self.rect is None):
            raise ValidationError("source", "exactly one of side or rect is required")
        if self.side is not None:
            if self.side not in SIDES:
                raise ValidationError("source.side", f"must be one of {SIDES}")
            nx, ny = INWARD_NORMAL[self.side]
            if self.direction[0] * nx + self.direction[1] * ny <= 0:
                raise ValidationError("source.direction", "must point into the domain")
            if self.length < 1:
                raise ValidationError("source.length", "must cover at least one cell")
        else:
            self.rect = tuple(int(v) for v in self.rect)
            if self.rect[2] < 1 or self.rect[3] < 1:
                raise ValidationError("source.rect", "must cover at least one cell")

    def cells(self, grid: OccupancyGrid) -> list[tuple[int, int]]:
        """Grid cells this source pins; domain corner cells are never inlets."""
        out: list[tuple[int, int]] = []
        w, h = grid.width, grid.height
        if self.side is not None:
            along = h if self.side in ("W", "E") else w
            if not (0 <= self.start and self.start + self.length <= along):
                raise ValidationError("source", "segment extends past the boundary")
            corners = {(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)}
            for k in range(self.start, self.start + self.length):
                if self.side == "W":
                    cell = (0, k)
                elif self.side == "E":
                    cell = (w - 1, k)
                elif self.side == "S":
                    cell = (k, 0)
                else:
                    cell = (k, h - 1)
                if cell not in corners:
                    out.append(cell)
        else:
            i0, j0, rw, rh = self.rect
            if i0 < 0 or j0 < 0 or i0 + rw > w or j0 + rh > h:
                raise ValidationError("source.rect", "extends outside the domain")
            for j in range(j0, j0 + rh):
                for i in range(i0, i0 + rw):
                    out.append((i, j))
        return out

    def to_dict(self) -> dict:
        data: dict = {"direction": list(self.direction), "speed": self.speed}
        if self.side is not None:
            data.update(side=self.side, start=self.start, length=self.length)
        else:
            data["rect"] = list(self.rect)
        return data


@dataclass
class Scenario:
    grid: OccupancyGrid
    sources: list[WindSource]
    start: tuple[float, float]
    goal: tuple[float, float]
    params: PipelineParams
    name: str = ""

    def __post_init__(self):
        self.start = (float(self.start[0]), float(self.start[1]))
        self.goal = (float(self.goal[0]), float(self.goal[1]))
        for label, point in (("start", self.start), ("goal", self.goal)):
            if not self.grid.contains(*point):
                raise ValidationError(label, f"{point} lies outside the domain")
            if self.grid.solid_at(*point):
                raise ValidationError(label, f"{point} lies inside an obstacle")
        for source in self.sources:
            for i, j in source.cells(self.grid):
                if self.grid.solid[j, i]:
                    raise InletOnSolid("source", f"inlet cell ({i}, {j}) is solid")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grid": {
                "width": self.grid.width,
                "height": self.grid.height,
                "cell_size": self.grid.cell_size,
                "solid": {"rle_rows": rle_encode(self.grid.solid)},
            },
            "sources": [s.to_dict() for s in self.sources],
            "start": list(self.start),
            "goal": list(self.goal),
            "params": self.params.to_dict(),
        }


def rle_encode(solid: np.ndarray) -> list[list[int]]:
    """Alternating free/solid run lengths per row, free count first."""
    rows = []
    for row in np.asarray(solid, dtype=bool):
        runs = [0]
        value = False
        for cell in row:
            if cell == value:
                runs[-1] += 1
            else:
                runs.append(1)
                value = not value
        rows.append(runs)
    return rows


def rle_decode(rows: list[list[int]], width: int, height: int) -> np.ndarray:
    if len(rows) != height:
        raise ParseError(f"rle_rows has {len(rows)} rows, expected {height}")
    solid = np.zeros((height, width), dtype=bool)
    for j, runs in enumerate(rows):
        pos = 0
        value = False
        for run in runs:
            if run < 0 or pos + run > width:
                raise ParseError(f"rle row {j} overruns width {width}")
            if value:
                solid[j, pos : pos + run] = True
            pos += run
            value = not value
        if pos != width:
            raise ParseError(f"rle row {j} covers {pos} cells, expected {width}")
    return solid


def occupancy_from_heightmap(hm: HeightMap, h_min: float) -> OccupancyGrid:
    """Depth filter: a cell is solid iff its height reaches h_min."""
    if not h_min > 0:
        raise ValidationError("h_min", "must be positive")
    return OccupancyGrid(hm.width, hm.height, hm.cell_size, hm.heights >= h_min)


def dilate_obstacles(grid: OccupancyGrid, b: float) -> OccupancyGrid:
    """Grow obstacles by a Chebyshev radius of ceil(b / cell_size) cells.

    The outermost ring is also marked solid so planners cannot hug the
    domain boundary. The input grid is left untouched.
    """
    if b < 0:
        raise ValidationError("b", "must be non-negative")
    radius = math.ceil(b / grid.cell_size) if b > 0 else 0
    if radius > 0:
        solid = ndimage.maximum_filter(
            grid.solid.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0
        ).astype(bool)
    else:
        solid = grid.solid.copy()
    solid[0, :] = solid[-1, :] = True
    solid[:, 0] = solid[:, -1] = True
    return OccupancyGrid(grid.width, grid.height, grid.cell_size, solid)


def _require(data: dict, key: str, context: str) -> object:
    if key not in data:
        raise ParseError(f"{context}: missing required key '{key}'")
    return data[key]


def scenario_from_dict(data: dict, base_dir: Path | None = None, name: str = "") -> Scenario:
    base_dir = Path(base_dir) if base_dir is not None else Path(".")
    grid_spec = _require(data, "grid", "scenario")
    cell_size = float(_require(grid_spec, "cell_size", "grid"))

    solid = None
    width = height = None
    if "pgm" in grid_spec:
        raster, maxval = pgm.read_pgm(base_dir / grid_spec["pgm"])
        solid = raster >= (maxval + 1) // 2
        height, width = solid.shape
    if "width" in grid_spec or "height" in grid_spec:
        width = int(_require(grid_spec, "width", "grid"))
        height = int(_require(grid_spec, "height", "grid"))
    if "solid" in grid_spec:
        rows = _require(grid_spec["solid"], "rle_rows", "grid.solid")
        if width is None:
            raise ParseError("grid: rle occupancy requires width and height")
        decoded = rle_decode(rows, width, height)
        solid = decoded if solid is None else (solid | decoded)

    if "heightmap" in data:
        hm_spec = data["heightmap"]
        raster, _ = pgm.read_pgm(base_dir / _require(hm_spec, "pgm", "heightmap"))
        scale = float(_require(hm_spec, "scale", "heightmap"))
        if scale <= 0:
            raise ValidationError("heightmap.scale", "must be positive")
        hm = HeightMap(raster.shape[1], raster.shape[0], cell_size, raster * scale)
        params_preview = data.get("params", {})
        h_min = float(params_preview.get("h_min", PipelineParams.h_min))
        derived = occupancy_from_heightmap(hm, h_min)
        if solid is None:
            solid = derived.solid
            width, height = derived.width, derived.height
        else:
            if derived.solid.shape != solid.shape:
                raise DimensionMismatch(
                    "heightmap", f"raster {derived.solid.shape} does not match grid {solid.shape}"
                )
            solid = solid | derived.solid

    if solid is None:
        raise ParseError("grid: no occupancy given (need solid rle, pgm, or heightmap)")
    if width is not None and solid.shape != (height, width):
        raise ParseError(
            f"grid: declared {width}x{height} does not match raster {solid.shape[1]}x{solid.shape[0]}"
        )

    grid = OccupancyGrid(solid.shape[1], solid.shape[0], cell_size, solid)

    sources = []
    for k, spec in enumerate(data.get("sources", [])):
        try:
            sources.append(
                WindSource(
                    direction=tuple(_require(spec, "direction", f"sources[{k}]")),
                    speed=float(_require(spec, "speed", f"sources[{k}]")),
                    side=spec.get("side"),
                    start=int(spec.get("start", 0)),
                    length=int(spec.get("length", 0)),
                    rect=tuple(spec["rect"]) if "rect" in spec else None,
                )
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"sources[{k}]: {exc}") from exc

    params = PipelineParams.from_dict(data.get("params", {}))
    start_raw = _require(data, "start", "scenario")
    goal_raw = _require(data, "goal", "scenario")
    try:
        if len(start_raw) != 2 or len(goal_raw) != 2:
            raise ParseError("start/goal must be [x, y] pairs")
        start = (float(start_raw[0]), float(start_raw[1]))
        goal = (float(goal_raw[0]), float(goal_raw[1]))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"start/goal must be numeric [x, y] pairs ({exc})") from exc
    return Scenario(grid, sources, start, goal, params, name=data.get("name", name))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: scenario document must be a JSON object")
    return scenario_from_dict(data, base_dir=path.parent, name=path.stem)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n")
