"""Steady-state wind fields from a D2Q9 lattice-Boltzmann solve.

The solver runs in lattice units (cell = 1, step = 1) with BGK relaxation,
halfway bounce-back walls, equilibrium inlet nodes, and zero-gradient open
boundaries. Fan speeds are normalized so the fastest source maps to
``u_lat_max``; the converged field is rescaled back to m/s through the same
anchor. A uniform body force and periodic wrap are supported for hand-built
lattices (channel benchmarks); the scenario pipeline never uses them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import _lbm_kernels as kern
from ._lbm_kernels import FLUID, INLET, OUTFLOW, SOLID
from .env import OccupancyGrid, WindSource
from .errors import (
    InletOnSolid,
    NoFluidCells,
    NumericalBlowup,
    ParseError,
    UnstableTau,
    ValidationError,
)

D2Q9_CX = kern.CX
D2Q9_CY = kern.CY
D2Q9_W = kern.W9
D2Q9_OPP = kern.OPP


def reynolds_tau(re: float, u_lat: float, l_lat: float) -> float:
    """Relaxation time realizing Reynolds number re at the given lattice
    velocity and length scales: nu = u*l/re, tau = 3*nu + 1/2."""
    if re <= 0 or u_lat <= 0 or l_lat <= 0:
        raise ValidationError("reynolds", "re, u_lat, and l_lat must be positive")
    tau = 3.0 * (u_lat * l_lat / re) + 0.5
    if not 0.5 < tau <= 2.0:
        raise UnstableTau("tau", f"{tau:.4f} outside the stable window (0.5, 2.0]")
    return tau


def equilibrium(rho: float, u: tuple[float, float]) -> np.ndarray:
    """D2Q9 equilibrium populations for one cell."""
    ux, uy = float(u[0]), float(u[1])
    cu = kern.CXF * ux + kern.CYF * uy
    usq = ux * ux + uy * uy
    return kern.W9 * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)


def equilibrium_field(rho: np.ndarray, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    """Vectorized equilibrium populations, shape (9,) + rho.shape."""
    rho = np.asarray(rho, dtype=np.float64)
    ux = np.asarray(ux, dtype=np.float64)
    uy = np.asarray(uy, dtype=np.float64)
    cu = (
        kern.CXF.reshape((9,) + (1,) * rho.ndim) * ux
        + kern.CYF.reshape((9,) + (1,) * rho.ndim) * uy
    )
    usq = ux * ux + uy * uy
    return kern.W9.reshape((9,) + (1,) * rho.ndim) * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq)


def moments(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Density and velocity read-out: rho = sum_i f_i, rho*u = sum_i f_i c_i.

    Accepts a single population vector (9,) or a field (9, H, W).
    """
    f = np.asarray(f, dtype=np.float64)
    rho = f.sum(axis=0)
    ux = np.tensordot(kern.CXF, f, axes=(0, 0)) / rho
    uy = np.tensordot(kern.CYF, f, axes=(0, 0)) / rho
    return rho, ux, uy


@dataclass
class Lattice:
    """Solver state. Arrays are (height, width); populations are (9, H, W)."""

    width: int
    height: int
    cell_size: float
    tau: float
    u_lat_max: float = 0.1
    phys_scale: float = 1.0  # m/s of physical wind per unit lattice velocity
    node_type: np.ndarray | None = None
    inlet_ux: np.ndarray | None = None
    inlet_uy: np.ndarray | None = None
    f: np.ndarray | None = None
    periodic: bool = False
    force: tuple[float, float] = (0.0, 0.0)
    step_index: int = 0
    _scratch: np.ndarray | None = dfield(default=None, repr=False)
    _flag: np.ndarray | None = dfield(default=None, repr=False)

    def __post_init__(self):
        if not 0.5 < self.tau <= 2.0:
            raise UnstableTau("tau", f"{self.tau:.4f} outside the stable window (0.5, 2.0]")
        if not 0 < self.u_lat_max <= 0.3:
            raise ValidationError("u_lat_max", "must be in (0, 0.3]")
        shape = (self.height, self.width)
        if self.node_type is None:
            self.node_type = np.zeros(shape, dtype=np.uint8)
        self.node_type = np.ascontiguousarray(self.node_type, dtype=np.uint8)
        if self.node_type.shape != shape:
            raise ValidationError("node_type", f"shape must be {shape}")
        if not np.any(self.node_type != SOLID):
            raise NoFluidCells("grid", "every cell is solid")
        if self.inlet_ux is None:
            self.inlet_ux = np.zeros(shape)
        if self.inlet_uy is None:
            self.inlet_uy = np.zeros(shape)
        self.inlet_ux = np.ascontiguousarray(self.inlet_ux, dtype=np.float64)
        self.inlet_uy = np.ascontiguousarray(self.inlet_uy, dtype=np.float64)
        inlet_speed = np.hypot(self.inlet_ux, self.inlet_uy).max(initial=0.0)
        if inlet_speed > 0.3:
            raise ValidationError("inlet", f"lattice inlet speed {inlet_speed:.3f} exceeds 0.3")
        if self.f is None:
            self.f = np.broadcast_to(
                kern.W9[:, None, None], (9,) + shape
            ).copy()  # rest-state equilibrium
        self.f = np.ascontiguousarray(self.f, dtype=np.float64)
        if self.f.shape != (9,) + shape:
            raise ValidationError("f", f"shape must be {(9,) + shape}")
        self._scratch = np.empty_like(self.f)
        self._flag = np.zeros(1, dtype=np.int64)
        self.force = (float(self.force[0]), float(self.force[1]))

    def macroscopic(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rho, ux, uy) in lattice units, including the half-force shift."""
        rho, ux, uy = moments(self.f)
        fx, fy = self.force
        if fx != 0.0 or fy != 0.0:
            ux = ux + 0.5 * fx / rho
            uy = uy + 0.5 * fy / rho
        solid = self.node_type == SOLID
        for a in (rho, ux, uy):
            a[solid] = 0.0
        rho[solid] = 1.0
        return rho, ux, uy


def build_lattice(
    grid: OccupancyGrid,
    sources: list[WindSource],
    re: float = 250.0,
    u_lat_max: float = 0.1,
    *,
    ref_length_cells: int = 0,
    anchor_factor: float = 1.0,
) -> Lattice:
    """Map a scenario onto solver state.

    Source speeds are scaled so the fastest fan runs at ``u_lat_max``;
    ``phys_scale`` inverts that map for the converged field. The relaxation
    time realizes ``re`` against the widest obstacle footprint (or the given
    reference length).
    """
    node = np.where(grid.solid, SOLID, FLUID).astype(np.uint8)
    # every open boundary cell is an outlet unless a source claims it
    edge = np.zeros_like(grid.solid)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    node[edge & ~grid.solid] = OUTFLOW

    max_speed = max((s.speed for s in sources), default=0.0)
    inlet_ux = np.zeros(grid.solid.shape)
    inlet_uy = np.zeros(grid.solid.shape)
    for source in sources:
        u_mag = u_lat_max * (source.speed / max_speed) if max_speed > 0 else 0.0
        for i, j in source.cells(grid):
            if grid.solid[j, i]:
                raise InletOnSolid("source", f"inlet cell ({i}, {j}) is solid")
            node[j, i] = INLET
            inlet_ux[j, i] = u_mag * source.direction[0]
            inlet_uy[j, i] = u_mag * source.direction[1]

    if not np.any(node == FLUID):
        raise NoFluidCells("grid", "no interior fluid cells remain")

    l_lat = ref_length_cells if ref_length_cells > 0 else _widest_footprint(grid)
    tau = reynolds_tau(re, u_lat_max, l_lat)
    phys_scale = anchor_factor * (max_speed / u_lat_max)
    return Lattice(
        width=grid.width,
        height=grid.height,
        cell_size=grid.cell_size,
        tau=tau,
        u_lat_max=u_lat_max,
        phys_scale=phys_scale,
        node_type=node,
        inlet_ux=inlet_ux,
        inlet_uy=inlet_uy,
    )


def _widest_footprint(grid: OccupancyGrid) -> int:
    """Largest bounding-box side over connected obstacle components; the
    domain's short side when there are no obstacles."""
    labels, count = ndimage.label(grid.solid, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return min(grid.width, grid.height)
    best = 1
    for sl_j, sl_i in ndimage.find_objects(labels):
        best = max(best, sl_j.stop - sl_j.start, sl_i.stop - sl_i.start)
    return best


def step(lattice: Lattice) -> Lattice:
    """Advance one step in place: collide, stream, inlets, outlets."""
    fx, fy = lattice.force
    kern.collide(
        lattice.f, lattice._scratch, lattice.node_type, 1.0 / lattice.tau, fx, fy, lattice._flag
    )
    if lattice._flag[0]:
        raise NumericalBlowup(lattice.step_index)
    kern.stream(lattice._scratch, lattice.f, lattice.node_type, lattice.periodic)
    kern.apply_inlets(lattice.f, lattice.node_type, lattice.inlet_ux, lattice.inlet_uy)
    kern.apply_outflow(lattice.f, lattice.node_type)
    lattice.step_index += 1
    return lattice


def run_steady(
    lattice: Lattice,
    n_steps: int,
    conv_tol: float = 0.0,
    conv_interval: int = 100,
) -> "WindField":
    """Run up to n_steps and return the field in physical units.

    With conv_tol > 0, stops early once the max lattice-velocity change per
    cell over conv_interval steps drops below conv_tol * u_lat_max; emits a
    RuntimeWarning when the budget runs out before that.
    """
    if n_steps < 1:
        raise ValidationError("n_steps", "must be at least 1")
    check = conv_tol > 0.0
    prev_ux = prev_uy = None
    converged = not check
    steps_run = 0
    for k in range(n_steps):
        step(lattice)
        steps_run = k + 1
        if check and steps_run % conv_interval == 0:
            _, ux, uy = lattice.macroscopic()
            if prev_ux is not None:
                resid = max(np.abs(ux - prev_ux).max(), np.abs(uy - prev_uy).max())
                if resid < conv_tol * lattice.u_lat_max:
                    converged = True
                    break
            prev_ux, prev_uy = ux, uy
    if check and not converged:
        warnings.warn(
            f"steady solve not converged after {steps_run} steps", RuntimeWarning, stacklevel=2
        )

    _, ux, uy = lattice.macroscopic()
    if not (np.isfinite(ux).all() and np.isfinite(uy).all()):
        raise NumericalBlowup(lattice.step_index, "non-finite velocity field")
    wall = lattice.node_type == SOLID
    vx = ux * lattice.phys_scale
    vy = uy * lattice.phys_scale
    vx[wall] = 0.0
    vy[wall] = 0.0
    return WindField(
        width=lattice.width,
        height=lattice.height,
        cell_size=lattice.cell_size,
        vx=vx,
        vy=vy,
        wall_mask=wall,
        steps_run=steps_run,
        converged=converged,
    )


def channel_lattice(
    width: int, height: int, tau: float, force_x: float, u_lat_max: float = 0.1
) -> Lattice:
    """Periodic channel with solid top/bottom rows driven by a body force.

    Used by the analytic benchmarks; reports velocities in lattice units
    (phys_scale = 1, cell_size = 1).
    """
    node = np.zeros((height, width), dtype=np.uint8)
    node[0, :] = SOLID
    node[-1, :] = SOLID
    return Lattice(
        width=width,
        height=height,
        cell_size=1.0,
        tau=tau,
        u_lat_max=u_lat_max,
        node_type=node,
        periodic=True,
        force=(force_x, 0.0),
    )


@dataclass
class WindField:
    """Converged wind velocities (m/s) on cell centers."""

    width: int
    height: int
    cell_size: float
    vx: np.ndarray
    vy: np.ndarray
    speed: np.ndarray | None = None
    wall_mask: np.ndarray | None = None
    steps_run: int = 0
    converged: bool = True

    def __post_init__(self):
        shape = (self.height, self.width)
        self.vx = np.ascontiguousarray(self.vx, dtype=np.float64)
        self.vy = np.ascontiguousarray(self.vy, dtype=np.float64)
        if self.vx.shape != shape or self.vy.shape != shape:
            raise ValidationError("field", f"velocity arrays must have shape {shape}")
        hyp = np.hypot(self.vx, self.vy)
        if self.speed is None:
            self.speed = hyp
        else:
            self.speed = np.ascontiguousarray(self.speed, dtype=np.float64)
            scale = max(1.0, float(hyp.max(initial=0.0)))
            if np.abs(self.speed - hyp).max(initial=0.0) > 1e-12 * scale:
                raise ValidationError("field.speed", "inconsistent with velocity components")
        if self.wall_mask is None:
            self.wall_mask = np.zeros(shape, dtype=bool)
        self.wall_mask = np.ascontiguousarray(self.wall_mask, dtype=bool)
        if self.wall_mask.shape != shape:
            raise ValidationError("field.wall_mask", f"must have shape {shape}")
        if np.any(self.vx[self.wall_mask] != 0.0) or np.any(self.vy[self.wall_mask] != 0.0):
            raise ValidationError("field", "velocity must be zero on wall cells")

    @classmethod
    def zeros(cls, grid: OccupancyGrid) -> "WindField":
        z = np.zeros((grid.height, grid.width))
        return cls(grid.width, grid.height, grid.cell_size, z, z.copy(), wall_mask=grid.solid)

    @property
    def extent(self) -> tuple[float, float]:
        return self.width * self.cell_size, self.height * self.cell_size

    def sample(self, x: float, y: float) -> tuple[float, float]:
        """Bilinear velocity at a point; identically zero outside the domain."""
        ex, ey = self.extent
        if not (0.0 <= x < ex and 0.0 <= y < ey):
            return 0.0, 0.0
        vx, vy = self.sample_many(np.array([[x, y]]))
        return float(vx[0]), float(vy[0])

    def sample_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized bilinear sampling; rows outside the domain get (0, 0)."""
        points = np.asarray(points, dtype=np.float64)
        x = points[:, 0]
        y = points[:, 1]
        ex, ey = self.extent
        inside = (x >= 0.0) & (x < ex) & (y >= 0.0) & (y < ey)
        # clamp to the cell-center lattice, then interpolate
        u = np.clip(x / self.cell_size - 0.5, 0.0, self.width - 1.0)
        v = np.clip(y / self.cell_size - 0.5, 0.0, self.height - 1.0)
        i0 = np.minimum(u.astype(np.int64), self.width - 2) if self.width > 1 else np.zeros(len(u), np.int64)
        j0 = np.minimum(v.astype(np.int64), self.height - 2) if self.height > 1 else np.zeros(len(v), np.int64)
        fu = u - i0
        fv = v - j0
        out = []
        for comp in (self.vx, self.vy):
            c00 = comp[j0, i0]
            c10 = comp[j0, i0 + 1]
            c01 = comp[j0 + 1, i0]
            c11 = comp[j0 + 1, i0 + 1]
            val = (
                c00 * (1 - fu) * (1 - fv)
                + c10 * fu * (1 - fv)
                + c01 * (1 - fu) * fv
                + c11 * fu * fv
            )
            out.append(np.where(inside, val, 0.0))
        return out[0], out[1]


_FMT = "%.17g"  # round-trips float64 exactly


def write_field_csv(fld: WindField, path: str | Path) -> None:
    lines = [
        f"# windfield width={fld.width} height={fld.height} cell_size={_FMT % fld.cell_size}",
        "i,j,x,y,vx,vy,speed,wall",
    ]
    cs = fld.cell_size
    for j in range(fld.height):
        for i in range(fld.width):
            lines.append(
                ",".join(
                    (
                        str(i),
                        str(j),
                        _FMT % ((i + 0.5) * cs),
                        _FMT % ((j + 0.5) * cs),
                        _FMT % fld.vx[j, i],
                        _FMT % fld.vy[j, i],
                        _FMT % fld.speed[j, i],
                        "1" if fld.wall_mask[j, i] else "0",
                    )
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path: str | Path) -> WindField:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not lines or not lines[0].startswith("# windfield"):
        raise ParseError(f"{path}: missing windfield header")
    meta = dict(tok.split("=") for tok in lines[0].split()[2:])
    try:
        width, height = int(meta["width"]), int(meta["height"])
        cell_size = float(meta["cell_size"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad windfield header") from exc
    vx = np.zeros((height, width))
    vy = np.zeros((height, width))
    wall = np.zeros((height, width), dtype=bool)
    body = lines[2:]
    if len(body) != width * height:
        raise ParseError(f"{path}: expected {width * height} rows, found {len(body)}")
    for line in body:
        parts = line.split(",")
        if len(parts) != 8:
            raise ParseError(f"{path}: malformed row {line!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < width and 0 <= j < height):
            raise ParseError(f"{path}: cell ({i}, {j}) out of range")
        vx[j, i] = float(parts[4])
        vy[j, i] = float(parts[5])
        wall[j, i] = parts[7].strip() == "1"
    return WindField(width, height, cell_size, vx, vy, wall_mask=wall)


def write_field_vtk(fld: WindField, path: str | Path) -> None:
    """Legacy ASCII VTK structured points with velocity vectors and wall mask."""
    n = fld.width * fld.height
    out = [
        "# vtk DataFile Version 3.0",
        "windplan steady wind field",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {fld.width} {fld.height} 1",
        f"ORIGIN {_FMT % (0.5 * fld.cell_size)} {_FMT % (0.5 * fld.cell_size)} 0",
        f"SPACING {_FMT % fld.cell_size} {_FMT % fld.cell_size} 1",
        f"POINT_DATA {n}",
        "VECTORS velocity double",
    ]
    for j in range(fld.height):
        for i in range(fld.width):
            out.append(f"{_FMT % fld.vx[j, i]} {_FMT % fld.vy[j, i]} 0")
    out.append("SCALARS wall int 1")
    out.append("LOOKUP_TABLE default")
    for j in range(fld.height):
        for i in range(fld.width):
            out.append("1" if fld.wall_mask[j, i] else "0")
    Path(path).write_text("\n".join(out) + "\n")
