"""Analytic solver benchmarks.

Each check builds a small lattice with a known closed-form steady state or
conservation law and reports the measured error against its bound. The test
suite and the ``windplan validate`` command share these.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lbm


@dataclass
class CheckResult:
    name: str
    value: float
    bound: float
    passed: bool
    detail: str = ""


def poiseuille_check(
    width: int = 64,
    height: int = 32,
    tau: float = 0.9,
    u_max: float = 0.05,
    n_steps: int = 8000,
) -> CheckResult:
    """Force-driven periodic channel against the parabolic profile.

    Halfway bounce-back puts the effective walls half a cell inside the solid
    rows, so the channel width is height - 2 cells.
    """
    nu = (tau - 0.5) / 3.0
    h_eff = height - 2
    g = 8.0 * nu * u_max / h_eff**2
    lat = lbm.channel_lattice(width, height, tau, g)
    fld = lbm.run_steady(lat, n_steps)
    y = np.arange(1, height - 1, dtype=np.float64)
    y0, y1 = 0.5, height - 1.5
    analytic = 4.0 * u_max * (y - y0) * (y1 - y) / (y1 - y0) ** 2
    profile = fld.vx[1:-1, width // 2]
    rel_l2 = float(np.linalg.norm(profile - analytic) / np.linalg.norm(analytic))
    return CheckResult(
        "poiseuille_profile",
        rel_l2,
        0.02,
        rel_l2 < 0.02,
        f"relative L2 error of u_x(y) at tau={tau}",
    )


def uniform_inflow_check(
    size: int = 32, speed_mps: float = 1.0, n_steps: int = 3000
) -> CheckResult:
    """Empty inlet-driven box must converge to the uniform inlet velocity."""
    from .env import OccupancyGrid, WindSource

    grid = OccupancyGrid(size, size, 0.05, np.zeros((size, size), dtype=bool))
    src = WindSource(direction=(1.0, 0.0), speed=speed_mps, side="W", start=0, length=size)
    lat = lbm.build_lattice(grid, [src], re=250.0, u_lat_max=0.1)
    fld = lbm.run_steady(lat, n_steps)
    err = float(np.hypot(fld.vx - speed_mps, fld.vy)[1:-1, 1:-1].max())
    return CheckResult(
        "uniform_inflow",
        err,
        1e-2,
        err < 1e-2,
        "max |u - u_inlet| (m/s) over the interior",
    )


def mass_conservation_check(size: int = 32, n_steps: int = 1000) -> CheckResult:
    """Closed periodic box with a bounce-back block: total mass is invariant."""
    node = np.zeros((size, size), dtype=np.uint8)
    node[12:20, 12:20] = lbm.SOLID
    jj, ii = np.mgrid[0:size, 0:size]
    ux = 0.05 * np.sin(2 * np.pi * jj / size)
    uy = 0.05 * np.sin(2 * np.pi * ii / size)
    ux[node == lbm.SOLID] = 0.0
    uy[node == lbm.SOLID] = 0.0
    f0 = lbm.equilibrium_field(np.ones((size, size)), ux, uy)
    lat = lbm.Lattice(
        width=size,
        height=size,
        cell_size=1.0,
        tau=0.8,
        node_type=node,
        f=f0,
        periodic=True,
    )
    fluid = lat.node_type != lbm.SOLID
    mass0 = float(lat.f[:, fluid].sum())
    drift = 0.0
    for _ in range(n_steps):
        lbm.step(lat)
        drift = max(drift, abs(float(lat.f[:, fluid].sum()) - mass0))
    rel = drift / mass0
    return CheckResult(
        "mass_conservation",
        rel,
        1e-10,
        rel < 1e-10,
        f"max relative drift of total mass over {n_steps} steps",
    )


def equilibrium_fixed_point_check(size: int = 16, n_steps: int = 100) -> CheckResult:
    """A global equilibrium state must be numerically stationary."""
    ux = np.full((size, size), 0.08)
    uy = np.full((size, size), -0.03)
    f0 = lbm.equilibrium_field(np.ones((size, size)), ux, uy)
    lat = lbm.Lattice(
        width=size, height=size, cell_size=1.0, tau=0.7, f=f0.copy(), periodic=True
    )
    for _ in range(n_steps):
        lbm.step(lat)
    err = float(np.abs(lat.f - f0).max())
    return CheckResult(
        "equilibrium_fixed_point",
        err,
        1e-12,
        err < 1e-12,
        f"max population drift after {n_steps} steps",
    )


def run_all(quick: bool = False) -> list[CheckResult]:
    if quick:
        return [
            poiseuille_check(width=32, height=24, n_steps=3000),
            uniform_inflow_check(size=16, n_steps=1000),
            mass_conservation_check(size=24, n_steps=300),
            equilibrium_fixed_point_check(),
        ]
    return [
        poiseuille_check(),
        uniform_inflow_check(),
        mass_conservation_check(),
        equilibrium_fixed_point_check(),
    ]
