"""Point-mass replay of a planned trajectory under a frozen wind field.

The vehicle tracks the reference with PD feedback on position and velocity
plus the reference acceleration as feedforward. Commanded acceleration is
magnitude-clamped, then the wind drag disturbance is applied on top, so
saturation never hides the disturbance. Integration is semi-implicit Euler:
velocity first, then position with the new velocity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import OccupancyGrid
from .errors import DivergedSimulation, EmptyLog, ParseError, ValidationError
from .lbm import WindField


@dataclass
class DroneModel:
    mass: float = 0.03
    drag_gain: float = 0.009  # N per m/s relative wind
    a_max: float = 5.0
    dt: float = 0.01

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("drone.mass", "must be positive")
        if self.drag_gain < 0:
            raise ValidationError("drone.drag_gain", "must be non-negative")
        if not self.a_max > 0:
            raise ValidationError("drone.a_max", "must be positive")
        if not 0 < self.dt <= 0.02:
            raise ValidationError("drone.dt", "must be in (0, 0.02]")


@dataclass
class PolylineReference:
    """Constant-speed traversal of a polyline; acceleration feedforward is
    zero everywhere, including across the corners."""

    points: np.ndarray
    speed: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 2:
            raise ValidationError("reference.points", "need an (n, 2) polyline, n >= 2")
        if not self.speed > 0:
            raise ValidationError("reference.speed", "must be positive")
        seg = np.hypot(*np.diff(self.points, axis=0).T)
        self._arclen = np.concatenate(([0.0], np.cumsum(seg)))
        if self._arclen[-1] <= 0:
            raise ValidationError("reference.points", "polyline has zero length")
        self.T = float(self._arclen[-1] / self.speed)

    def state_at(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if t >= self.T:
            return self.points[-1].copy(), np.zeros(2), np.zeros(2)
        dist = max(t, 0.0) * self.speed
        idx = int(np.searchsorted(self._arclen, dist, side="right") - 1)
        idx = min(idx, len(self.points) - 2)
        span = self._arclen[idx + 1] - self._arclen[idx]
        frac = (dist - self._arclen[idx]) / span if span > 0 else 0.0
        pos = self.points[idx] + frac * (self.points[idx + 1] - self.points[idx])
        direction = (self.points[idx + 1] - self.points[idx]) / span
        return pos, direction * self.speed, np.zeros(2)


@dataclass
class FlightLog:
    t: np.ndarray
    pos: np.ndarray      # (n, 2)
    vel: np.ndarray      # (n, 2)
    acc_cmd: np.ndarray  # (n, 2) commanded, post-clamp
    ref_pos: np.ndarray  # (n, 2)
    dt: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) == 0:
            raise EmptyLog("log", "flight log has no samples")
        n = len(self.t)
        for name in ("pos", "vel", "acc_cmd", "ref_pos"):
            arr = getattr(self, name)
            if arr.shape != (n, 2):
                raise ValidationError(f"log.{name}", f"expected shape ({n}, 2), got {arr.shape}")
        if n > 1:
            gaps = np.diff(self.t)
            if not np.allclose(gaps, self.dt, rtol=0, atol=1e-9):
                raise ValidationError("log.t", "samples must be evenly spaced at dt")
        if not np.all(np.isfinite(self.pos)):
            raise ValidationError("log.pos", "contains non-finite values")

    def __len__(self) -> int:
        return len(self.t)


def simulate_flight(
    reference,
    field: WindField | None,
    grid: OccupancyGrid,
    drone: DroneModel | None = None,
    gains: tuple[float, float] = (4.0, 3.0),
    *,
    noise_std: float = 0.0,
    seed: int = 0,
) -> FlightLog:
    """Replay `reference` (anything with .T and .state_at(t)) in the wind.

    `gains` are the PD constants (kp, kd). Zero-mean Gaussian velocity
    perturbations of scale noise_std (m/s per axis, per step) are injected
    when requested; seed fixes the draw. Raises DivergedSimulation when the
    vehicle exits a box twice the domain size.
    """
    if drone is None:
        drone = DroneModel()
    kp, kd = gains
    if kp < 0 or kd < 0:
        raise ValidationError("gains", "must be non-negative")
    if noise_std < 0:
        raise ValidationError("noise_std", "must be non-negative")
    dt = drone.dt
    rng = np.random.default_rng(seed)

    (x_max, y_max) = grid.extent
    lo = np.array([-0.5 * x_max, -0.5 * y_max])
    hi = np.array([1.5 * x_max, 1.5 * y_max])

    n_steps = int(np.ceil(reference.T / dt))
    pos0, vel0, _ = reference.state_at(0.0)
    pos = np.asarray(pos0, dtype=np.float64).copy()
    vel = np.asarray(vel0, dtype=np.float64).copy()
    k_over_m = drone.drag_gain / drone.mass

    ts = np.arange(n_steps + 1) * dt
    log_pos = np.empty((n_steps + 1, 2))
    log_vel = np.empty((n_steps + 1, 2))
    log_cmd = np.empty((n_steps + 1, 2))
    log_ref = np.empty((n_steps + 1, 2))

    for k in range(n_steps + 1):
        ref_p, ref_v, ref_a = reference.state_at(ts[k])
        cmd = ref_a + kp * (ref_p - pos) + kd * (ref_v - vel)
        mag = float(np.hypot(cmd[0], cmd[1]))
        if mag > drone.a_max:
            cmd = cmd * (drone.a_max / mag)

        log_pos[k] = pos
        log_vel[k] = vel
        log_cmd[k] = cmd
        log_ref[k] = ref_p
        if k == n_steps:
            break

        if field is not None:
            wind = np.array(field.sample(pos[0], pos[1]))
        else:
            wind = np.zeros(2)
        acc = cmd + k_over_m * (wind - vel)
        vel = vel + dt * acc
        if noise_std > 0:
            vel = vel + rng.normal(0.0, noise_std, size=2)
        pos = pos + dt * vel

        if not (np.all(np.isfinite(pos)) and np.all(lo <= pos) and np.all(pos <= hi)):
            raise DivergedSimulation(t=float(ts[k + 1]), position=(float(pos[0]), float(pos[1])))

    return FlightLog(
        t=ts, pos=log_pos, vel=log_vel, acc_cmd=log_cmd, ref_pos=log_ref, dt=dt,
        meta={"noise_std": noise_std, "seed": seed, "wind": field is not None},
    )


def detect_collision(log: FlightLog, grid: OccupancyGrid) -> tuple[bool, int | None]:
    """First logged sample whose position sits inside an occupied cell.

    Checks the raw grid, not the planning dilation, so a hit means actual
    contact rather than a margin violation.
    """
    for k in range(len(log)):
        x, y = log.pos[k]
        if grid.solid_at(x, y):
            return True, k
    return False, None


_FMT = "%.17g"


def write_log_csv(log: FlightLog, out: str | Path) -> None:
    wind = 1 if log.meta.get("wind") else 0
    scenario = log.meta.get("scenario", "-")
    lines = [
        f"# flightlog n={len(log)} dt={_FMT % log.dt} wind={wind} scenario={scenario}",
        "t,x,y,vx,vy,ax_cmd,ay_cmd,ref_x,ref_y",
    ]
    for k in range(len(log)):
        row = (
            log.t[k], log.pos[k, 0], log.pos[k, 1], log.vel[k, 0], log.vel[k, 1],
            log.acc_cmd[k, 0], log.acc_cmd[k, 1], log.ref_pos[k, 0], log.ref_pos[k, 1],
        )
        lines.append(",".join(_FMT % v for v in row))
    Path(out).write_text("\n".join(lines) + "\n")


def read_log_csv(path: str | Path) -> FlightLog:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not lines or not lines[0].startswith("# flightlog"):
        raise ParseError(f"{path}: missing flight-log header")
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    try:
        n = int(meta["n"])
        dt = float(meta["dt"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad flight-log header") from exc
    rows = lines[2:]
    if len(rows) != n:
        raise ParseError(f"{path}: expected {n} rows, found {len(rows)}")
    data = np.zeros((n, 9))
    for k, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != 9:
            raise ParseError(f"{path}: malformed row {k}")
        data[k] = [float(v) for v in parts]
    return FlightLog(
        t=data[:, 0], pos=data[:, 1:3].copy(), vel=data[:, 3:5].copy(),
        acc_cmd=data[:, 5:7].copy(), ref_pos=data[:, 7:9].copy(), dt=dt,
        meta={"wind": meta.get("wind") == "1", "scenario": meta.get("scenario", "-")},
    )
