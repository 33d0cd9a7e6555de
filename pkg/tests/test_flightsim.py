"""Replay simulator: tracking accuracy, integrator order, relaxation toward
the wind, determinism, collision detection, and log round trips."""
import numpy as np
import pytest

from windplan import bezier, flightsim, lbm
from windplan.env import OccupancyGrid
from windplan.errors import (
    DivergedSimulation,
    EmptyLog,
    ParseError,
    ValidationError,
)
from windplan.flightsim import (
    DroneModel,
    FlightLog,
    PolylineReference,
    detect_collision,
    read_log_csv,
    simulate_flight,
    write_log_csv,
)

FREE_GRID = OccupancyGrid(60, 60, 0.1, np.zeros((60, 60), dtype=bool))


def smooth_reference():
    pts = np.array([[1.0, 1.0], [2.0, 1.2], [3.0, 2.8], [4.5, 3.0]])
    return bezier.BezierTrajectory(pts, T=10.0)


class TestDroneModel:
    def test_defaults_valid(self):
        d = DroneModel()
        assert d.mass > 0 and d.dt == 0.01

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mass": 0.0},
            {"mass": -1.0},
            {"drag_gain": -0.1},
            {"a_max": 0.0},
            {"dt": 0.0},
            {"dt": 0.05},
        ],
    )
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValidationError):
            DroneModel(**kwargs)


class TestPolylineReference:
    def test_duration_is_length_over_speed(self):
        ref = PolylineReference(np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]), 0.5)
        assert ref.T == pytest.approx(7.0 / 0.5, rel=1e-12)

    def test_states_along_segments(self):
        ref = PolylineReference(np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]]), 1.0)
        pos, vel, acc = ref.state_at(1.0)
        np.testing.assert_allclose(pos, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(vel, [1.0, 0.0], atol=1e-12)
        np.testing.assert_array_equal(acc, [0.0, 0.0])
        pos, vel, acc = ref.state_at(3.0)  # past the corner
        np.testing.assert_allclose(pos, [2.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(vel, [0.0, 1.0], atol=1e-12)
        np.testing.assert_array_equal(acc, [0.0, 0.0])

    def test_holds_goal_after_duration(self):
        ref = PolylineReference(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.5)
        pos, vel, _ = ref.state_at(ref.T + 3.0)
        np.testing.assert_array_equal(pos, [1.0, 0.0])
        np.testing.assert_array_equal(vel, [0.0, 0.0])

    def test_validation(self):
        with pytest.raises(ValidationError):
            PolylineReference(np.array([[1.0, 1.0]]), 1.0)
        with pytest.raises(ValidationError):
            PolylineReference(np.array([[1.0, 1.0], [1.0, 1.0]]), 1.0)
        with pytest.raises(ValidationError):
            PolylineReference(np.array([[0.0, 0.0], [1.0, 0.0]]), 0.0)


class TestTracking:
    def test_still_air_with_stiff_gains(self):
        drone = DroneModel(mass=0.03, drag_gain=0.0, a_max=50.0, dt=0.01)
        log = simulate_flight(smooth_reference(), None, FREE_GRID, drone, (25.0, 12.0))
        err = np.linalg.norm(log.pos - log.ref_pos, axis=1).max()
        assert err < 1e-3

    def test_open_loop_error_matches_closed_form_and_halves(self):
        # gains off, constant-acceleration quadratic: semi-implicit Euler
        # drift is exactly |a| T dt / 2, so halving dt halves the error
        pts = np.array([[1.0, 1.0], [3.0, 1.4], [4.2, 4.6]])
        traj = bezier.BezierTrajectory(pts, T=8.0)
        a_vec = 2.0 * (pts[2] - 2.0 * pts[1] + pts[0]) / traj.T**2
        errs = {}
        for dt in (0.02, 0.01, 0.005):
            drone = DroneModel(mass=0.03, drag_gain=0.0, a_max=50.0, dt=dt)
            log = simulate_flight(traj, None, FREE_GRID, drone, (0.0, 0.0))
            errs[dt] = np.linalg.norm(log.pos - log.ref_pos, axis=1).max()
            want = np.linalg.norm(a_vec) * traj.T * dt / 2.0
            assert errs[dt] == pytest.approx(want, rel=1e-6)
        assert errs[0.01] <= 0.5 * errs[0.02] * (1.0 + 1e-9)
        assert errs[0.005] <= 0.5 * errs[0.01] * (1.0 + 1e-9)

    def test_closed_loop_error_shrinks_with_dt(self):
        errs = []
        for dt in (0.02, 0.01, 0.005):
            drone = DroneModel(mass=0.03, drag_gain=0.0, a_max=50.0, dt=dt)
            log = simulate_flight(smooth_reference(), None, FREE_GRID, drone, (4.0, 3.0))
            errs.append(np.linalg.norm(log.pos - log.ref_pos, axis=1).max())
        assert errs[1] < errs[0]
        assert errs[2] < errs[1]

    def test_crosswind_relaxation_time_constant(self):
        # controller off, K/m = 1/s: velocity relaxes to the wind with
        # tau = 1 s, so the residual at t = 5 s is about e^-5 |v0 - w|
        wind = lbm.WindField(60, 60, 0.1, np.zeros((60, 60)), np.full((60, 60), 1.0))
        ref = PolylineReference(np.array([[1.0, 0.5], [2.2, 0.5]]), 0.2)
        drone = DroneModel(mass=0.05, drag_gain=0.05, a_max=50.0, dt=0.01)
        log = simulate_flight(ref, wind, FREE_GRID, drone, (0.0, 0.0))
        w = np.array([0.0, 1.0])
        residual = np.linalg.norm(log.vel[500] - w)
        assert residual < 0.01
        assert residual > 1e-4  # not yet fully converged either

    def test_wind_frame_energy_never_increases(self):
        wind = lbm.WindField(60, 60, 0.1, np.zeros((60, 60)), np.full((60, 60), 1.0))
        ref = PolylineReference(np.array([[1.0, 0.5], [2.2, 0.5]]), 0.2)
        drone = DroneModel(mass=0.05, drag_gain=0.05, a_max=50.0, dt=0.01)
        log = simulate_flight(ref, wind, FREE_GRID, drone, (0.0, 0.0))
        ke = 0.5 * ((log.vel - [0.0, 1.0]) ** 2).sum(axis=1)
        assert (np.diff(ke) <= 1e-15).all()


class TestDeterminism:
    def test_noise_free_replay_is_bitwise_stable(self):
        logs = [
            simulate_flight(smooth_reference(), None, FREE_GRID, seed=s)
            for s in (0, 99)
        ]
        np.testing.assert_array_equal(logs[0].pos, logs[1].pos)
        np.testing.assert_array_equal(logs[0].vel, logs[1].vel)

    def test_same_seed_same_noise(self):
        a = simulate_flight(smooth_reference(), None, FREE_GRID, noise_std=0.01, seed=7)
        b = simulate_flight(smooth_reference(), None, FREE_GRID, noise_std=0.01, seed=7)
        c = simulate_flight(smooth_reference(), None, FREE_GRID, noise_std=0.01, seed=8)
        np.testing.assert_array_equal(a.pos, b.pos)
        assert np.abs(a.pos - c.pos).max() > 0.0

    def test_gain_and_noise_validation(self):
        with pytest.raises(ValidationError):
            simulate_flight(smooth_reference(), None, FREE_GRID, gains=(-1.0, 3.0))
        with pytest.raises(ValidationError):
            simulate_flight(smooth_reference(), None, FREE_GRID, noise_std=-0.1)

    def test_divergence_reports_time(self):
        drone = DroneModel(mass=0.03, drag_gain=0.0, a_max=1e9, dt=0.01)
        with pytest.raises(DivergedSimulation) as err:
            simulate_flight(smooth_reference(), None, FREE_GRID, drone, (1e6, 0.0))
        assert err.value.t > 0.0
        assert err.value.exit_code == 5


class TestCollision:
    def grid_with_block(self):
        solid = np.zeros((20, 20), dtype=bool)
        solid[8:12, 8:12] = True
        return OccupancyGrid(20, 20, 0.1, solid)

    def make_log(self, xs):
        n = len(xs)
        pos = np.column_stack([xs, np.full(n, 1.0)])
        zeros = np.zeros((n, 2))
        return FlightLog(
            t=np.arange(n) * 0.01, pos=pos, vel=zeros.copy(),
            acc_cmd=zeros.copy(), ref_pos=pos.copy(), dt=0.01,
        )

    def test_first_contact_index(self):
        grid = self.grid_with_block()
        log = self.make_log([0.1, 0.5, 0.85, 0.95, 1.5])  # enters block at x=0.85
        hit, idx = detect_collision(log, grid)
        assert hit is True and idx == 2

    def test_clear_flight(self):
        grid = self.grid_with_block()
        log = self.make_log([0.1, 0.3, 0.5, 0.7])
        assert detect_collision(log, grid) == (False, None)

    def test_outside_domain_is_not_contact(self):
        grid = self.grid_with_block()
        log = self.make_log([-0.5, 2.5])
        assert detect_collision(log, grid) == (False, None)


class TestLogValidationAndIo:
    def test_log_requires_even_spacing(self):
        zeros = np.zeros((3, 2))
        with pytest.raises(ValidationError):
            FlightLog(
                t=np.array([0.0, 0.01, 0.03]), pos=zeros.copy(), vel=zeros.copy(),
                acc_cmd=zeros.copy(), ref_pos=zeros.copy(), dt=0.01,
            )

    def test_log_rejects_empty_and_bad_shapes(self):
        with pytest.raises(EmptyLog):
            FlightLog(
                t=np.array([]), pos=np.zeros((0, 2)), vel=np.zeros((0, 2)),
                acc_cmd=np.zeros((0, 2)), ref_pos=np.zeros((0, 2)), dt=0.01,
            )
        with pytest.raises(ValidationError):
            FlightLog(
                t=np.zeros(3), pos=np.zeros((2, 2)), vel=np.zeros((3, 2)),
                acc_cmd=np.zeros((3, 2)), ref_pos=np.zeros((3, 2)), dt=0.01,
            )

    def test_csv_round_trip_is_bitwise(self, tmp_path):
        log = simulate_flight(
            smooth_reference(), None, FREE_GRID, noise_std=0.005, seed=3
        )
        out = tmp_path / "log.csv"
        write_log_csv(log, out)
        back = read_log_csv(out)
        np.testing.assert_array_equal(back.t, log.t)
        np.testing.assert_array_equal(back.pos, log.pos)
        np.testing.assert_array_equal(back.vel, log.vel)
        np.testing.assert_array_equal(back.acc_cmd, log.acc_cmd)
        np.testing.assert_array_equal(back.ref_pos, log.ref_pos)
        assert back.dt == log.dt

    def test_csv_header_and_errors(self, tmp_path):
        log = simulate_flight(smooth_reference(), None, FREE_GRID)
        out = tmp_path / "log.csv"
        write_log_csv(log, out)
        first = out.read_text().splitlines()[0]
        assert first.startswith("# flightlog") and "dt=" in first
        with pytest.raises(ParseError):
            read_log_csv(tmp_path / "nope.csv")
        bad = tmp_path / "bad.csv"
        bad.write_text("just text\n")
        with pytest.raises(ParseError):
            read_log_csv(bad)
        truncated = tmp_path / "short.csv"
        lines = out.read_text().splitlines()
        truncated.write_text("\n".join(lines[:10]) + "\n")
        with pytest.raises(ParseError):
            read_log_csv(truncated)
