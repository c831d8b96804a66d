"""Estimation and reachability pipelines, volume estimation, plot data."""
import math
from fractions import Fraction

import numpy as np
import pytest

from spectra import contains_point, from_ellipsoid, is_bounded, solve_support, translate
from spectra import Ellipsoid
from spectra.errors import ContractViolation
from spectra.harness import (
    EstimationRun,
    LinearSystem,
    ReachRun,
    build_lp_initial_sets,
    consistent_state_set,
    default_uncertainty_sets,
    emit_plot_data,
    estimate_volume,
    plot_csv,
    random_system,
    reach_step,
    run_estimation,
    run_reach,
    sample_lp_sum_point,
    simulate_linear_system,
    sme_step,
)

from conftest import box_shadow, singleton_shadow, unit_disk, unit_square


class TestRandomSystem:
    def test_deterministic(self):
        first = random_system(3, seed=11)
        second = random_system(3, seed=11)
        assert np.array_equal(first.a, second.a) and np.array_equal(first.f, second.f)

    def test_spectral_radius_bounded(self):
        for seed in range(100):
            sys_d = random_system(2, seed)
            assert max(abs(np.linalg.eigvals(sys_d.a))) <= 1.05 + 1e-12

    def test_shapes(self):
        sys_d = random_system(5, seed=0)
        for mat in (sys_d.a, sys_d.b, sys_d.l, sys_d.c, sys_d.f):
            assert mat.shape == (5, 5)


class TestSmeStep:
    def test_exact_measurement_collapses_the_set(self):
        # Noise-free scalar system: V = {0}, C = 1, F = 1 with zero noise set.
        system = LinearSystem([[1.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
        run = EstimationRun(
            system,
            x0=box_shadow([-1.0], [1.0]),
            w_set=singleton_shadow([0.0]),
            v_set=singleton_shadow([0.0]),
            horizon=1,
        )
        true_next = 0.3  # x1 = x0 + u with x0 = 0.1, u = 0.2
        updated = sme_step(run.x0, [true_next], [0.2], run)
        assert contains_point(updated, [true_next]).contains
        assert not contains_point(updated, [true_next + 0.01]).contains
        assert not contains_point(updated, [true_next - 0.01]).contains

    def test_unbounded_consistent_set_bounded_update(self):
        # One sensor, two states: the consistent set is a strip.
        system = LinearSystem(np.eye(2), np.eye(2), np.eye(2),
                              [[1.0, 0.0]], [[1.0]])
        _, w_set, v1 = default_uncertainty_sets(2)
        v_set = from_ellipsoid(Ellipsoid(np.zeros(1), np.array([[0.25]])))
        strip = consistent_state_set(system, v_set, np.array([0.0]))
        assert not is_bounded(strip).bounded
        run = EstimationRun(system, box_shadow([-1, -1], [1, 1]), w_set, v_set, horizon=1)
        updated = sme_step(run.x0, [0.0], [0.0, 0.0], run)
        assert is_bounded(updated).bounded

    def test_inconsistent_measurement_raises(self):
        system = LinearSystem([[1.0]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
        run = EstimationRun(system, box_shadow([-1], [1]), singleton_shadow([0.0]),
                            singleton_shadow([0.0]), horizon=1)
        with pytest.raises(ContractViolation, match="empty"):
            sme_step(run.x0, [50.0], [0.0], run)

    def test_truth_contained_over_runs(self, rng):
        for seed in (5, 6):
            system = random_system(2, seed)
            x0_set, w_set, v_set = default_uncertainty_sets(2)
            horizon = 12
            run = EstimationRun(system, x0_set, w_set, v_set, horizon=horizon, seed=seed)
            gen = np.random.default_rng(seed)
            x0 = gen.uniform(-1, 1, 2)
            inputs = [gen.uniform(-0.5, 0.5, 2) for _ in range(horizon)]
            dists = [gen.uniform(-1, 1, 2) for _ in range(horizon)]
            raw = [gen.standard_normal(2) for _ in range(horizon)]
            noises = [0.5 * v / max(1.0, np.linalg.norm(v)) * gen.uniform() for v in raw]
            states, meas = simulate_linear_system(system, x0, inputs, dists, noises)
            sets, logs = run_estimation(run, meas, inputs, truth=states)
            assert all(log.containment_checks == 1 for log in logs[1:])

    def test_reduce_policy_bounds_bytes(self):
        system = random_system(2, seed=9)
        x0_set, w_set, v_set = default_uncertainty_sets(2)
        horizon = 12
        run = EstimationRun(system, x0_set, w_set, v_set, horizon=horizon,
                            reduce_every=3, reduce_target=12, seed=9)
        gen = np.random.default_rng(9)
        x0 = gen.uniform(-1, 1, 2)
        inputs = [gen.uniform(-0.5, 0.5, 2) for _ in range(horizon)]
        dists = [gen.uniform(-1, 1, 2) for _ in range(horizon)]
        noises = [np.zeros(2) for _ in range(horizon)]
        states, meas = simulate_linear_system(system, x0, inputs, dists, noises)
        sets, logs = run_estimation(run, meas, inputs, truth=states)
        assert all(log.containment_checks == 1 for log in logs[1:])
        sizes = [s.size for s in sets]
        assert max(sizes) <= sizes[3] + (sizes[2] - sizes[0]) + 20  # saturates, no blow-up


class TestReachability:
    def test_identity_dynamics_fixed_point(self):
        x_next = reach_step(unit_disk(), singleton_shadow([0.0, 0.0]),
                            np.eye(2), np.zeros((2, 2)))
        for a in ([1.0, 0.0], [0.0, -1.0], [0.7, 0.7]):
            a = np.asarray(a) / np.linalg.norm(a)
            assert solve_support(x_next, a).optimum == pytest.approx(1.0, abs=1e-5)

    def test_zero_dynamics_gives_input_image(self):
        x_next = reach_step(unit_disk(), unit_square(), np.zeros((2, 2)), np.eye(2))
        for a in ([1.0, 0.0], [0.5, -0.5]):
            a = np.asarray(a) / np.linalg.norm(a)
            expected = np.abs(a).sum()
            assert solve_support(x_next, a).optimum == pytest.approx(expected, abs=1e-5)

    def test_single_ellipsoid_initial_set(self):
        run = ReachRun(np.eye(2), np.eye(2), [1.0, 0.0], [0.0, 0.0],
                       (np.diag([4.0, 1.0]),), (np.eye(2),), Fraction(3), Fraction(3, 2), 1)
        x0, _ = build_lp_initial_sets(run)
        direct = from_ellipsoid(Ellipsoid([1.0, 0.0], np.diag([4.0, 1.0])))
        for a in ([1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]):
            a = np.asarray(a) / np.linalg.norm(a)
            assert solve_support(x0, a).optimum == pytest.approx(
                solve_support(direct, a).optimum, abs=1e-5)

    def test_two_disks_p1_is_radius_two_disk(self):
        run = ReachRun(np.eye(2), np.eye(2), [0.0, 0.0], [0.0, 0.0],
                       (np.eye(2), np.eye(2)), (np.eye(2),), 1, 2, 1)
        x0, _ = build_lp_initial_sets(run)
        for a in ([1.0, 0.0], [0.6, -0.8]):
            assert solve_support(x0, a).optimum == pytest.approx(2.0, abs=1e-4)

    def test_two_disks_pinf_is_unit_disk(self):
        run = ReachRun(np.eye(2), np.eye(2), [0.0, 0.0], [0.0, 0.0],
                       (np.eye(2), np.eye(2)), (np.eye(2),), math.inf, 2, 1)
        x0, _ = build_lp_initial_sets(run)
        for a in ([1.0, 0.0], [0.6, -0.8]):
            assert solve_support(x0, a).optimum == pytest.approx(1.0, abs=1e-4)

    def test_sampled_trajectories_contained(self, rng):
        run = ReachRun([[0.9, 0.2], [-0.15, 0.85]], 0.4 * np.eye(2),
                       [0.5, -0.2], [0.1, 0.0],
                       (np.diag([1.0, 0.5]), 0.5 * np.eye(2)),
                       (np.eye(2) * 0.3,), Fraction(3), Fraction(3, 2), 4)
        sets, _ = run_reach(run)
        for _ in range(30):
            x = sample_lp_sum_point(rng, run.x_bar0, run.q_list, run.p1)
            for k in range(1, run.horizon + 1):
                u = sample_lp_sum_point(rng, run.u_bar, run.u_list, run.p2)
                x = run.a @ x + run.b @ u
                assert contains_point(sets[k], x).contains

    def test_directed_sample_attains_support(self, rng):
        center = np.array([0.3, -0.1])
        shapes = (np.diag([2.0, 0.5]), np.eye(2))
        shadow = translate(
            build_lp_initial_sets(ReachRun(np.eye(2), np.eye(2), center, [0, 0],
                                           shapes, (np.eye(2),), Fraction(3), 1, 1))[0],
            [0.0, 0.0])
        for a in ([1.0, 0.0], [0.6, 0.8], [-1.0, 0.0]):
            a = np.asarray(a) / np.linalg.norm(a)
            point = sample_lp_sum_point(rng, center, shapes, Fraction(3), direction=a)
            h = solve_support(shadow, a).optimum
            assert float(a @ point) == pytest.approx(h, abs=1e-6)
            assert contains_point(shadow, point).contains


class TestVolume:
    def test_disk_area(self):
        est = estimate_volume(unit_disk(), k_dirs=256)
        assert est.value == pytest.approx(math.pi, rel=0.01)
        assert not est.degenerate

    def test_square_area(self):
        est = estimate_volume(unit_square(), k_dirs=64)
        assert est.value == pytest.approx(4.0, rel=0.01)

    def test_segment_degenerate(self):
        from spectra import Zonotope, from_zonotope

        segment = from_zonotope(Zonotope(np.zeros(2), np.array([[1.0], [1.0]])))
        est = estimate_volume(segment, k_dirs=32)
        assert est.value <= 1e-3
        assert est.degenerate

    def test_ball_3d_monte_carlo(self):
        ball = from_ellipsoid(Ellipsoid(np.zeros(3), np.eye(3)))
        est = estimate_volume(ball, mc_samples=3000, seed=1)
        assert est.value == pytest.approx(4.0 * math.pi / 3.0, rel=0.15)

    def test_unbounded_rejected(self):
        from conftest import parabola_shadow

        with pytest.raises(ContractViolation, match="unbounded"):
            estimate_volume(parabola_shadow(), k_dirs=16)


class TestPlotData:
    def test_disk_boundary_points(self):
        points = emit_plot_data(unit_disk(), k_dirs=8)
        assert points.shape == (8, 2)
        assert np.allclose(np.linalg.norm(points, axis=1), 1.0, atol=1e-5)

    def test_square_axis_directions(self):
        points = emit_plot_data(unit_square(), k_dirs=4)
        for i, point in enumerate(points):
            assert abs(point[i % 2]) == pytest.approx(1.0, abs=1e-5)

    def test_translated_disk(self):
        points = emit_plot_data(translate(unit_disk(), [5.0, 5.0]), k_dirs=16)
        dists = np.linalg.norm(points - np.array([5.0, 5.0]), axis=1)
        assert np.all(dists <= 1.0 + 1e-6)

    def test_csv_shape(self):
        text = plot_csv(emit_plot_data(unit_disk(), k_dirs=4))
        lines = text.strip().splitlines()
        assert lines[0] == "x,y"
        assert len(lines) == 5
