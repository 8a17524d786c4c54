import math

import numpy as np
import pytest

from vanetmarket import (
    CalibrationReport,
    DEFAULT_CALIBRATION_FREQS,
    LossModel,
    PlanarPath,
    calibrate_per_server_loss,
    discrete_frechet,
    fit_per_server_decay,
    mean_similarity_by_frequency,
    path_similarity,
    total_loss,
    total_loss_raw,
)


def brute_force_frechet(p, q):
    """Minimum over all monotone couplings of the max coupled distance."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)

    def dist(i, j):
        return math.sqrt((p[i, 0] - q[j, 0]) ** 2 + (p[i, 1] - q[j, 1]) ** 2)

    best = [math.inf]

    def walk(i, j, current):
        current = max(current, dist(i, j))
        if current >= best[0]:
            return
        if i == len(p) - 1 and j == len(q) - 1:
            best[0] = current
            return
        if i + 1 < len(p):
            walk(i + 1, j, current)
        if j + 1 < len(q):
            walk(i, j + 1, current)
        if i + 1 < len(p) and j + 1 < len(q):
            walk(i + 1, j + 1, current)

    walk(0, 0, 0.0)
    return best[0]


def naive_recursive_frechet(p, q):
    """Textbook recursive definition, no memoization."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)

    def dist(i, j):
        return math.sqrt((p[i, 0] - q[j, 0]) ** 2 + (p[i, 1] - q[j, 1]) ** 2)

    def rec(i, j):
        d = dist(i, j)
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(rec(0, j - 1), d)
        if j == 0:
            return max(rec(i - 1, 0), d)
        return max(min(rec(i - 1, j), rec(i - 1, j - 1), rec(i, j - 1)), d)

    return rec(len(p) - 1, len(q) - 1)


def random_path(rng, max_len=8, lattice=False):
    n = int(rng.integers(1, max_len + 1))
    if lattice:
        return rng.integers(0, 3, size=(n, 2)).astype(float)
    return rng.uniform(-10, 10, size=(n, 2))


class TestDiscreteFrechet:
    def test_identical_paths(self):
        p = np.array([[0.0, 0.0], [2.0, 1.0], [4.0, 0.0]])
        assert discrete_frechet(p, p.copy()) == 0.0

    def test_single_pair_euclidean(self):
        assert discrete_frechet(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 5.0

    def test_parallel_segments(self):
        p = np.array([[0.0, 0.0], [1.0, 0.0]])
        q = np.array([[0.0, 1.0], [1.0, 1.0]])
        assert discrete_frechet(p, q) == 1.0
        assert brute_force_frechet(p, q) == 1.0

    def test_against_coupling_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            p, q = random_path(rng, 6), random_path(rng, 6)
            assert discrete_frechet(p, q) == pytest.approx(brute_force_frechet(p, q), abs=1e-12)

    def test_against_naive_recursion_random_lattice(self):
        rng = np.random.default_rng(22)
        for _ in range(500):
            p = random_path(rng, 6, lattice=True)
            q = random_path(rng, 6, lattice=True)
            assert discrete_frechet(p, q) == naive_recursive_frechet(p, q)

    def test_symmetry_nonnegativity_triangle(self):
        rng = np.random.default_rng(23)
        for _ in range(500):
            p, q, r = (random_path(rng) for _ in range(3))
            dpq = discrete_frechet(p, q)
            dqr = discrete_frechet(q, r)
            dpr = discrete_frechet(p, r)
            assert dpq >= 0.0
            assert dpq == discrete_frechet(q, p)
            assert dpr <= dpq + dqr + 1e-9

    def test_dominates_hausdorff(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            p, q = random_path(rng), random_path(rng)
            d2 = np.sqrt(((p[:, None, :] - q[None, :, :]) ** 2).sum(axis=2))
            hausdorff = max(d2.min(axis=1).max(), d2.min(axis=0).max())
            assert discrete_frechet(p, q) >= hausdorff - 1e-12

    def test_accepts_planar_paths(self):
        p = PlanarPath(np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert discrete_frechet(p, p) == 0.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            discrete_frechet(np.empty((0, 2)), np.array([[0.0, 0.0]]))


class TestPathSimilarity:
    def test_identical_is_one(self):
        p = PlanarPath(np.array([[0.0, 0.0], [50.0, 0.0], [100.0, 0.0]]))
        assert path_similarity(p, p) == 1.0

    def test_fully_displaced_is_zero(self):
        p = PlanarPath(np.array([[0.0, 0.0], [100.0, 0.0]]))
        q = PlanarPath(np.array([[0.0, 500.0], [100.0, 500.0]]))
        assert path_similarity(p, q) == 0.0

    def test_straight_line_two_endpoint_subsample(self):
        # 10 collinear points spanning 100 m against just the two endpoints:
        # interior vertices sit up to (4/9)*100 m from the nearest endpoint,
        # so the discrete metric leaves similarity at 5/9 (oracle-confirmed).
        xs = np.linspace(0.0, 100.0, 10)
        full = np.column_stack([xs, np.zeros(10)])
        ends = np.array([[0.0, 0.0], [100.0, 0.0]])
        expected_d = brute_force_frechet(full, ends)
        assert expected_d == pytest.approx(400.0 / 9.0, rel=1e-12)
        sim = path_similarity(PlanarPath(full), PlanarPath(ends))
        assert sim == pytest.approx(5.0 / 9.0, rel=1e-12)

    def test_zero_diameter_rejected(self):
        p = PlanarPath(np.array([[1.0, 1.0], [1.0, 1.0]]))
        q = PlanarPath(np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ValueError, match="diameter"):
            path_similarity(p, q)

    def test_short_paths_rejected(self):
        p = PlanarPath(np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            path_similarity(p, PlanarPath(np.array([[0.0, 0.0]])))


class TestLossModel:
    def test_invariants(self):
        with pytest.raises(ValueError):
            LossModel(k=0.0)
        with pytest.raises(ValueError):
            LossModel(p=-1.0)
        with pytest.raises(ValueError):
            LossModel(eps_clamp=0.0)
        with pytest.raises(ValueError):
            LossModel(eps_clamp=1.5)

    def test_value_at_unit_point(self):
        model = LossModel()
        assert total_loss_raw(model, 1.0, 1.0) == pytest.approx(0.09511325254069622, rel=1e-12)
        assert total_loss(model, 1.0, 1.0) == pytest.approx(0.09511325254069622, rel=1e-12)

    def test_clamp_activates_at_reported_operating_point(self):
        model = LossModel()
        raw = total_loss_raw(model, 7.31, 15.12)
        assert raw == pytest.approx(-3.4058440550044367e-06, rel=1e-9)
        assert total_loss(model, 7.31, 15.12) == model.eps_clamp

    def test_limit_reduces_to_first_term(self):
        # with huge p and q the frequency and server terms are both suppressed
        model = LossModel(k=12.447, p=1e6, q=1e6)
        f_d, s = 0.35, 2.0
        assert total_loss(model, f_d, s) == pytest.approx(
            1.0 - math.exp(-12.447 * f_d / s), abs=1e-12
        )

    def test_clamped_range_property(self):
        model = LossModel()
        rng = np.random.default_rng(31)
        for _ in range(500):
            f_d = float(10 ** rng.uniform(-2, 2))
            s = float(rng.uniform(1, 100))
            val = total_loss(model, f_d, s)
            assert model.eps_clamp <= val <= 1.0

    def test_first_term_monotonicity(self):
        model = LossModel()
        first = lambda f, s: 1.0 - math.exp(-model.k * f / s)
        fs = np.linspace(0.05, 2.0, 25)  # below float saturation of the exponential
        ss = np.linspace(1, 100, 25)
        assert all(first(a, 5.0) < first(b, 5.0) for a, b in zip(fs, fs[1:]))
        assert all(first(2.0, a) > first(2.0, b) for a, b in zip(ss, ss[1:]))

    def test_preconditions(self):
        model = LossModel()
        with pytest.raises(ValueError):
            total_loss(model, 0.0, 1.0)
        with pytest.raises(ValueError):
            total_loss(model, 1.0, 0.5)


class TestPerServerFit:
    def test_planted_coefficient_recovery(self):
        points = [(f, 1.0 - math.exp(-12.447 * f)) for f in DEFAULT_CALIBRATION_FREQS]
        report = fit_per_server_decay(points)
        assert report.fitted_k == pytest.approx(12.447, abs=1e-6)
        assert report.residual_rms < 1e-9
        assert report.converged

    def test_default_ladder_is_half_down_to_tenth(self):
        assert DEFAULT_CALIBRATION_FREQS == tuple(1.0 / m for m in range(2, 11))

    def test_underdetermined(self):
        with pytest.raises(ValueError, match="underdetermined"):
            fit_per_server_decay([(0.5, 0.9), (0.5, 0.91)])

    def test_degenerate_all_zero_similarities(self):
        points = [(f, 0.0) for f in DEFAULT_CALIBRATION_FREQS]
        report = fit_per_server_decay(points)
        assert abs(report.fitted_k) < 1e-3  # flat decay fits k ~ 0

    def test_report_validation(self):
        with pytest.raises(ValueError):
            CalibrationReport(fitted_k=1.0, residual_rms=-0.1, points=((0.5, 0.9),))
        with pytest.raises(ValueError):
            CalibrationReport(fitted_k=1.0, residual_rms=0.0, points=())
        with pytest.raises(ValueError):
            CalibrationReport(fitted_k=1.0, residual_rms=0.0, points=((0.5, 1.2),))


class TestCalibration:
    def test_mean_similarity_non_decreasing_in_frequency(self, fleet):
        points = dict(mean_similarity_by_frequency(fleet, DEFAULT_CALIBRATION_FREQS))
        ordered = [points[f] for f in sorted(points)]
        assert all(a <= b + 1e-12 for a, b in zip(ordered, ordered[1:]))

    def test_report_points_match_measurement(self, fleet):
        freqs = (0.5, 0.25, 0.125)
        report = calibrate_per_server_loss(fleet, freqs)
        measured = mean_similarity_by_frequency(fleet, freqs)
        assert report.points == tuple(measured)
        assert 0.0 < report.fitted_k

    def test_vehicle_order_invariance(self, fleet):
        freqs = (0.5, 0.2)
        forward = mean_similarity_by_frequency(fleet, freqs)
        backward = mean_similarity_by_frequency(list(reversed(fleet)), freqs)
        assert forward == backward

    def test_empty_inputs_rejected(self, fleet):
        with pytest.raises(ValueError):
            calibrate_per_server_loss([], (0.5, 0.2))
        with pytest.raises(ValueError):
            mean_similarity_by_frequency(fleet, [])
