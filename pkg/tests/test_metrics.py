import itertools

import numpy as np
import pytest

import boltzflow as bf
from boltzflow.errors import EvaluationError

LOG_2PI = np.log(2.0 * np.pi)


def brute_force_w2(a, b):
    n = a.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.sum((a[i] - b[j]) ** 2) for i, j in enumerate(perm))
        best = min(best, cost)
    return np.sqrt(best / n)


def brute_force_w1_scalar(a, b):
    n = len(a)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(abs(a[i] - b[j]) for i, j in enumerate(perm)) / n)
    return best


class TestWasserstein2:
    def test_identical_sets_zero(self, rng):
        a = rng.standard_normal((50, 3))
        assert bf.wasserstein2(a, a.copy()) == 0.0

    def test_hand_example_1d(self):
        a = np.array([[0.0], [1.0]])
        b = np.array([[1.0], [2.0]])
        # both pairings cost (1+1)/2 or (0+4)/2; optimal mean-squared cost is 1
        assert bf.wasserstein2(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force_small_sets(self):
        rng = np.random.default_rng(3)
        for trial in range(100):
            n = int(rng.integers(2, 9))
            d = int(rng.integers(1, 4))
            a = rng.standard_normal((n, d))
            b = rng.standard_normal((n, d))
            assert bf.wasserstein2(a, b) == pytest.approx(brute_force_w2(a, b), rel=1e-9)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            a, b, c = (rng.standard_normal((12, 2)) for _ in range(3))
            dab = bf.wasserstein2(a, b)
            assert dab == pytest.approx(bf.wasserstein2(b, a), abs=1e-9)
            assert dab <= bf.wasserstein2(a, c) + bf.wasserstein2(c, b) + 1e-9

    def test_scale_equivariance(self, rng):
        a = rng.standard_normal((20, 2))
        b = rng.standard_normal((20, 2))
        w = bf.wasserstein2(a, b)
        for c in (-3.0, 0.5, 7.0):
            assert bf.wasserstein2(c * a, c * b) == pytest.approx(abs(c) * w, rel=1e-9)

    def test_unequal_counts_subsamples(self, rng):
        a = rng.standard_normal((30, 2))
        b = rng.standard_normal((50, 2))
        w = bf.wasserstein2(a, b, rng=np.random.default_rng(0))
        assert np.isfinite(w) and w > 0

    def test_chunked_path_is_upper_bound(self, rng):
        # chunked matching composes a valid (suboptimal) global permutation
        a = rng.standard_normal((64, 2))
        b = rng.standard_normal((64, 2)) + 0.5
        approx = bf.wasserstein2(a, b, rng=np.random.default_rng(0), exact_limit=16)
        exact = bf.wasserstein2(a, b)
        assert exact - 1e-12 <= approx <= 2.5 * exact


class TestEvaluateNll:
    def test_zero_field_on_prior_data(self, rng):
        model = bf.VectorFieldMLP(2, rng=rng)  # identity flow
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        data = np.random.default_rng(7).standard_normal((2000, 2))
        nll = bf.evaluate_nll(model, sched, data, bf.OdeConfig(50, "rk4"))
        assert nll == pytest.approx(1.0 + LOG_2PI, abs=0.05)  # 2.8379

    def test_row_order_invariance(self, rng):
        model = bf.VectorFieldMLP(2, rng=rng)
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        data = rng.standard_normal((64, 2))
        a = bf.evaluate_nll(model, sched, data, bf.OdeConfig(20, "rk4"))
        b = bf.evaluate_nll(model, sched, data[::-1], bf.OdeConfig(20, "rk4"))
        assert a == pytest.approx(b, abs=1e-12)

    def test_failure_fraction_aborts(self, rng):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        blow_up = lambda x, t: x * 1e160
        data = rng.standard_normal((20, 2))
        with pytest.raises(EvaluationError):
            with np.errstate(over="ignore", invalid="ignore"):
                bf.evaluate_nll(blow_up, sched, data, bf.OdeConfig(10, "euler"))


class TestEnergyHistogramDistance:
    def test_identical_sets(self, rng):
        model = bf.StandardGaussian(2)
        a = rng.standard_normal((40, 2))
        assert bf.energy_histogram_distance(a, a.copy(), model) == 0.0

    def test_point_mass_shift(self):
        # energies {0, 0} vs {1, 1}: the 1-D W1 distance is 1
        class Identity1D(bf.EnergyModel):
            kind, dim = "ident", 1

            def energy(self, x):
                x = np.atleast_2d(x)
                return x[:, 0]

        a = np.zeros((2, 1))
        b = np.ones((2, 1))
        assert bf.energy_histogram_distance(a, b, Identity1D()) == pytest.approx(1.0)

    def test_matches_brute_force_assignment(self):
        class Identity1D(bf.EnergyModel):
            kind, dim = "ident", 1

            def energy(self, x):
                x = np.atleast_2d(x)
                return x[:, 0]

        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            a = rng.standard_normal((n, 1))
            b = rng.standard_normal((n, 1))
            got = bf.energy_histogram_distance(a, b, Identity1D())
            expect = brute_force_w1_scalar(a[:, 0].tolist(), b[:, 0].tolist())
            assert got == pytest.approx(expect, rel=1e-9)
