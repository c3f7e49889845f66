import numpy as np
import pytest

import boltzflow as bf
from boltzflow.errors import ClampedTimeError, ConfigError, SingularScheduleError

LOG_2PI = np.log(2.0 * np.pi)


def gauss_logpdf(x, mean, std, d):
    return -0.5 * np.sum((x - mean) ** 2) / std**2 - 0.5 * d * np.log(2 * np.pi * std**2)


class TestSchedules:
    def test_ot_mean_endpoints(self):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        x1 = np.array([3.0, -1.0])
        np.testing.assert_array_equal(sched.mean(0.0, x1), np.zeros(2))
        np.testing.assert_array_equal(sched.mean(1.0, x1), x1)

    def test_ve_mean_is_endpoint(self, rng):
        sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        x1 = rng.standard_normal(2)
        for t in (0.0, 0.31, 1.0):
            np.testing.assert_array_equal(sched.mean(t, x1), x1)

    def test_ot_sigma_closed_form(self):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        sig, dsig = sched.sigma(0.0)
        assert sig == pytest.approx(1.0, abs=0)
        assert dsig == pytest.approx(-0.95, abs=0)
        sig, _ = sched.sigma(1.0)
        assert sig == pytest.approx(0.05, abs=1e-15)

    def test_ve_sigma_geometric(self):
        sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        assert sched.sigma(0.0)[0] == pytest.approx(40.0, rel=1e-12)
        assert sched.sigma(1.0)[0] == pytest.approx(0.01, rel=1e-12)
        assert sched.sigma(0.5)[0] == pytest.approx(np.sqrt(40 * 0.01), rel=1e-12)

    def test_sigma_derivative_matches_finite_differences(self):
        h = 1e-6
        for sched in (bf.PathSchedule("OT", sigma_min=0.05),
                      bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)):
            for t in np.linspace(0.05, 0.95, 20):
                _, dsig = sched.sigma(t)
                fd = (sched.sigma(t + h)[0] - sched.sigma(t - h)[0]) / (2 * h)
                assert dsig == pytest.approx(fd, rel=1e-6)

    def test_kind_aliases(self):
        assert bf.PathSchedule("OptimalTransport", sigma_min=0.05).kind == "OT"
        assert bf.PathSchedule("variance-exploding", sigma_min=0.01, sigma_max=2.0).kind == "VE"
        with pytest.raises(ConfigError):
            bf.PathSchedule("VP")

    def test_invariants(self):
        with pytest.raises(ConfigError):
            bf.PathSchedule("VE", sigma_min=2.0, sigma_max=1.0)
        with pytest.raises(ConfigError):
            bf.PathSchedule("OT", sigma_min=1.5)
        with pytest.raises(ConfigError):
            bf.PathSchedule("OT", sigma_min=0.05, t_min=0.7)


class TestSampleConditional:
    def test_zero_noise_limit_returns_endpoint(self, rng):
        sched = bf.PathSchedule("OT", sigma_min=0.0)
        x1 = np.array([2.0, -3.0])
        np.testing.assert_array_equal(sched.sample_conditional(1.0, x1, rng), x1)

    def test_ot_moments(self):
        sched = bf.PathSchedule("OT", sigma_min=0.0)
        rng = np.random.default_rng(4)
        x1 = np.tile([2.0, 0.0], (10**5, 1))
        draws = sched.sample_conditional(0.5, x1, rng)
        np.testing.assert_allclose(draws.mean(axis=0), [1.0, 0.0], atol=0.01)
        assert draws.std(axis=0)[0] == pytest.approx(0.5, rel=0.02)
        assert draws.std(axis=0)[1] == pytest.approx(0.5, rel=0.02)

    def test_ve_concentrates_at_data_end(self):
        sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        rng = np.random.default_rng(5)
        x1 = np.tile([1.0, 1.0], (2000, 1))
        draws = sched.sample_conditional(1.0, x1, rng)
        assert np.all(np.abs(draws - x1) < 0.05)  # 5 sigma


class TestConditionalField:
    def test_on_mean_point_equals_mean_velocity(self):
        x1 = np.array([3.0, 3.0])
        ot = bf.PathSchedule("OT", sigma_min=0.05)
        np.testing.assert_allclose(ot.conditional_field(0.4, ot.mean(0.4, x1), x1), x1, atol=1e-12)
        ve = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        np.testing.assert_allclose(ve.conditional_field(0.4, x1, x1), 0.0, atol=1e-12)

    def test_ot_closed_form(self):
        sched = bf.PathSchedule("OT", sigma_min=0.0)
        v = sched.conditional_field(0.0, np.array([1.0, 1.0]), np.array([3.0, 3.0]))
        np.testing.assert_allclose(v, [2.0, 2.0], atol=1e-12)

    def test_ve_constant_coefficient(self):
        sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        x1 = np.array([0.0, 0.0])
        x = np.array([1.0, 0.0])
        v = sched.conditional_field(0.37, x, x1)
        np.testing.assert_allclose(v, [np.log(0.01 / 40.0), 0.0], rtol=1e-12)
        assert v[0] == pytest.approx(-8.29404964, abs=1e-6)

    def test_ot_singular_at_endpoint(self):
        sched = bf.PathSchedule("OT", sigma_min=0.0)
        with pytest.raises(SingularScheduleError):
            sched.conditional_field(1.0, np.ones(2), np.ones(2))

    def test_field_transports_conditional_path(self, rng):
        # integrating the conditional field from p_ta(.|x1) must land in
        # p_tb(.|x1): matching first and second moments within 3 SE
        x1 = np.array([2.0, -1.0])
        n = 10**4
        for sched in (bf.PathSchedule("OT", sigma_min=0.05),
                      bf.PathSchedule("VE", sigma_min=0.01, sigma_max=10.0)):
            ta, tb = 0.2, 0.8
            xa = sched.sample_conditional(np.full(n, ta), np.tile(x1, (n, 1)), rng)

            def field(x, t):
                return sched.conditional_field(t, x, np.tile(x1, (x.shape[0], 1)))

            xb = bf.integrate(field, xa, ta, tb, bf.OdeConfig(n_steps=100, scheme="rk4"))
            mu_b = sched.mean(tb, x1)
            sig_b, _ = sched.sigma(tb)
            se_mean = sig_b / np.sqrt(n)
            assert np.all(np.abs(xb.mean(axis=0) - mu_b) < 3 * se_mean + 1e-9)
            se_std = sig_b / np.sqrt(2 * n)
            assert np.all(np.abs(xb.std(axis=0) - sig_b) < 3 * se_std + 1e-9)


class TestCandidateDistribution:
    def test_ve_candidate(self, rng):
        sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        x = rng.standard_normal(2)
        q = sched.candidate(0.3, x)
        np.testing.assert_array_equal(q.mean, x)
        assert q.std == pytest.approx(sched.sigma(0.3)[0], rel=0)

    def test_ot_candidate_at_data_end(self):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        x = np.array([0.4, 0.2])
        q = sched.candidate(1.0, x)
        np.testing.assert_allclose(q.mean, x, atol=1e-15)
        assert q.std == pytest.approx(0.05, abs=1e-15)

    def test_ot_candidate_midpath(self):
        sched = bf.PathSchedule("OT", sigma_min=0.0)
        q = sched.candidate(0.5, np.array([1.0, 0.0]))
        np.testing.assert_allclose(q.mean, [2.0, 0.0], atol=1e-15)
        assert q.std == pytest.approx(1.0, abs=1e-15)

    def test_ot_small_t_clamped(self):
        sched = bf.PathSchedule("OT", sigma_min=0.05, t_min=0.01)
        with pytest.raises(ClampedTimeError):
            sched.candidate(0.005, np.zeros(2))

    def test_candidate_is_exact_renormalization(self, rng):
        # log p_t(x|x1) - log q(x1; x, t) must not depend on x1
        for sched in (bf.PathSchedule("OT", sigma_min=0.05),
                      bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)):
            for t in (0.2, 0.6, 1.0):
                x = rng.standard_normal(2)
                q = sched.candidate(t, x)
                sig, _ = sched.sigma(t)
                consts = []
                for _ in range(3):
                    x1 = rng.standard_normal(2) * 3
                    lp_cond = gauss_logpdf(x, sched.mean(t, x1), sig, 2)
                    lq = gauss_logpdf(x1, q.mean, q.std, 2)
                    consts.append(lp_cond - lq)
                assert max(consts) - min(consts) < 1e-9


class TestPrior:
    def test_ot_prior_is_standard_normal(self):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        rng = np.random.default_rng(8)
        x = sched.prior_sample((10**5, 2), rng)
        cov = np.cov(x.T)
        assert np.all(np.abs(cov - np.eye(2)) < 0.02)

    def test_ve_prior_scale(self):
        sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        rng = np.random.default_rng(9)
        x = sched.prior_sample((10**5, 2), rng)
        np.testing.assert_allclose(x.std(axis=0), 40.0, rtol=0.02)

    def test_empty_dimension(self, rng):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        assert sched.prior_sample((0,), rng).shape == (0,)

    def test_prior_log_density(self):
        sched = bf.PathSchedule("OT", sigma_min=0.05)
        assert sched.prior_log_density(np.zeros(2)) == pytest.approx(-LOG_2PI)
        ve = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=40.0)
        assert ve.prior_log_density(np.zeros(2)) == pytest.approx(-LOG_2PI - 2 * np.log(40.0))
        # d_eff override drops the rank-deficient directions
        assert ve.prior_log_density(np.zeros(8), d_eff=6) == pytest.approx(
            -3 * LOG_2PI - 6 * np.log(40.0))

    def test_train_time_range(self):
        assert bf.PathSchedule("OT", sigma_min=0.05, t_min=0.01).train_time_range() == (0.01, 1.0)
        assert bf.PathSchedule("VE", sigma_min=0.01, sigma_max=2.0).train_time_range() == (0.0, 1.0)
