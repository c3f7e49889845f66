"""Closed-form marginal fields and densities for Gaussian-mixture targets.

For an isotropic mixture target and a Gaussian conditional path, both the
marginal density p_t and the marginal vector field have closed forms:
every component convolves to a Gaussian, and the field is the conditional
field evaluated at the posterior mean of the endpoint. These serve as the
independent ground truth for the Monte Carlo estimator and the flow tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energies import GaussianMixture
from .errors import EstimateError
from .paths import PathSchedule

LOG_2PI = float(np.log(2.0 * np.pi))


def _log_gauss(sq_dist, var, d):
    return -0.5 * sq_dist / var - 0.5 * d * (LOG_2PI + np.log(var))


@dataclass(frozen=True)
class AnalyticMarginal:
    """Exact marginal path quantities for a GaussianMixture target."""

    target: GaussianMixture
    sched: PathSchedule

    def _component_moments(self, t):
        """Per-component marginal mean matrix (M, d) and common variance.

        VE: x = x1 + sigma_t eps  ->  N(mu_i, s_c^2 + sigma_t^2).
        OT: x = t x1 + sigma_t eps -> N(t mu_i, t^2 s_c^2 + sigma_t^2).
        """
        sig, _ = self.sched.sigma(t)
        var_c = self.target.component_variance
        if self.sched.kind == "VE":
            return self.target.means, var_c + sig**2
        return t * self.target.means, t**2 * var_c + sig**2

    def _log_responsibilities(self, X, t):
        means_t, var_t = self._component_moments(t)
        diff = X[:, None, :] - means_t[None, :, :]
        sq = np.sum(diff * diff, axis=2)
        terms = np.log(self.target.weights)[None, :] + _log_gauss(sq, var_t, X.shape[1])
        return terms

    def log_pt(self, x, t):
        """Log of the exact marginal density p_t(x)."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        terms = self._log_responsibilities(X, t)
        m = np.max(terms, axis=1)
        out = m + np.log(np.sum(np.exp(terms - m[:, None]), axis=1))
        return float(out[0]) if np.asarray(x).ndim == 1 else out

    def pt(self, x, t):
        return np.exp(self.log_pt(x, t))

    def posterior_endpoint_mean(self, x, t):
        """E[x1 | x, t]: responsibility-weighted per-component posterior means."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if not np.all(np.isfinite(X)):
            raise EstimateError("non-finite evaluation point")
        var_c = self.target.component_variance
        sig, _ = self.sched.sigma(t)
        terms = self._log_responsibilities(X, t)
        m = np.max(terms, axis=1)
        if not np.all(np.isfinite(m)):
            raise EstimateError("all component responsibilities underflowed (far tail)")
        resp = np.exp(terms - m[:, None])
        resp /= resp.sum(axis=1, keepdims=True)

        if self.sched.kind == "VE":
            # posterior of x1 in component i: precision 1/var_c + 1/sig^2
            shrink = var_c / (var_c + sig**2)
            comp_means = self.target.means[None, :, :] + shrink * (
                X[:, None, :] - self.target.means[None, :, :]
            )
        else:
            prec = 1.0 / var_c + t**2 / sig**2
            comp_means = (
                self.target.means[None, :, :] / var_c + (t / sig**2) * X[:, None, :]
            ) / prec
        out = np.sum(resp[:, :, None] * comp_means, axis=1)
        return out[0] if np.asarray(x).ndim == 1 else out

    def mvf(self, x, t):
        """The exact marginal vector field.

        The conditional field is affine in the endpoint, so the posterior
        average over endpoints equals the conditional field evaluated at the
        posterior endpoint mean.
        """
        x1_bar = self.posterior_endpoint_mean(x, t)
        return self.sched.conditional_field(t, np.asarray(x, dtype=float), x1_bar)


def quadrature_mvf_1d(target: GaussianMixture, sched: PathSchedule, x: float,
                      t: float, n_points: int = 10001, span: float = 12.0):
    """Brute-force trapezoid evaluation of the marginal field in d=1.

    Integrates ``v_t(x|x1) p_t(x|x1) p1(x1)`` over an endpoint grid wide
    enough to cover both the target support and the candidate law, entirely
    independent of the closed form above.
    """
    if target.dim != 1:
        raise ValueError("quadrature oracle is 1-D only")
    q = sched.candidate(t, np.array([x]))
    sd_c = np.sqrt(target.component_variance)
    lo = min(target.means.min() - span * sd_c, float(q.mean[0]) - span * float(q.std))
    hi = max(target.means.max() + span * sd_c, float(q.mean[0]) + span * float(q.std))
    grid = np.linspace(lo, hi, int(n_points))

    sig, _ = sched.sigma(t)
    mu_t = sched.mean(t, grid[:, None])[:, 0]
    log_cond = _log_gauss((x - mu_t) ** 2, sig**2, 1)
    log_p1 = -target.energy(grid[:, None])
    log_w = log_cond + log_p1
    w = np.exp(log_w - np.max(log_w))
    v = sched.conditional_field(t, np.array([x]), grid[:, None])[:, 0]
    num = np.trapezoid(w * v, grid)
    den = np.trapezoid(w, grid)
    return num / den
