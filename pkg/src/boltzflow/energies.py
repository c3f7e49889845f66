"""Target Boltzmann densities defined through their energy functions.

A target is ``mu(x) = exp(-E(x)) / Z`` with Z intractable; everything here
works with E alone. The Gaussian targets also expose exact samplers for
evaluation, the particle target relies on the Metropolis-Hastings reference
chain below.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import DimensionError, SamplerInitError, UnsupportedKindError

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))

# Row-chunk sizes keeping batched-energy temporaries cache-resident.
_GMM_CHUNK = 4096
_DW4_CHUNK = 32768


def _as_batch(x, dim):
    """Coerce x to a (B, dim) float array; return it plus a was-single flag."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise DimensionError(f"expected length {dim}, got {x.shape[0]}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != dim:
            raise DimensionError(f"expected row length {dim}, got {x.shape[1]}")
        return x, False
    raise DimensionError(f"expected 1-D or 2-D input, got shape {x.shape}")


def center_configuration(x, n_particles: int, space_dim: int):
    """Remove the centre of mass from flat particle configurations.

    Accepts a single configuration of length ``n_particles * space_dim`` or
    any batch with that trailing axis. Energy of translation-invariant
    targets is unchanged by this map, and it is idempotent.
    """
    x = np.asarray(x, dtype=float)
    d = n_particles * space_dim
    if x.shape[-1] != d:
        raise DimensionError(f"expected trailing axis {d}, got {x.shape[-1]}")
    parts = x.reshape(x.shape[:-1] + (n_particles, space_dim))
    centered = parts - parts.mean(axis=-2, keepdims=True)
    return centered.reshape(x.shape)


class EnergyModel:
    """Base class: immutable after construction, safe for concurrent reads."""

    kind: str = "abstract"
    dim: int = 0
    #: (n_particles, space_dim) for particle systems, else None.
    particle_shape: tuple[int, int] | None = None

    def energy(self, x):
        raise NotImplementedError

    def log_unnormalized_density(self, x):
        """-E(x); the normalizer Z is never evaluated."""
        return -self.energy(x)

    def sample_ground_truth(self, n, rng):
        raise UnsupportedKindError(
            f"{self.kind} has no exact sampler; use mcmc_reference_sampler"
        )


class StandardGaussian(EnergyModel):
    """E(x) = ||x||^2/2 + (d/2) log(2*pi), i.e. the negative N(0, I) log-pdf."""

    kind = "StandardGaussian"

    def __init__(self, dim: int = 2):
        if dim < 1:
            raise DimensionError("dim must be >= 1")
        self.dim = int(dim)

    def energy(self, x):
        X, single = _as_batch(x, self.dim)
        e = 0.5 * np.sum(X * X, axis=1) + 0.5 * self.dim * LOG_2PI
        return float(e[0]) if single else e

    def sample_ground_truth(self, n, rng):
        return rng.standard_normal((int(n), self.dim))


class GaussianMixture(EnergyModel):
    """Isotropic Gaussian mixture; E(x) = -log sum_i w_i N(x; mu_i, s^2 I).

    All density work happens in the log domain: mode separations of tens of
    units make raw densities underflow.
    """

    kind = "GaussianMixture"

    def __init__(self, means, component_variance: float = 1.0, weights=None):
        means = np.asarray(means, dtype=float)
        if means.ndim != 2 or means.shape[0] < 1:
            raise DimensionError("means must be a (n_modes, dim) matrix")
        if component_variance <= 0:
            raise ValueError("component_variance must be positive")
        n_modes = means.shape[0]
        if weights is None:
            weights = np.full(n_modes, 1.0 / n_modes)
        else:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (n_modes,):
                raise DimensionError("weights must match the number of means")
            if np.any(weights <= 0):
                raise ValueError("mixture weights must be positive")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("mixture weights must sum to 1 within 1e-12")
        self.means = means
        self.component_variance = float(component_variance)
        self.weights = weights
        self.dim = means.shape[1]
        self._log_weights = np.log(weights)
        self._log_norm = 0.5 * self.dim * (LOG_2PI + np.log(self.component_variance))
        self._means_sq = np.sum(means * means, axis=1)

    def _log_component_terms(self, X):
        """(B, n_modes) matrix of log w_i + log N(x; mu_i, s^2 I).

        Squared distances via the Gram expansion (BLAS-backed); the ~1e-12
        absolute rounding it carries is negligible against 1e-9-scale checks.
        """
        terms = X @ (self.means.T / self.component_variance)
        sq_x = np.einsum("ij,ij->i", X, X)
        terms -= (0.5 / self.component_variance) * sq_x[:, None]
        terms += self._log_weights - self._log_norm \
            - (0.5 / self.component_variance) * self._means_sq
        return terms

    def energy(self, x):
        # chunked so the (chunk, n_modes) temporaries stay cache-resident
        X, single = _as_batch(x, self.dim)
        n = X.shape[0]
        if n <= _GMM_CHUNK:
            out = self._neg_logsumexp(self._log_component_terms(X))
        else:
            out = np.empty(n)
            for lo in range(0, n, _GMM_CHUNK):
                chunk = X[lo : lo + _GMM_CHUNK]
                out[lo : lo + chunk.shape[0]] = self._neg_logsumexp(
                    self._log_component_terms(chunk)
                )
        return float(out[0]) if single else out

    @staticmethod
    def _neg_logsumexp(terms):
        m = np.max(terms, axis=1)
        terms -= m[:, None]
        np.exp(terms, out=terms)
        return -(m + np.log(np.sum(terms, axis=1)))

    def sample_ground_truth(self, n, rng):
        n = int(n)
        comps = rng.choice(self.means.shape[0], size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[comps] + np.sqrt(self.component_variance) * noise


class DoubleWell4(EnergyModel):
    """Four particles in the plane with a double-well pair potential.

    E(x) = 1/(2*tau) * sum_{i<j} [a*(d_ij - d0) + b*(d_ij - d0)^2 + c*(d_ij - d0)^4]

    over the 6 particle pairs. Invariant under global translation and under
    particle permutation; its density is therefore improper on R^8 and all
    consumers operate in the zero-centre-of-mass subspace.
    """

    kind = "DoubleWell4"
    particle_shape = (4, 2)

    def __init__(self, a: float = 0.0, b: float = -4.0, c: float = 0.9,
                 d0: float = 4.0, temperature: float = 1.0):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.d0 = float(d0)
        self.temperature = float(temperature)
        self.n_particles, self.space_dim = self.particle_shape
        self.dim = self.n_particles * self.space_dim
        self._iu = np.triu_indices(self.n_particles, k=1)

    def pair_term(self, r):
        """Bracket value a*(r-d0) + b*(r-d0)^2 + c*(r-d0)^4 for pair distance r."""
        delta = np.asarray(r, dtype=float) - self.d0
        return self.a * delta + self.b * delta**2 + self.c * delta**4

    def pairwise_distances(self, x):
        """The 6 pair distances; (6,) for a single configuration, (B, 6) for a batch."""
        X, single = _as_batch(x, self.dim)
        parts = X.reshape(-1, self.n_particles, self.space_dim)
        diff = parts[:, self._iu[0], :] - parts[:, self._iu[1], :]
        dists = np.sqrt(np.sum(diff * diff, axis=2))
        return dists[0] if single else dists

    def energy(self, x):
        X, single = _as_batch(x, self.dim)
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], _DW4_CHUNK):
            dists = self.pairwise_distances(X[lo : lo + _DW4_CHUNK])
            out[lo : lo + _DW4_CHUNK] = np.sum(self.pair_term(dists), axis=1) / (2.0 * self.temperature)
        return float(out[0]) if single else out


def make_gmm_benchmark(n_modes: int = 40, loc_range: float = 40.0,
                       component_variance: float = 1.0, dim: int = 2,
                       layout_seed: int = 0) -> GaussianMixture:
    """The 40-mode benchmark mixture: means uniform on [-loc_range, loc_range]^dim,
    uniform weights, isotropic unit variance. The layout seed is part of the
    experiment config so every run sees the same target."""
    rng = np.random.default_rng(layout_seed)
    means = rng.uniform(-loc_range, loc_range, size=(int(n_modes), int(dim)))
    return GaussianMixture(means, component_variance=component_variance)


def mcmc_reference_sampler(model: EnergyModel, n: int, n_burnin: int,
                           step_size: float, thin: int, rng,
                           x0=None) -> np.ndarray:
    """Random-walk Metropolis-Hastings chain targeting exp(-E).

    Proposals are isotropic Gaussian with scale ``step_size``. Emits ``n``
    rows taken every ``thin`` accepted-or-rejected steps after ``n_burnin``
    warm-up steps. For particle targets every emitted configuration is
    centred. The acceptance rate is logged; tune step_size to land in the
    20-40% band.
    """
    n, n_burnin, thin = int(n), int(n_burnin), max(1, int(thin))
    if x0 is None:
        x0 = np.zeros(model.dim)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.dim,):
        raise DimensionError(f"x0 must have shape ({model.dim},)")
    e = model.energy(x)
    if not np.isfinite(e):
        raise SamplerInitError(f"energy at the initial point is {e}")

    out = np.empty((n, model.dim))
    n_accept = 0
    total = n_burnin + n * thin
    for k in range(total):
        prop = x + step_size * rng.standard_normal(model.dim)
        e_prop = model.energy(prop)
        if np.log(rng.uniform()) < e - e_prop:
            x, e = prop, e_prop
            n_accept += 1
        if k >= n_burnin and (k - n_burnin) % thin == thin - 1:
            i = (k - n_burnin) // thin
            if i < n:
                out[i] = x
    if total > 0:
        logger.info("MH chain: %d steps, acceptance rate %.3f", total, n_accept / total)
    if model.particle_shape is not None:
        out = center_configuration(out, *model.particle_shape)
    return out
