"""Self-normalized Monte Carlo estimate of the marginal vector field.

Given a point (x, t), draw K endpoint candidates from the candidate law
``q(x1; x, t)`` of the path, weight them by their unnormalized target density
``exp(-E(x1))``, and average the conditional fields:

    U_K(x, t) = sum_i w_i v_t(x | x1_i),   w_i = softmax(-E(x1_1..K))_i.

Weights are computed entirely in the log domain; any constant shift of the
energies cancels, so the intractable normalizer never matters. Diagnostics
(effective sample size, max weight, log normalizer) are always returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energies import EnergyModel, center_configuration
from .errors import DegenerateWeightsError, EstimateError
from .paths import PathSchedule


@dataclass
class MvfEstimate:
    """One vector-field estimate plus importance diagnostics."""

    field: np.ndarray
    ess: float            # 1 / sum w_i^2, in [1, K]
    max_weight: float     # largest normalized weight, in [1/K, 1]
    log_normalizer: float  # logsumexp(-E) - log K


def softmax_weights(neg_energies) -> np.ndarray:
    """Normalized weights exp(a_i - logsumexp(a)) for a_i = -E(x1_i).

    Stable for arbitrarily large energy spreads; raises if every entry is
    -inf (no candidate carries any mass).
    """
    a = np.asarray(neg_energies, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("neg_energies must be a non-empty vector")
    m = np.max(a)
    if not np.isfinite(m):
        raise DegenerateWeightsError("all candidate log densities are -inf")
    shifted = np.exp(a - m)
    lse = m + np.log(np.sum(shifted))
    return np.exp(a - lse)


def _estimate_rows(sched: PathSchedule, model: EnergyModel, xs, ts, n_candidates, rngs):
    """Row-wise estimates, vectorized over the batch.

    Returns (fields, ess, max_w, log_norm, ok) where ok flags rows whose
    weights did not degenerate. Candidate draws come from the per-row
    generators so batching never perturbs the stream assignment.
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    b, d = xs.shape
    k = int(n_candidates)
    if k < 1:
        raise ValueError("n_candidates must be >= 1")

    q = sched.candidate(ts, xs)
    std = np.broadcast_to(np.asarray(q.std, dtype=float), (b,))
    cands = np.empty((b, k, d))
    for i in range(b):
        cands[i] = q.mean[i] + std[i] * rngs[i].standard_normal((k, d))
    if model.particle_shape is not None:
        cands = center_configuration(cands, *model.particle_shape)

    neg_e = -model.energy(cands.reshape(b * k, d)).reshape(b, k)

    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.max(neg_e, axis=1)
        ok = np.isfinite(m)
        m_safe = np.where(ok, m, 0.0)
        shifted = np.exp(neg_e - m_safe[:, None])
        sums = np.sum(shifted, axis=1)
        lse = m_safe + np.log(sums)
        w = np.exp(neg_e - lse[:, None])

        v = sched.conditional_field(ts[:, None], xs[:, None, :], cands)
        fields = np.sum(w[:, :, None] * v, axis=1)
        ess = 1.0 / np.sum(w * w, axis=1)
        max_w = np.max(w, axis=1)
        log_norm = lse - np.log(k)
        ok &= np.all(np.isfinite(fields), axis=1)
    return fields, ess, max_w, log_norm, ok


def estimate_mvf(sched: PathSchedule, model: EnergyModel, x, t, n_candidates,
                 rng) -> MvfEstimate:
    """Estimate the marginal field at a single point (x, t) with K candidates."""
    x = np.asarray(x, dtype=float)
    fields, ess, max_w, log_norm, ok = _estimate_rows(
        sched, model, x[None, :], np.array([float(t)]), n_candidates, [rng]
    )
    if not ok[0]:
        if np.isfinite(log_norm[0]):
            raise EstimateError("non-finite conditional field in the estimate")
        raise DegenerateWeightsError("all candidate log densities are -inf")
    return MvfEstimate(fields[0], float(ess[0]), float(max_w[0]), float(log_norm[0]))


def estimate_mvf_batch(sched: PathSchedule, model: EnergyModel, xs, ts,
                       n_candidates, rng) -> list[MvfEstimate]:
    """Row-wise estimates for a batch; row i uses the i-th child stream
    spawned from ``rng``, so the result equals sequential calls of
    :func:`estimate_mvf` with the same substream assignment.

    Raises with the offending row indices if any row degenerates; callers
    that prefer to drop rows use :func:`_estimate_rows` directly.
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if xs.ndim != 2 or ts.shape != (xs.shape[0],):
        raise ValueError("xs must be (B, d) and ts (B,)")
    if xs.shape[0] == 0:
        return []
    rngs = rng.spawn(xs.shape[0])
    fields, ess, max_w, log_norm, ok = _estimate_rows(
        sched, model, xs, ts, n_candidates, rngs
    )
    if not np.all(ok):
        bad = np.flatnonzero(~ok).tolist()
        raise DegenerateWeightsError(f"degenerate weights in rows {bad}")
    return [
        MvfEstimate(fields[i], float(ess[i]), float(max_w[i]), float(log_norm[i]))
        for i in range(xs.shape[0])
    ]
