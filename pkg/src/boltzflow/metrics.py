"""Evaluation metrics: exact 2-Wasserstein, dataset NLL, energy-histogram W1."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .energies import EnergyModel, center_configuration
from .errors import EvaluationError, OdeDivergenceError
from .ode import OdeConfig, log_likelihood_batch
from .paths import PathSchedule

logger = logging.getLogger(__name__)

EXACT_ASSIGNMENT_LIMIT = 2048


@dataclass
class EvalReport:
    nll: float
    w2: float
    n_eval: int
    energy_histogram_distance: float
    timestamp: float


def wasserstein2(a, b, rng=None, exact_limit: int = EXACT_ASSIGNMENT_LIMIT) -> float:
    """W2 between equal-size point clouds under the cost-minimizing pairing:
    sqrt(mean_i ||a_i - b_pi(i)||^2).

    Unequal counts: the larger cloud is subsampled uniformly (logged). Counts
    above ``exact_limit``: both clouds are shuffled and matched in chunks,
    an upper-bound approximation (logged); below the limit the assignment is
    exact.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("point clouds must be (n, d) with matching d")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("point clouds must be non-empty")
    if rng is None:
        rng = np.random.default_rng(0)
    if a.shape[0] != b.shape[0]:
        n = min(a.shape[0], b.shape[0])
        logger.warning("wasserstein2: subsampling %d -> %d rows", max(a.shape[0], b.shape[0]), n)
        if a.shape[0] > n:
            a = a[rng.choice(a.shape[0], size=n, replace=False)]
        else:
            b = b[rng.choice(b.shape[0], size=n, replace=False)]
    n = a.shape[0]
    if n <= exact_limit:
        cost = cdist(a, b, metric="sqeuclidean")
        rows, cols = linear_sum_assignment(cost)
        return float(np.sqrt(cost[rows, cols].mean()))
    logger.warning("wasserstein2: n=%d > %d, using chunked approximate matching", n, exact_limit)
    pa = rng.permutation(n)
    pb = rng.permutation(n)
    total = 0.0
    for lo in range(0, n, exact_limit):
        ca = a[pa[lo : lo + exact_limit]]
        cb = b[pb[lo : lo + exact_limit]]
        cost = cdist(ca, cb, metric="sqeuclidean")
        rows, cols = linear_sum_assignment(cost)
        total += float(cost[rows, cols].sum())
    return float(np.sqrt(total / n))


def evaluate_nll(field, sched: PathSchedule, dataset, cfg: OdeConfig,
                 d_eff: int | None = None, particle_shape=None,
                 max_failure_frac: float = 0.05, chunk: int = 512) -> float:
    """Mean negative log-likelihood of a dataset under the flow.

    Rows whose likelihood solve diverges or comes back non-finite are dropped
    and counted; more than ``max_failure_frac`` failures aborts the
    evaluation. Invariant to row order up to float summation.
    """
    X = np.asarray(dataset, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("dataset must be a non-empty (n, d) matrix")
    if particle_shape is not None:
        X = center_configuration(X, *particle_shape)
    logps = []
    n_failed = 0
    for lo in range(0, X.shape[0], chunk):
        block = X[lo : lo + chunk]
        try:
            lp, _, _ = log_likelihood_batch(field, block, sched, cfg, d_eff=d_eff)
        except OdeDivergenceError:
            lp = np.full(block.shape[0], np.nan)
            for j in range(block.shape[0]):
                try:
                    row_lp, _, _ = log_likelihood_batch(field, block[j : j + 1], sched, cfg, d_eff=d_eff)
                    lp[j] = row_lp[0]
                except OdeDivergenceError:
                    pass
        bad = ~np.isfinite(lp)
        n_failed += int(bad.sum())
        logps.append(lp[~bad])
    logps = np.concatenate(logps) if logps else np.empty(0)
    n_total = X.shape[0]
    if n_failed > max_failure_frac * n_total or logps.size == 0:
        raise EvaluationError(f"{n_failed}/{n_total} likelihood evaluations failed")
    if n_failed:
        logger.warning("evaluate_nll: dropped %d/%d failed rows", n_failed, n_total)
    return float(-np.mean(logps))


def energy_histogram_distance(samples_a, samples_b, model: EnergyModel,
                              n_bins: int | None = None) -> float:
    """1-D Wasserstein-1 distance between the energy values of two sample sets.

    Equal-size sets use exact sorted matching (= optimal assignment under
    absolute cost). Unequal sizes compare empirical quantile functions on a
    midpoint grid of ``n_bins`` points (default: the larger sample count).
    """
    ea = np.sort(np.asarray(model.energy(np.asarray(samples_a, dtype=float))).ravel())
    eb = np.sort(np.asarray(model.energy(np.asarray(samples_b, dtype=float))).ravel())
    if ea.size == 0 or eb.size == 0:
        raise ValueError("sample sets must be non-empty")
    if ea.size == eb.size:
        return float(np.mean(np.abs(ea - eb)))
    m = int(n_bins) if n_bins else max(ea.size, eb.size)
    u = (np.arange(m) + 0.5) / m
    qa = np.quantile(ea, u, method="inverted_cdf")
    qb = np.quantile(eb, u, method="inverted_cdf")
    return float(np.mean(np.abs(qa - qb)))
