"""Shared fixtures. The expensive trained-model fixtures are session-scoped
so the flow/likelihood tests reuse one short training run."""

import numpy as np
import pytest

import boltzflow as bf


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def train_oracle_regression(target, sched, *, dim=2, steps=2000, batch=128,
                            hidden=64, n_hidden=3, lr=1e-3, seed=0):
    """Train a network by direct regression on the closed-form marginal field.

    Draws x ~ p_t by pushing exact target samples through the conditional
    path; this isolates network capacity from estimator noise.
    """
    am = bf.AnalyticMarginal(target=target, sched=sched)
    rng = np.random.default_rng(seed)
    model = bf.VectorFieldMLP(dim, hidden_dim=hidden, n_hidden=n_hidden,
                              time_embed_dim=32, rng=rng)
    opt = bf.AdamState.for_model(model, lr=lr)
    lo, hi = sched.train_time_range()
    losses = []
    for _ in range(steps):
        x1 = target.sample_ground_truth(batch, rng)
        ts = rng.uniform(lo, hi, size=batch)
        xs = sched.sample_conditional(ts, x1, rng)
        targets = np.stack([am.mvf(xs[i], ts[i]) for i in range(batch)])
        loss, grads = model.loss_and_gradient(xs, ts, targets)
        bf.adam_step(model, opt, grads)
        losses.append(loss)
    return model, losses


@pytest.fixture(scope="session")
def trained_std_gaussian_ve():
    """Model regressed to near-zero loss on the StandardGaussian VE field."""
    target = bf.GaussianMixture(np.zeros((1, 2)), 1.0)
    sched = bf.PathSchedule("VE", sigma_min=0.01, sigma_max=8.0)
    model, losses = train_oracle_regression(target, sched, steps=2500, seed=3)
    return model, sched, losses


@pytest.fixture(scope="session")
def small_gmm_setup():
    """A 4-mode mixture at modest separation: cheap but genuinely multimodal."""
    means = np.array([[-6.0, -6.0], [6.0, -6.0], [-6.0, 6.0], [6.0, 6.0]])
    target = bf.GaussianMixture(means, 1.0)
    sched = bf.PathSchedule("OT", sigma_min=0.05)
    return target, sched


@pytest.fixture(scope="session")
def trained_small_gmm(small_gmm_setup):
    """A short real training run on the small mixture (used by flow tests)."""
    target, sched = small_gmm_setup
    cfg = bf.TrainConfig(
        n_outer=60, n_inner=10, samples_per_outer=128, batch_size=128,
        n_candidates=256, buffer_capacity=4000, lr=1e-3, seed=5, eval_every=1000,
        ode=bf.OdeConfig(n_steps=25, scheme="rk4"),
    )
    settings = bf.EvalSettings(n_eval=256, nll_subset=64)
    result = bf.train(target, sched, cfg,
                      net_kwargs=dict(hidden_dim=64, n_hidden=3, time_embed_dim=32),
                      eval_settings=settings)
    return result.model, target, sched
