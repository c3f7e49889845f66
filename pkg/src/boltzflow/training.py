"""The iterated training loop.

Outer steps push fresh flow samples (prior draws integrated 0 -> 1) into the
replay buffer; inner steps regress the network onto Monte Carlo vector-field
targets at points obtained by perturbing buffer endpoints through the
conditional path. Targets are constants: no gradient flows through their
computation. The objective is off-policy, so stale buffer contents are fine.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .buffer import ReplayBuffer
from .energies import EnergyModel, center_configuration, mcmc_reference_sampler
from .errors import TrainingAbortedError, UnsupportedKindError
from .estimator import _estimate_rows
from .metrics import EvalReport, energy_histogram_distance, evaluate_nll, wasserstein2
from .network import AdamState, VectorFieldMLP, adam_step, save_checkpoint
from .ode import OdeConfig, integrate
from .paths import PathSchedule
from .rng import RunStreams
from .tables import append_row, write_matrix

logger = logging.getLogger(__name__)

METRICS_HEADER = ["outer_step", "nll", "w2", "energy_histogram_distance", "n_eval"]
RECORDS_HEADER = ["outer_step", "inner_step", "loss", "mean_ess", "max_weight_frac", "wall_time"]

MAX_CONSECUTIVE_SKIPS = 50


@dataclass(frozen=True)
class TrainConfig:
    n_outer: int = 600
    n_inner: int = 10
    samples_per_outer: int = 512   # B1: endpoints added to the buffer per outer step
    batch_size: int = 256          # B2: training points per inner step
    n_candidates: int = 500        # K: Monte Carlo candidates per training point
    buffer_capacity: int = 10_000
    lr: float = 3e-3
    lr_final_frac: float = 0.1  # linear decay to lr * frac over the run; 1 = flat
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0
    ode: OdeConfig = field(default_factory=lambda: OdeConfig(n_steps=25, scheme="rk4"))
    seed: int = 0
    eval_every: int = 50
    t_range: tuple[float, float] | None = None  # None: taken from the schedule

    def __post_init__(self):
        for name in ("n_outer", "n_inner", "samples_per_outer", "batch_size",
                     "n_candidates", "buffer_capacity", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.t_range is not None:
            lo, hi = self.t_range
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError("t_range must satisfy 0 <= lo < hi <= 1")
        if not 0.0 < self.lr_final_frac <= 1.0:
            raise ValueError("lr_final_frac must lie in (0, 1]")


@dataclass
class TrainRecord:
    outer_step: int
    inner_step: int
    loss: float
    mean_ess: float
    max_weight_frac: float
    wall_time: float


@dataclass
class EvalSettings:
    """Evaluation protocol used during and after training."""

    n_eval: int = 2000
    nll_subset: int = 256          # NLL rows for periodic (non-final) evals
    ode: OdeConfig = field(default_factory=lambda: OdeConfig(n_steps=100, scheme="rk4"))
    mcmc_burnin: int = 20000
    mcmc_step_size: float = 0.3
    mcmc_thin: int = 100


@dataclass
class TrainResult:
    model: VectorFieldMLP
    opt: AdamState
    records: list[TrainRecord]
    reports: list[tuple[int, EvalReport]]
    checkpoints: list[str]
    run_dir: str | None


def outer_step(model: VectorFieldMLP, sched: PathSchedule, buf: ReplayBuffer,
               cfg: TrainConfig, rng) -> int:
    """Draw B1 prior points, integrate them 0 -> 1, push endpoints (centred
    for particle systems) into the buffer. Returns rows pushed."""
    x0 = sched.prior_sample((cfg.samples_per_outer, model.input_dim), rng)
    x1 = integrate(model, x0, 0.0, 1.0, cfg.ode)
    if model.particle_shape is not None:
        x1 = center_configuration(x1, *model.particle_shape)
    return buf.push_batch(x1)


def inner_step(model: VectorFieldMLP, opt: AdamState, sched: PathSchedule,
               energy: EnergyModel, buf: ReplayBuffer, cfg: TrainConfig,
               rng, rng_estimator) -> TrainRecord | None:
    """One gradient step on the squared field-matching error.

    Samples endpoints from the buffer, perturbs them through the path at
    uniform t, estimates the target field, and applies one Adam update.
    Degenerate target rows are dropped (logged); returns None when every
    row degenerated and the step was skipped.
    """
    t_start = time.perf_counter()
    lo, hi = cfg.t_range if cfg.t_range is not None else sched.train_time_range()
    x1 = buf.sample_batch(cfg.batch_size, rng)
    ts = rng.uniform(lo, hi, size=cfg.batch_size)
    xs = sched.sample_conditional(ts, x1, rng)

    row_rngs = rng_estimator.spawn(cfg.batch_size)
    fields, ess, max_w, _, ok = _estimate_rows(
        sched, energy, xs, ts, cfg.n_candidates, row_rngs
    )
    if not np.all(ok):
        logger.warning("inner step dropped %d degenerate rows", int(np.sum(~ok)))
    if not np.any(ok):
        return None
    loss, grads = model.loss_and_gradient(xs[ok], ts[ok], fields[ok])
    adam_step(model, opt, grads)
    return TrainRecord(
        outer_step=-1, inner_step=-1, loss=loss,
        mean_ess=float(np.mean(ess[ok])), max_weight_frac=float(np.mean(max_w[ok])),
        wall_time=time.perf_counter() - t_start,
    )


def _build_eval_dataset(energy: EnergyModel, settings: EvalSettings, rng) -> np.ndarray:
    """Ground-truth rows for evaluation: exact draws when the target supports
    them, otherwise the in-repo Metropolis-Hastings reference chain."""
    try:
        return energy.sample_ground_truth(settings.n_eval, rng)
    except UnsupportedKindError:
        logger.info("generating MCMC reference dataset (n=%d)", settings.n_eval)
        return mcmc_reference_sampler(
            energy, settings.n_eval, n_burnin=settings.mcmc_burnin,
            step_size=settings.mcmc_step_size, thin=settings.mcmc_thin, rng=rng,
        )


def generate_samples(model: VectorFieldMLP, sched: PathSchedule, n: int,
                     ode_cfg: OdeConfig, rng) -> np.ndarray:
    """Sample the flow: prior draws integrated 0 -> 1 (centred for particles)."""
    if n == 0:
        return np.empty((0, model.input_dim))
    x0 = sched.prior_sample((int(n), model.input_dim), rng)
    x1 = integrate(model, x0, 0.0, 1.0, ode_cfg)
    if model.particle_shape is not None:
        x1 = center_configuration(x1, *model.particle_shape)
    return x1


def evaluate_model(model: VectorFieldMLP, sched: PathSchedule, energy: EnergyModel,
                   dataset: np.ndarray, settings: EvalSettings, rng,
                   nll_rows: int | None = None) -> tuple[EvalReport, np.ndarray]:
    """One evaluation pass: sample the flow, W2 + energy-histogram distance
    against the dataset, NLL on (a subset of) the dataset."""
    samples = generate_samples(model, sched, dataset.shape[0], settings.ode, rng)
    w2 = wasserstein2(samples, dataset, rng=rng)
    ehd = energy_histogram_distance(samples, dataset, energy)
    n_nll = dataset.shape[0] if nll_rows is None else min(int(nll_rows), dataset.shape[0])
    d_eff = None
    if model.particle_shape is not None:
        d_eff = model.input_dim - model.particle_shape[1]
    nll = evaluate_nll(model, sched, dataset[:n_nll], settings.ode,
                       d_eff=d_eff, particle_shape=model.particle_shape)
    report = EvalReport(nll=nll, w2=w2, n_eval=dataset.shape[0],
                        energy_histogram_distance=ehd, timestamp=time.time())
    return report, samples


def train(energy: EnergyModel, sched: PathSchedule, cfg: TrainConfig,
          net_kwargs: dict | None = None, run_dir: str | None = None,
          eval_settings: EvalSettings | None = None,
          dump_buffer: bool = False) -> TrainResult:
    """Run the full outer/inner loop.

    Writes ``train_records.csv``, periodic ``metrics.csv`` rows and
    ``samples_step{N}.csv`` dumps, and ``ckpt_{N}.npz`` checkpoints under
    ``run_dir`` when given. Aborts only after more than
    ``MAX_CONSECUTIVE_SKIPS`` consecutively skipped inner steps.
    """
    settings = eval_settings or EvalSettings()
    streams = RunStreams(cfg.seed)
    net_kwargs = dict(net_kwargs or {})
    net_kwargs.setdefault("particle_shape", energy.particle_shape)
    model = VectorFieldMLP(input_dim=energy.dim, rng=streams.init, **net_kwargs)
    opt = AdamState.for_model(model, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
                              eps=cfg.eps, grad_clip=cfg.grad_clip)
    buf = ReplayBuffer(cfg.buffer_capacity, energy.dim)
    eval_dataset = _build_eval_dataset(energy, settings, streams.data)

    out = Path(run_dir) if run_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        records_path = out / "train_records.csv"
        records_path.write_text(",".join(RECORDS_HEADER) + "\n")
        (out / "metrics.csv").write_text(",".join(METRICS_HEADER) + "\n")

    records: list[TrainRecord] = []
    reports: list[tuple[int, EvalReport]] = []
    checkpoints: list[str] = []
    consecutive_skips = 0

    def run_eval(step: int, final: bool):
        nll_rows = None if final else settings.nll_subset
        report, samples = evaluate_model(model, sched, energy, eval_dataset,
                                         settings, streams.eval, nll_rows=nll_rows)
        reports.append((step, report))
        logger.info("eval @ outer %d: nll=%.4f w2=%.4f ehd=%.4f",
                    step, report.nll, report.w2, report.energy_histogram_distance)
        if out is not None:
            # metrics.csv carries no timestamp so reruns are byte-identical
            append_row(out / "metrics.csv", METRICS_HEADER,
                       [step, report.nll, report.w2,
                        report.energy_histogram_distance, report.n_eval])
            write_matrix(out / f"samples_step{step}.csv", samples)
            ckpt = out / f"ckpt_{step}.npz"
            save_checkpoint(ckpt, model, opt)
            checkpoints.append(str(ckpt))

    base_lr = cfg.lr
    for outer in range(1, cfg.n_outer + 1):
        # linear decay tempers late-training oscillation from noisy targets
        progress = (outer - 1) / max(1, cfg.n_outer - 1)
        opt.lr = base_lr * (1.0 - (1.0 - cfg.lr_final_frac) * progress)
        outer_step(model, sched, buf, cfg, streams.buffer)
        for inner in range(1, cfg.n_inner + 1):
            rec = inner_step(model, opt, sched, energy, buf, cfg,
                             streams.batch, streams.estimator)
            if rec is None:
                consecutive_skips += 1
                if consecutive_skips > MAX_CONSECUTIVE_SKIPS:
                    raise TrainingAbortedError(
                        f"{consecutive_skips} consecutive skipped steps"
                    )
                continue
            consecutive_skips = 0
            rec.outer_step, rec.inner_step = outer, inner
            records.append(rec)
            if out is not None:
                append_row(records_path, RECORDS_HEADER,
                           [rec.outer_step, rec.inner_step, rec.loss,
                            rec.mean_ess, rec.max_weight_frac, rec.wall_time])
        if outer % cfg.eval_every == 0 and outer < cfg.n_outer:
            run_eval(outer, final=False)

    run_eval(cfg.n_outer, final=True)
    if out is not None:
        final = out / "ckpt_final.npz"
        save_checkpoint(final, model, opt)
        checkpoints.append(str(final))
        if dump_buffer:
            write_matrix(out / "buffer.csv", buf.view())
    return TrainResult(model=model, opt=opt, records=records, reports=reports,
                       checkpoints=checkpoints, run_dir=str(out) if out else None)
