"""Command-line interface tying the library into reproducible experiments.

Subcommands: train, sample, evaluate, check-estimator, mcmc-reference,
report. Every run writes its fully resolved config before doing anything
else and drops a ``DONE`` marker on success, so crashed runs are
distinguishable. Exit codes: 0 success, 2 config, 3 missing file/checkpoint,
4 numeric failure, 5 evaluation failure, 1 unexpected.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analytic import AnalyticMarginal
from .energies import GaussianMixture, StandardGaussian, mcmc_reference_sampler
from .errors import (
    BoltzflowError,
    CheckpointError,
    ConfigError,
    EvaluationError,
    NumericError,
    UnsupportedKindError,
)
from .estimator import estimate_mvf
from .metrics import evaluate_nll, energy_histogram_distance, wasserstein2
from .network import load_checkpoint
from .ode import OdeConfig, integrate
from .rng import substream
from .tables import append_row, read_matrix, write_matrix, write_trajectories
from .training import METRICS_HEADER, generate_samples, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERIC = 4
EXIT_EVAL = 5

CHECK_ESTIMATOR_RADII = (1.0, 1.5, 2.0, 2.5, 3.0)
CHECK_ESTIMATOR_TIMES = (0.3, 0.35, 0.4, 0.45, 0.5)
CHECK_ESTIMATOR_K = (10, 100, 1000, 10000)


def _load_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfgmod.replace_config(cfg, seed=args.seed)
    if getattr(args, "run_dir", None):
        cfg = cfgmod.replace_config(cfg, run_dir=args.run_dir)
    return cfg


def _prepare_run_dir(cfg) -> Path:
    run_dir = Path(cfgmod.default_run_dir(cfg))
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "resolved_config").write_text(cfgmod.render_config(cfg))
    done = run_dir / "DONE"
    if done.exists():
        done.unlink()
    return run_dir


def _finish(run_dir: Path) -> None:
    (run_dir / "DONE").write_text("done\n")


def cmd_train(args) -> int:
    cfg = _load_config(args)
    run_dir = _prepare_run_dir(cfg)
    energy = cfgmod.build_energy(cfg)
    sched = cfgmod.build_schedule(cfg)
    result = train(
        energy, sched, cfgmod.build_train_config(cfg),
        net_kwargs=cfgmod.build_net_kwargs(cfg), run_dir=str(run_dir),
        eval_settings=cfgmod.build_eval_settings(cfg), dump_buffer=args.dump_buffer,
    )
    final = result.reports[-1][1]
    logger.info("final: nll=%.4f w2=%.4f", final.nll, final.w2)
    _finish(run_dir)
    print(run_dir)
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    model, _ = load_checkpoint(args.checkpoint)
    sched = cfgmod.build_schedule(cfg)
    run_dir = Path(args.run_dir or ".")
    run_dir.mkdir(parents=True, exist_ok=True)
    rng = substream(cfg.seed, "eval")
    ode_cfg = OdeConfig(n_steps=cfg.metrics_ode_steps, scheme=cfg.metrics_ode_scheme,
                        record_trajectory=args.trajectories)
    n = int(args.n)
    if n == 0:
        write_matrix(run_dir / "samples.csv", np.empty((0, model.input_dim)))
        return EXIT_OK
    if args.trajectories:
        x0 = sched.prior_sample((n, model.input_dim), rng)
        x1, times, states = integrate(model, x0, 0.0, 1.0, ode_cfg)
        write_trajectories(run_dir / "trajectories.csv", times, np.swapaxes(states, 0, 1))
        samples = x1
    else:
        samples = generate_samples(model, sched, n, ode_cfg, rng)
    write_matrix(run_dir / "samples.csv", samples)
    print(run_dir / "samples.csv")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    model, opt = load_checkpoint(args.checkpoint)
    energy = cfgmod.build_energy(cfg)
    sched = cfgmod.build_schedule(cfg)
    dataset = read_matrix(args.dataset)
    if dataset.shape[0] == 0:
        raise EvaluationError(f"dataset {args.dataset} has no rows")
    run_dir = Path(args.run_dir or ".")
    run_dir.mkdir(parents=True, exist_ok=True)
    rng = substream(cfg.seed, "eval")
    ode_cfg = OdeConfig(n_steps=cfg.metrics_ode_steps, scheme=cfg.metrics_ode_scheme)
    samples = generate_samples(model, sched, dataset.shape[0], ode_cfg, rng)
    w2 = wasserstein2(samples, dataset, rng=rng)
    ehd = energy_histogram_distance(samples, dataset, energy)
    d_eff = None
    if model.particle_shape is not None:
        d_eff = model.input_dim - model.particle_shape[1]
    nll = evaluate_nll(model, sched, dataset, ode_cfg, d_eff=d_eff,
                       particle_shape=model.particle_shape)
    step = opt.step if opt is not None else -1
    append_row(run_dir / "metrics.csv", METRICS_HEADER,
               [step, nll, w2, ehd, dataset.shape[0]])
    print(f"nll={nll!r} w2={w2!r} energy_histogram_distance={ehd!r}")
    return EXIT_OK


def cmd_check_estimator(args) -> int:
    cfg = _load_config(args)
    energy = cfgmod.build_energy(cfg)
    sched = cfgmod.build_schedule(cfg)
    if isinstance(energy, StandardGaussian):
        target = GaussianMixture(np.zeros((1, energy.dim)), component_variance=1.0)
    elif isinstance(energy, GaussianMixture):
        target = energy
    else:
        raise ConfigError("check-estimator needs a Gaussian target (closed-form oracle)")
    oracle = AnalyticMarginal(target=target, sched=sched)
    rng = substream(cfg.seed, "estimator")
    run_dir = Path(args.run_dir or ".")
    run_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in CHECK_ESTIMATOR_RADII:
        x = np.zeros(energy.dim)
        x[0] = r
        for t in CHECK_ESTIMATOR_TIMES:
            truth = oracle.mvf(x, t)
            scale = float(np.linalg.norm(truth))
            for k in CHECK_ESTIMATOR_K:
                est = estimate_mvf(sched, energy, x, t, k, rng)
                err = float(np.linalg.norm(est.field - truth)) / max(scale, 1e-12)
                rows.append(list(x) + [t, k, err, est.ess])
    header = [f"x_{j}" for j in range(energy.dim)] + ["t", "k", "rel_error", "ess"]
    out = run_dir / "estimator_check.csv"
    with open(out, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(out)
    return EXIT_OK


def cmd_mcmc_reference(args) -> int:
    cfg = _load_config(args)
    energy = cfgmod.build_energy(cfg)
    rng = substream(cfg.seed, "data")
    run_dir = Path(args.run_dir or ".")
    run_dir.mkdir(parents=True, exist_ok=True)
    samples = mcmc_reference_sampler(
        energy, int(args.n), n_burnin=cfg.metrics_mcmc_burnin,
        step_size=cfg.metrics_mcmc_step_size, thin=cfg.metrics_mcmc_thin, rng=rng,
    )
    out = run_dir / "reference.csv"
    write_matrix(out, samples)
    print(out)
    return EXIT_OK


def cmd_ground_truth(args) -> int:
    cfg = _load_config(args)
    energy = cfgmod.build_energy(cfg)
    rng = substream(cfg.seed, "data")
    run_dir = Path(args.run_dir or ".")
    run_dir.mkdir(parents=True, exist_ok=True)
    samples = energy.sample_ground_truth(int(args.n), rng)
    out = run_dir / "dataset.csv"
    write_matrix(out, samples)
    print(out)
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_run_report

    for path in render_run_report(args.run_dir or "."):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boltzflow",
        description="Train and evaluate flow samplers for Boltzmann densities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False, n=False):
        p.add_argument("--config", default=None, help="config file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--run-dir", default=None, help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="model checkpoint (.npz)")
        if n:
            p.add_argument("--n", type=int, required=True, help="number of samples")

    p = sub.add_parser("train", help="run the full training loop")
    common(p)
    p.add_argument("--dump-buffer", action="store_true", help="snapshot the replay buffer to CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw samples from a checkpoint")
    common(p, checkpoint=True, n=True)
    p.add_argument("--trajectories", action="store_true", help="also dump ODE trajectories")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint against a dataset CSV")
    common(p, checkpoint=True)
    p.add_argument("--dataset", required=True, help="dataset CSV (columns x_0..x_{d-1})")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check-estimator", help="estimator-vs-oracle error grid")
    common(p)
    p.set_defaults(func=cmd_check_estimator)

    p = sub.add_parser("mcmc-reference", help="generate the MCMC reference dataset")
    common(p, n=True)
    p.set_defaults(func=cmd_mcmc_reference)

    p = sub.add_parser("ground-truth", help="dump exact target samples to CSV")
    common(p, n=True)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("report", help="render figures from a run directory")
    p.add_argument("--run-dir", default=None, help="run directory to read")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnsupportedKindError) as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except (FileNotFoundError, CheckpointError) as exc:
        logger.error("missing input: %s", exc)
        return EXIT_MISSING
    except NumericError as exc:
        logger.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except EvaluationError as exc:
        logger.error("evaluation failed: %s", exc)
        return EXIT_EVAL
    except BoltzflowError as exc:
        logger.error("%s", exc)
        return EXIT_UNEXPECTED


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
