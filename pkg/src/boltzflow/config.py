"""Experiment configuration: a flat human-readable key-value file.

Format: one ``section.key = value`` per line, ``#`` comment lines, blank
lines ignored. Unknown keys are rejected. Every default is materialized at
parse time (some defaults depend on other keys, e.g. the candidate count and
noise ceiling differ between targets) and the resolved config is echoed back
into the run directory, so ``parse(render(cfg)) == cfg`` always holds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

from .energies import DoubleWell4, EnergyModel, GaussianMixture, StandardGaussian, make_gmm_benchmark
from .errors import ConfigError
from .network import ACTIVATIONS
from .ode import OdeConfig
from .paths import PathSchedule
from .training import EvalSettings, TrainConfig

_ENERGY_KINDS = ("GaussianMixture", "DoubleWell4", "StandardGaussian")
_PATH_KINDS = {"OT": "OT", "OPTIMALTRANSPORT": "OT", "VE": "VE", "VARIANCEEXPLODING": "VE"}
_SCHEMES = ("rk4", "euler")

_DERIVED = object()  # sentinel: default depends on other keys


def _parse_int(s):
    return int(s, 10)


def _parse_float(s):
    return float(s)


def _parse_str(s):
    return s


class _Spec:
    def __init__(self, parse, default, render=str):
        self.parse = parse
        self.default = default
        self.render = render


def _choice(options):
    def parse(s):
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _path_kind(s):
    kind = _PATH_KINDS.get(s.replace("-", "").upper())
    if kind is None:
        raise ValueError("must be OT or VE")
    return kind


# Key order here is the canonical render order.
SCHEMA: dict[str, _Spec] = {
    "seed": _Spec(_parse_int, 0),
    "run_dir": _Spec(_parse_str, ""),
    "energy.kind": _Spec(_choice(_ENERGY_KINDS), "GaussianMixture"),
    "energy.dim": _Spec(_parse_int, _DERIVED),
    "energy.n_modes": _Spec(_parse_int, 40),
    "energy.loc_range": _Spec(_parse_float, 40.0, repr),
    "energy.component_variance": _Spec(_parse_float, 1.0, repr),
    "energy.layout_seed": _Spec(_parse_int, 0),
    "energy.dw_a": _Spec(_parse_float, 0.0, repr),
    "energy.dw_b": _Spec(_parse_float, -4.0, repr),
    "energy.dw_c": _Spec(_parse_float, 0.9, repr),
    "energy.dw_d0": _Spec(_parse_float, 4.0, repr),
    "energy.temperature": _Spec(_parse_float, 1.0, repr),
    "path.kind": _Spec(_path_kind, "OT"),
    "path.sigma_min": _Spec(_parse_float, _DERIVED, repr),
    "path.sigma_max": _Spec(_parse_float, _DERIVED, repr),
    "path.t_min": _Spec(_parse_float, 0.01, repr),
    "net.hidden_dim": _Spec(_parse_int, 128),
    "net.n_hidden": _Spec(_parse_int, 4),
    "net.time_embed_dim": _Spec(_parse_int, 64),
    "net.activation": _Spec(_choice(tuple(ACTIVATIONS)), "gelu"),
    "train.n_outer": _Spec(_parse_int, 600),
    "train.n_inner": _Spec(_parse_int, 10),
    "train.samples_per_outer": _Spec(_parse_int, 512),
    "train.batch_size": _Spec(_parse_int, 256),
    "train.n_candidates": _Spec(_parse_int, _DERIVED),
    "train.buffer_capacity": _Spec(_parse_int, 10_000),
    "train.lr": _Spec(_parse_float, 3e-3, repr),
    "train.lr_final_frac": _Spec(_parse_float, 0.1, repr),
    "train.beta1": _Spec(_parse_float, 0.9, repr),
    "train.beta2": _Spec(_parse_float, 0.999, repr),
    "train.eps": _Spec(_parse_float, 1e-8, repr),
    "train.grad_clip": _Spec(_parse_float, 1.0, repr),
    "train.ode_steps": _Spec(_parse_int, 25),
    "train.ode_scheme": _Spec(_choice(_SCHEMES), "rk4"),
    "train.eval_every": _Spec(_parse_int, 50),
    "metrics.n_eval": _Spec(_parse_int, 2000),
    "metrics.nll_subset": _Spec(_parse_int, 256),
    "metrics.ode_steps": _Spec(_parse_int, 100),
    "metrics.ode_scheme": _Spec(_choice(_SCHEMES), "rk4"),
    "metrics.mcmc_burnin": _Spec(_parse_int, 20000),
    "metrics.mcmc_step_size": _Spec(_parse_float, 0.3, repr),
    "metrics.mcmc_thin": _Spec(_parse_int, 100),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment config; attribute names are keys with '.' -> '_'."""

    seed: int
    run_dir: str
    energy_kind: str
    energy_dim: int
    energy_n_modes: int
    energy_loc_range: float
    energy_component_variance: float
    energy_layout_seed: int
    energy_dw_a: float
    energy_dw_b: float
    energy_dw_c: float
    energy_dw_d0: float
    energy_temperature: float
    path_kind: str
    path_sigma_min: float
    path_sigma_max: float
    path_t_min: float
    net_hidden_dim: int
    net_n_hidden: int
    net_time_embed_dim: int
    net_activation: str
    train_n_outer: int
    train_n_inner: int
    train_samples_per_outer: int
    train_batch_size: int
    train_n_candidates: int
    train_buffer_capacity: int
    train_lr: float
    train_lr_final_frac: float
    train_beta1: float
    train_beta2: float
    train_eps: float
    train_grad_clip: float
    train_ode_steps: int
    train_ode_scheme: str
    train_eval_every: int
    metrics_n_eval: int
    metrics_nll_subset: int
    metrics_ode_steps: int
    metrics_ode_scheme: str
    metrics_mcmc_burnin: int
    metrics_mcmc_step_size: float
    metrics_mcmc_thin: int


def _attr(key: str) -> str:
    return key.replace(".", "_")


def _resolve_derived(values: dict) -> None:
    """Materialize defaults that depend on other keys."""
    is_dw4 = values["energy.kind"] == "DoubleWell4"
    if values["energy.dim"] is _DERIVED:
        values["energy.dim"] = 8 if is_dw4 else 2
    if values["path.sigma_min"] is _DERIVED:
        values["path.sigma_min"] = 0.05 if values["path.kind"] == "OT" else 0.01
    if values["path.sigma_max"] is _DERIVED:
        values["path.sigma_max"] = 3.0 if is_dw4 else 40.0
    if values["train.n_candidates"] is _DERIVED:
        values["train.n_candidates"] = 1000 if is_dw4 else 500


def _validate(values: dict) -> None:
    def bad(key, why):
        raise ConfigError(f"constraint violation for {key}: {why}")

    def positive(key):
        if values[key] <= 0:
            bad(key, "must be positive")

    def at_least_one(key):
        if values[key] < 1:
            bad(key, "must be >= 1")

    for key in ("energy.dim", "energy.n_modes", "net.hidden_dim",
                "train.n_outer", "train.n_inner", "train.samples_per_outer",
                "train.batch_size", "train.n_candidates", "train.buffer_capacity",
                "train.ode_steps", "train.eval_every", "metrics.n_eval",
                "metrics.nll_subset", "metrics.ode_steps", "metrics.mcmc_thin"):
        at_least_one(key)
    for key in ("energy.loc_range", "energy.component_variance",
                "energy.temperature", "train.lr", "train.eps",
                "metrics.mcmc_step_size"):
        positive(key)
    if values["net.n_hidden"] < 0:
        bad("net.n_hidden", "must be >= 0")
    if values["net.time_embed_dim"] < 2 or values["net.time_embed_dim"] % 2:
        bad("net.time_embed_dim", "must be a positive even integer")
    if values["train.grad_clip"] < 0:
        bad("train.grad_clip", "must be >= 0 (0 disables clipping)")
    if not 0.0 < values["train.lr_final_frac"] <= 1.0:
        bad("train.lr_final_frac", "must lie in (0, 1]")
    if values["train.beta1"] < 0 or values["train.beta1"] >= 1:
        bad("train.beta1", "must lie in [0, 1)")
    if values["train.beta2"] < 0 or values["train.beta2"] >= 1:
        bad("train.beta2", "must lie in [0, 1)")
    if values["metrics.mcmc_burnin"] < 0:
        bad("metrics.mcmc_burnin", "must be >= 0")
    if not 0.0 < values["path.t_min"] < 0.5:
        bad("path.t_min", "must lie in (0, 0.5)")
    if values["path.kind"] == "OT":
        if not 0.0 <= values["path.sigma_min"] < 1.0:
            bad("path.sigma_min", "OT terminal scale must lie in [0, 1)")
    else:
        if values["path.sigma_min"] <= 0:
            bad("path.sigma_min", "VE noise floor must be positive")
        if values["path.sigma_max"] <= values["path.sigma_min"]:
            bad("path.sigma_max", "VE needs sigma_max > sigma_min")
    if values["energy.kind"] == "DoubleWell4" and values["energy.dim"] != 8:
        bad("energy.dim", "DoubleWell4 is fixed at 4 particles x 2 dims = 8")


def parse_config(source: str | Path | None = None, text: str | None = None) -> ExperimentConfig:
    """Parse a config file (or literal text) into a fully resolved config.

    Errors carry the offending key and line number.
    """
    if text is None:
        if source is None:
            text = ""
        else:
            path = Path(source)
            if not path.exists():
                raise FileNotFoundError(str(path))
            text = path.read_text()

    values = {key: spec.default for key, spec in SCHEMA.items()}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip().strip("'\"")
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = SCHEMA[key].parse(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: invalid value for {key}: {exc}")
    _resolve_derived(values)
    _validate(values)
    return ExperimentConfig(**{_attr(k): v for k, v in values.items()})


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parsing it back reproduces ``cfg`` exactly."""
    lines = []
    for key, spec in SCHEMA.items():
        lines.append(f"{key} = {spec.render(getattr(cfg, _attr(key)))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of everything except seed and run_dir, for run-directory naming."""
    lines = [
        f"{key} = {spec.render(getattr(cfg, _attr(key)))}"
        for key, spec in SCHEMA.items()
        if key not in ("seed", "run_dir")
    ]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:10]


def default_run_dir(cfg: ExperimentConfig) -> str:
    return cfg.run_dir or f"runs/{config_hash(cfg)}_seed{cfg.seed}"


# -- builders ------------------------------------------------------------------


def build_energy(cfg: ExperimentConfig) -> EnergyModel:
    if cfg.energy_kind == "GaussianMixture":
        return make_gmm_benchmark(
            n_modes=cfg.energy_n_modes, loc_range=cfg.energy_loc_range,
            component_variance=cfg.energy_component_variance,
            dim=cfg.energy_dim, layout_seed=cfg.energy_layout_seed,
        )
    if cfg.energy_kind == "StandardGaussian":
        return StandardGaussian(dim=cfg.energy_dim)
    return DoubleWell4(a=cfg.energy_dw_a, b=cfg.energy_dw_b, c=cfg.energy_dw_c,
                       d0=cfg.energy_dw_d0, temperature=cfg.energy_temperature)


def build_schedule(cfg: ExperimentConfig) -> PathSchedule:
    return PathSchedule(kind=cfg.path_kind, sigma_min=cfg.path_sigma_min,
                        sigma_max=cfg.path_sigma_max, t_min=cfg.path_t_min)


def build_train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        n_outer=cfg.train_n_outer, n_inner=cfg.train_n_inner,
        samples_per_outer=cfg.train_samples_per_outer, batch_size=cfg.train_batch_size,
        n_candidates=cfg.train_n_candidates, buffer_capacity=cfg.train_buffer_capacity,
        lr=cfg.train_lr, lr_final_frac=cfg.train_lr_final_frac,
        beta1=cfg.train_beta1, beta2=cfg.train_beta2,
        eps=cfg.train_eps,
        grad_clip=cfg.train_grad_clip if cfg.train_grad_clip > 0 else None,
        ode=OdeConfig(n_steps=cfg.train_ode_steps, scheme=cfg.train_ode_scheme),
        seed=cfg.seed, eval_every=cfg.train_eval_every,
    )


def build_net_kwargs(cfg: ExperimentConfig) -> dict:
    return dict(hidden_dim=cfg.net_hidden_dim, n_hidden=cfg.net_n_hidden,
                time_embed_dim=cfg.net_time_embed_dim, activation=cfg.net_activation)


def build_eval_settings(cfg: ExperimentConfig) -> EvalSettings:
    return EvalSettings(
        n_eval=cfg.metrics_n_eval, nll_subset=cfg.metrics_nll_subset,
        ode=OdeConfig(n_steps=cfg.metrics_ode_steps, scheme=cfg.metrics_ode_scheme),
        mcmc_burnin=cfg.metrics_mcmc_burnin, mcmc_step_size=cfg.metrics_mcmc_step_size,
        mcmc_thin=cfg.metrics_mcmc_thin,
    )


def replace_config(cfg: ExperimentConfig, **by_key) -> ExperimentConfig:
    """Functional update by config key (dots or underscores both accepted);
    the result is re-validated."""
    import dataclasses

    updates = {}
    valid = {f.name for f in dc_fields(ExperimentConfig)}
    for key, value in by_key.items():
        attr = _attr(key)
        if attr not in valid:
            raise ConfigError(f"unknown key {key!r}")
        updates[attr] = value
    new = dataclasses.replace(cfg, **updates)
    _validate({key: getattr(new, _attr(key)) for key in SCHEMA})
    return new
