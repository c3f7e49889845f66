"""Gaussian conditional probability paths (variance-exploding and optimal-transport).

A path pins a Gaussian ``p_t(x | x1) = N(mean(t, x1), sigma(t)^2 I)`` to an
endpoint x1, with t=0 the prior end and t=1 the data end:

* OT: mean ``t * x1``, scale ``sigma_t = 1 - (1 - sigma_min) * t`` (``sigma_min``
  plays the role of the terminal scale sigma_1).
* VE: mean ``x1``, geometric scale ``sigma_t = sigma_max^(1-t) * sigma_min^t``
  (decreasing in t, since t=1 is the data end here).

All operations are pure and broadcast over leading batch axes; ``t`` may be a
scalar or an array that broadcasts against the spatial inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClampedTimeError, ConfigError, SingularScheduleError

_KIND_ALIASES = {
    "OT": "OT",
    "OPTIMALTRANSPORT": "OT",
    "VE": "VE",
    "VARIANCEEXPLODING": "VE",
}


@dataclass(frozen=True)
class ConditionalGaussian:
    """Isotropic Gaussian over endpoints: the candidate law q(x1; x, t)."""

    mean: np.ndarray
    std: float | np.ndarray


@dataclass(frozen=True)
class PathSchedule:
    kind: str
    sigma_min: float = 0.05
    sigma_max: float = 40.0
    t_min: float = 0.01

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).replace("-", "").upper())
        if kind is None:
            raise ConfigError(f"unknown path kind {self.kind!r}; use OT or VE")
        object.__setattr__(self, "kind", kind)
        if kind == "VE":
            if not 0 < self.sigma_min < self.sigma_max:
                raise ConfigError("VE path needs 0 < sigma_min < sigma_max")
        else:
            if not 0 <= self.sigma_min < 1:
                raise ConfigError("OT path needs 0 <= sigma_min < 1")
        if not 0 < self.t_min < 0.5:
            raise ConfigError("t_min must lie in (0, 0.5)")

    # -- schedules ---------------------------------------------------------

    def mean(self, t, x1):
        """Conditional mean: OT -> t*x1, VE -> x1."""
        x1 = np.asarray(x1, dtype=float)
        if self.kind == "VE":
            return x1.copy()
        t = np.asarray(t, dtype=float)
        return t[..., None] * x1 if t.ndim else t * x1

    def sigma(self, t):
        """Return (sigma_t, d sigma_t / dt)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "OT":
            slope = 1.0 - self.sigma_min
            sig = 1.0 - slope * t
            dsig = np.broadcast_to(-slope, t.shape) if t.ndim else -slope
            return sig, dsig
        log_ratio = np.log(self.sigma_min / self.sigma_max)
        sig = self.sigma_max ** (1.0 - t) * self.sigma_min**t
        return sig, sig * log_ratio

    def sample_conditional(self, t, x1, rng):
        """Draw x ~ p_t(. | x1) = N(mean(t, x1), sigma_t^2 I)."""
        x1 = np.asarray(x1, dtype=float)
        mu = self.mean(t, x1)
        sig, _ = self.sigma(t)
        sig = sig[..., None] if np.ndim(sig) else sig
        return mu + sig * rng.standard_normal(x1.shape)

    def conditional_field(self, t, x, x1):
        """Vector field generating p_t(.|x1):
        ``(dsigma/dt / sigma) * (x - mean(t, x1)) + dmean/dt``.

        OT reduces to ``(x1 - (1 - s1) x) / (1 - (1 - s1) t)``; VE to
        ``log(sigma_min / sigma_max) * (x - x1)``.
        """
        x = np.asarray(x, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        sig, dsig = self.sigma(t)
        if np.any(np.asarray(sig) <= 0.0):
            raise SingularScheduleError(
                f"sigma_t = 0 on the {self.kind} path (sigma_min={self.sigma_min}, t={t})"
            )
        ratio = dsig / sig
        ratio = ratio[..., None] if np.ndim(ratio) else ratio
        dmean_dt = x1 if self.kind == "OT" else 0.0
        return ratio * (x - self.mean(t, x1)) + dmean_dt

    def candidate(self, t, x) -> ConditionalGaussian:
        """q(x1; x, t), the renormalization of p_t(x|x1) read as a law over x1.

        OT -> N(x/t, (sigma_t/t)^2 I); explosive below t_min, so OT callers
        must draw t >= t_min. VE -> N(x, sigma_t^2 I) at any t.
        """
        x = np.asarray(x, dtype=float)
        sig, _ = self.sigma(t)
        if self.kind == "VE":
            return ConditionalGaussian(mean=x.copy(), std=sig)
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_min):
            raise ClampedTimeError(
                f"OT candidate law needs t >= t_min = {self.t_min}, got {t}"
            )
        inv = 1.0 / t_arr
        mean = inv[..., None] * x if t_arr.ndim else inv * x
        return ConditionalGaussian(mean=mean, std=sig * inv)

    # -- prior (t = 0 end) -------------------------------------------------

    @property
    def prior_std(self) -> float:
        """Marginal scale at t=0: OT -> sigma_0 = 1, VE -> sigma_max."""
        return 1.0 if self.kind == "OT" else self.sigma_max

    def prior_sample(self, shape, rng):
        """Draw from N(0, prior_std^2 I); shape is (d,) or (n, d)."""
        return self.prior_std * rng.standard_normal(shape)

    def prior_log_density(self, x, d_eff: int | None = None):
        """Log N(x; 0, prior_std^2 I). ``d_eff`` overrides the dimension used
        in the normalizer (particle systems live in a centred subspace of
        dimension d - space_dim)."""
        x = np.asarray(x, dtype=float)
        d = x.shape[-1] if d_eff is None else int(d_eff)
        s2 = self.prior_std**2
        return -0.5 * np.sum(x * x, axis=-1) / s2 - 0.5 * d * np.log(2.0 * np.pi * s2)

    def train_time_range(self) -> tuple[float, float]:
        """Where training draws t: [t_min, 1] for OT, [0, 1] for VE."""
        return (self.t_min, 1.0) if self.kind == "OT" else (0.0, 1.0)
