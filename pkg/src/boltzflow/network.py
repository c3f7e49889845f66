"""The learned vector field: a plain MLP over (x, time embedding).

Forward, reverse-mode gradients, and forward-mode tangents (for divergence)
are written out by hand on numpy float64 arrays. That keeps runs
bit-reproducible and the gradient checkable against finite differences.
The final layer is zero-initialized so the untrained flow is the identity
map, which keeps early ODE solves trivially stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .energies import center_configuration
from .errors import CheckpointError, ConfigError, DimensionError, NumericError

CHECKPOINT_VERSION = 1

_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_A = 0.044715


def _gelu(z):
    # tanh-form gelu, written with in-place ops (elementwise passes dominate
    # the forward cost); exactly consistent with its derivative below
    out = z * z
    out *= _GELU_A
    out += 1.0
    out *= z          # z + A z^3
    out *= _GELU_C
    np.tanh(out, out=out)
    out += 1.0
    out *= z
    out *= 0.5
    return out


def _gelu_prime(z):
    z2 = z * z
    arg = z2 * _GELU_A
    arg += 1.0
    arg *= z
    arg *= _GELU_C
    th = np.tanh(arg, out=arg)
    one_minus = 1.0 - th * th
    one_minus *= z
    one_minus *= 0.5 * _GELU_C
    z2 *= 3.0 * _GELU_A
    z2 += 1.0
    one_minus *= z2   # 0.5 z (1 - th^2) C (1 + 3 A z^2)
    th += 1.0
    th *= 0.5
    th += one_minus
    return th


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_prime(z):
    return (z > 0.0).astype(float)


def _tanh_prime(z):
    t = np.tanh(z)
    return 1.0 - t * t


ACTIVATIONS = {
    "gelu": (_gelu, _gelu_prime),
    "relu": (_relu, _relu_prime),
    "tanh": (np.tanh, _tanh_prime),
}


@lru_cache(maxsize=8)
def _embedding_freqs(half: int) -> np.ndarray:
    return 2.0 * np.pi * np.logspace(0.0, 4.0, half)


def time_embedding(t, time_embed_dim: int):
    """Sinusoidal features [sin(w_j t), cos(w_j t)] at geometric frequencies
    w_j from 2*pi up to 2*pi*1e4. For any t the squared norm is dim/2."""
    if time_embed_dim % 2 != 0 or time_embed_dim < 2:
        raise ConfigError("time_embed_dim must be a positive even integer")
    ang = np.multiply.outer(np.asarray(t, dtype=float), _embedding_freqs(time_embed_dim // 2))
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


class VectorFieldMLP:
    """u_t(x; theta): MLP on concat(x, time_embedding(t)) -> R^d.

    When ``particle_shape`` is set the output is projected to zero centre of
    mass per configuration, so particle flows stay in the centred subspace.
    """

    def __init__(self, input_dim: int, hidden_dim: int = 128, n_hidden: int = 4,
                 time_embed_dim: int = 64, activation: str = "gelu",
                 particle_shape: tuple[int, int] | None = None, rng=None):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        if time_embed_dim % 2 != 0 or time_embed_dim < 2:
            raise ConfigError("time_embed_dim must be a positive even integer")
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.n_hidden = int(n_hidden)
        self.time_embed_dim = int(time_embed_dim)
        self.activation = activation
        self.particle_shape = tuple(particle_shape) if particle_shape else None
        if self.particle_shape is not None:
            np_, sd = self.particle_shape
            if np_ * sd != self.input_dim:
                raise DimensionError("particle_shape does not match input_dim")
        self._act, self._act_prime = ACTIVATIONS[activation]

        widths = [self.input_dim + self.time_embed_dim] + [self.hidden_dim] * self.n_hidden + [self.input_dim]
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            if i == len(widths) - 2:
                w = np.zeros((fan_in, fan_out))  # zero-init head: u_0 == 0
            else:
                w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    # -- forward / backward --------------------------------------------------

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; mutating entries mutates the model."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def _prep(self, x, t):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[-1] != self.input_dim:
            raise DimensionError(f"expected inputs of length {self.input_dim}")
        T = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],))
        return X, T, single

    def _check_finite(self, h, pre):
        """Finiteness is checked once on the output; the offending layer is
        located only on the failure path."""
        if np.isfinite(h.sum()):
            return
        for i, z in enumerate(pre):
            if z is not None and not np.isfinite(z.sum()):
                raise NumericError(f"non-finite activation in layer {i}")
        raise NumericError("non-finite network output")

    def _forward(self, X, T):
        """Returns (output, cache) with per-layer inputs and pre-activations."""
        emb = time_embedding(T, self.time_embed_dim)
        h = np.concatenate([X, emb], axis=1)
        inputs, pre = [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = self._act(z) if i < self.n_layers - 1 else z
        self._check_finite(h, pre)
        if self.particle_shape is not None:
            h = center_configuration(h, *self.particle_shape)
        return h, (inputs, pre)

    def _forward_infer(self, X, T):
        """Forward pass without retaining caches: temporaries are recycled,
        which matters in the ODE hot loop."""
        emb = time_embedding(T, self.time_embed_dim)
        h = np.concatenate([X, emb], axis=1)
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w
            h += b
            if i < last:
                h = self._act(h)
        if not np.isfinite(h.sum()):
            self._forward(X, T)  # re-run with caches to name the bad layer
        if self.particle_shape is not None:
            h = center_configuration(h, *self.particle_shape)
        return h

    def forward(self, x, t):
        X, T, single = self._prep(x, t)
        out = self._forward_infer(X, T)
        return out[0] if single else out

    __call__ = forward

    def loss_and_gradient(self, xs, ts, targets):
        """Mean squared field error over a batch and its exact parameter gradient.

        loss = mean_b || u(x_b, t_b) - y_b ||^2. Gradients are reverse-mode;
        targets are constants.
        """
        X, T, _ = self._prep(xs, ts)
        Y = np.asarray(targets, dtype=float)
        if Y.shape != X.shape:
            raise DimensionError("targets must match the input batch shape")
        if X.shape[0] == 0:
            raise ValueError("empty batch")
        out, (inputs, pre) = self._forward(X, T)
        diff = out - Y
        loss = float(np.mean(np.sum(diff * diff, axis=1)))
        if not np.isfinite(loss):
            raise NumericError("non-finite loss")

        g = 2.0 * diff / X.shape[0]
        if self.particle_shape is not None:
            g = center_configuration(g, *self.particle_shape)  # projector is symmetric
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grads_w[i] = inputs[i].T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * self._act_prime(pre[i - 1])
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend((gw, gb))
        return loss, grads

    # -- forward-mode tangents ------------------------------------------------

    def jvp(self, x, t, tangents):
        """Propagate spatial tangents: returns (u, J_x u @ tangents).

        ``tangents`` has shape (k, d) for a single input or (B, k, d) for a
        batch; time is held fixed (its tangent is zero).
        """
        X, T, single = self._prep(x, t)
        V = np.asarray(tangents, dtype=float)
        if single:
            V = V[None, ...]
        out, (inputs, pre) = self._forward(X, T)
        tang = V @ self.weights[0][: self.input_dim, :]
        for i in range(1, self.n_layers):
            tang = tang * self._act_prime(pre[i - 1])[:, None, :]
            tang = tang @ self.weights[i]
        if self.particle_shape is not None:
            tang = center_configuration(tang, *self.particle_shape)
        if single:
            return out[0], tang[0]
        return out, tang

    def value_and_divergence(self, x, t):
        """u(x, t) and the exact trace of its spatial Jacobian, via d tangents."""
        X, T, single = self._prep(x, t)
        eye = np.broadcast_to(np.eye(self.input_dim), (X.shape[0], self.input_dim, self.input_dim))
        out, tang = self.jvp(X, T, eye)
        div = np.trace(tang, axis1=1, axis2=2)
        return (out[0], float(div[0])) if single else (out, div)


@dataclass
class AdamState:
    """Adam moments for one model; shapes mirror ``model.parameters()``."""

    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = 1.0
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_model(cls, model: VectorFieldMLP, **kwargs) -> "AdamState":
        params = model.parameters()
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kwargs)


def adam_step(model: VectorFieldMLP, state: AdamState, grads):
    """One bias-corrected Adam update (in place); optional global-norm clip
    is applied to the gradient before the moment updates."""
    params = model.parameters()
    if len(grads) != len(params):
        raise DimensionError("gradient list does not match parameter list")
    for g, p in zip(grads, params):
        if g.shape != p.shape:
            raise DimensionError("gradient shape mismatch")

    if state.grad_clip is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > state.grad_clip:
            scale = state.grad_clip / norm
            grads = [g * scale for g in grads]

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for i, (g, p) in enumerate(zip(grads, params)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return model, state


# -- checkpointing -------------------------------------------------------------


def save_checkpoint(path, model: VectorFieldMLP, opt: AdamState | None = None):
    """Versioned binary dump of shapes, parameters, and optimizer state."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "n_hidden": model.n_hidden,
        "time_embed_dim": model.time_embed_dim,
        "activation": model.activation,
        "particle_shape": list(model.particle_shape) if model.particle_shape else None,
        "opt": None,
    }
    arrays = {}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    if opt is not None:
        meta["opt"] = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                       "eps": opt.eps, "grad_clip": opt.grad_clip, "step": opt.step}
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"adam_m{i}"] = m
            arrays[f"adam_v{i}"] = v
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; bit-exact round trip."""
    try:
        data = np.load(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}")
    if "meta" not in data:
        raise CheckpointError(f"{path} is not a boltzflow checkpoint")
    meta = json.loads(bytes(data["meta"]).decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
    model = VectorFieldMLP(
        input_dim=meta["input_dim"], hidden_dim=meta["hidden_dim"],
        n_hidden=meta["n_hidden"], time_embed_dim=meta["time_embed_dim"],
        activation=meta["activation"],
        particle_shape=tuple(meta["particle_shape"]) if meta["particle_shape"] else None,
    )
    for i in range(model.n_layers):
        model.weights[i] = data[f"w{i}"].astype(float, copy=True)
        model.biases[i] = data[f"b{i}"].astype(float, copy=True)
    opt = None
    if meta["opt"] is not None:
        o = meta["opt"]
        opt = AdamState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"],
                        grad_clip=o["grad_clip"], step=o["step"],
                        m=[data[f"adam_m{i}"].copy() for i in range(model.n_layers * 2)],
                        v=[data[f"adam_v{i}"].copy() for i in range(model.n_layers * 2)])
    return model, opt
