"""Fully connected networks, the Adam optimizer, and the stepped learning
rate schedule used by the trainer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .gmm_prior import GaussianPosterior

ACTIVATIONS = ("relu", "linear", "sigmoid")


@dataclass
class LrSchedule:
    """Learning rate decayed by a fixed factor every ``interval_epochs``,
    never below ``floor``."""

    initial: float = 0.002
    decay: float = 0.9
    interval_epochs: int = 20
    floor: float = 0.0005

    def rate(self, epoch: int) -> float:
        return max(self.floor, self.initial * self.decay ** (epoch // self.interval_epochs))


@dataclass
class MlpSpec:
    """Layer widths (including input) and one activation per layer."""

    layer_dims: list[int]
    activations: list[str]

    def __post_init__(self):
        if len(self.layer_dims) < 2:
            raise ValueError("need at least an input and an output dimension")
        if any(d < 1 for d in self.layer_dims):
            raise ValueError(f"layer dims must be positive: {self.layer_dims}")
        if len(self.activations) != len(self.layer_dims) - 1:
            raise ValueError(
                f"{len(self.layer_dims) - 1} layers need as many activations, "
                f"got {len(self.activations)}"
            )
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")


class DenseLayer:
    def __init__(self, weights: Tensor, bias: Tensor, activation: str):
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ad.ShapeError(
                f"dense layer shapes inconsistent: W {weights.shape}, b {bias.shape}"
            )
        self.weights = weights
        self.bias = bias
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        h = ad.add(ad.matmul(x, self.weights), self.bias)
        if self.activation == "relu":
            return ad.relu(h)
        if self.activation == "sigmoid":
            return ad.sigmoid(h)
        return h


class Mlp:
    """A stack of dense layers built from an MlpSpec.

    Weights use uniform fan-based (Glorot-style) initialization; biases
    start at zero.
    """

    def __init__(self, spec: MlpSpec, rng: np.random.Generator):
        self.spec = spec
        self.layers = []
        for i, (d_in, d_out) in enumerate(zip(spec.layer_dims, spec.layer_dims[1:])):
            limit = np.sqrt(6.0 / (d_in + d_out))
            w = Tensor(rng.uniform(-limit, limit, size=(d_in, d_out)), requires_grad=True)
            b = Tensor(np.zeros(d_out), requires_grad=True)
            self.layers.append(DenseLayer(w, b, spec.activations[i]))

    @property
    def in_dim(self) -> int:
        return self.spec.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.spec.layer_dims[-1]

    @property
    def params(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def forward(self, x) -> Tensor:
        x = ad.as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ad.ShapeError(
                f"expected input of shape [batch, {self.in_dim}], got {x.shape}"
            )
        for layer in self.layers:
            x = layer(x)
        return x

    __call__ = forward

    def named_tensors(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}.{i}.weight"] = layer.weights
            out[f"{prefix}.{i}.bias"] = layer.bias
        return out


class Encoder(Mlp):
    """MLP whose final linear layer emits a mean and a log-variance head.

    The log-variance head is floored so the emitted variance never drops
    below ``variance_floor``.
    """

    def __init__(self, n_x, hidden, n_u, rng, variance_floor=1e-6):
        spec = MlpSpec(
            layer_dims=[n_x, *hidden, 2 * n_u],
            activations=["relu"] * len(hidden) + ["linear"],
        )
        super().__init__(spec, rng)
        self.latent_dim = n_u
        self.variance_floor = variance_floor

    def encode(self, x) -> GaussianPosterior:
        out = self.forward(x)
        ad.require_finite(out, "encoder output")
        mean = ad.cols(out, 0, self.latent_dim)
        log_var = ad.clamp_min(
            ad.cols(out, self.latent_dim, 2 * self.latent_dim),
            np.log(self.variance_floor),
        )
        return GaussianPosterior(mean, log_var)


class Decoder(Mlp):
    """MLP mapping latent vectors back to data space. Use a sigmoid output
    for [0,1]-scaled data, linear otherwise."""

    def __init__(self, n_u, hidden, n_x, rng, output_activation="linear"):
        if output_activation not in ("linear", "sigmoid"):
            raise ValueError(f"unsupported decoder output {output_activation!r}")
        spec = MlpSpec(
            layer_dims=[n_u, *hidden, n_x],
            activations=["relu"] * len(hidden) + [output_activation],
        )
        super().__init__(spec, rng)


class AdamState:
    """First/second moment buffers plus the step counter."""

    def __init__(self, params: list[Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def reset_slots(self, indices):
        """Zero the moment buffers of selected parameters (used after an
        out-of-band re-initialization of those parameters)."""
        for i in indices:
            self.m[i][:] = 0.0
            self.v[i][:] = 0.0


def adam_step(params: list[Tensor], state: AdamState, lr: float):
    """One bias-corrected Adam update, in place. Every parameter must carry
    a gradient."""
    if len(params) != len(state.m):
        raise ValueError("optimizer state was built for a different parameter list")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for i, p in enumerate(params):
        g = p.grad
        if g is None:
            raise ValueError(f"parameter {i} has no gradient; run backward first")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def zero_grads(params: list[Tensor]):
    for p in params:
        p.grad = None
