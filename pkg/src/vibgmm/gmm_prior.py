"""Gaussian-mixture latent prior: densities, divergences, and the cluster
posterior.

All mixture arithmetic runs in log space. The divergence between a diagonal
Gaussian posterior and the mixture has no closed form; ``kl_variational_lb``
computes the standard variational surrogate that aggregates per-component
divergences as ``-log sum_c pi_c exp(-KL_c)``. The surrogate is exact for a
single component and never falls below the true divergence, which makes the
overall training objective it enters a lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor

DEFAULT_VARIANCE_FLOOR = 1e-6


@dataclass
class GaussianPosterior:
    """Per-row diagonal Gaussian: mean and log-variance, both [B, D]."""

    mean: Tensor
    log_var: Tensor

    def __post_init__(self):
        if self.mean.shape != self.log_var.shape:
            raise ad.ShapeError(
                f"posterior mean {self.mean.shape} vs log_var {self.log_var.shape}"
            )


class GmmParams:
    """Mixture weights (as free logits), component means, and diagonal
    component log-variances. Learned jointly with the coder networks."""

    def __init__(self, weight_logits: Tensor, means: Tensor, log_vars: Tensor):
        if means.shape != log_vars.shape or means.ndim != 2:
            raise ad.ShapeError(
                f"means {means.shape} and log_vars {log_vars.shape} must be equal 2-d"
            )
        if weight_logits.shape != (means.shape[0],):
            raise ad.ShapeError(
                f"{means.shape[0]} components need as many weight logits, "
                f"got {weight_logits.shape}"
            )
        self.weight_logits = weight_logits
        self.means = means
        self.log_vars = log_vars

    @classmethod
    def random_init(cls, n_components, latent_dim, rng, mean_scale=0.5):
        return cls(
            weight_logits=Tensor(np.zeros(n_components), requires_grad=True),
            means=Tensor(
                mean_scale * rng.standard_normal((n_components, latent_dim)),
                requires_grad=True,
            ),
            log_vars=Tensor(np.zeros((n_components, latent_dim)), requires_grad=True),
        )

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.means.shape[1]

    @property
    def params(self) -> list[Tensor]:
        return [self.weight_logits, self.means, self.log_vars]

    def weights(self) -> np.ndarray:
        z = self.weight_logits.data - self.weight_logits.data.max()
        e = np.exp(z)
        return e / e.sum()

    def log_weights(self) -> Tensor:
        """Log of the softmax weights, on the tape."""
        return ad.sub(self.weight_logits, ad.logsumexp(self.weight_logits))

    def floored_log_vars(self, floor=DEFAULT_VARIANCE_FLOOR) -> Tensor:
        return ad.clamp_min(self.log_vars, np.log(floor))

    def named_tensors(self) -> dict[str, Tensor]:
        return {
            "gmm.weight_logits": self.weight_logits,
            "gmm.means": self.means,
            "gmm.log_vars": self.log_vars,
        }


def kl_diag_mixture_matrix(post_mean, post_log_var, comp_means, comp_log_vars) -> Tensor:
    """Pairwise diagonal-Gaussian KL matrix [B, C] between posterior rows and
    mixture components, as one fused differentiable op."""
    pm, plv = ad.as_tensor(post_mean), ad.as_tensor(post_log_var)
    cm, clv = ad.as_tensor(comp_means), ad.as_tensor(comp_log_vars)
    if pm.shape != plv.shape or cm.shape != clv.shape or pm.shape[1] != cm.shape[1]:
        raise ad.ShapeError(
            f"incompatible shapes: posterior {pm.shape}/{plv.shape}, "
            f"components {cm.shape}/{clv.shape}"
        )
    out = kernels.kl_diag_matrix(pm.data, plv.data, cm.data, clv.data)

    def bwd(g):
        return kernels.kl_diag_matrix_grads(pm.data, plv.data, cm.data, clv.data, g)

    return ad.record_custom_op(out, (pm, plv, cm, clv), bwd)


def kl_gauss_gauss_diag(p: GaussianPosterior, mean_c, log_var_c) -> Tensor:
    """Exact KL between each posterior row and one diagonal Gaussian -> [B]."""
    cm = _as_row_matrix(ad.as_tensor(mean_c))
    clv = _as_row_matrix(ad.as_tensor(log_var_c))
    kl = kl_diag_mixture_matrix(p.mean, p.log_var, cm, clv)
    return ad.tsum(kl, axis=1)


def _as_row_matrix(t: Tensor) -> Tensor:
    """View a vector as a one-row matrix, preserving the gradient path."""
    if t.ndim == 2:
        return t
    out = t.data.reshape(1, -1)

    def bwd(g):
        return (g.reshape(t.shape),)

    return ad.record_custom_op(out, (t,), bwd)


def kl_variational_lb(p: GaussianPosterior, gmm: GmmParams,
                      floor=DEFAULT_VARIANCE_FLOOR) -> Tensor:
    """Variational surrogate for KL(posterior || mixture), one value per
    posterior row: -log sum_c pi_c exp(-KL_c), evaluated via logsumexp."""
    kl = kl_diag_mixture_matrix(
        p.mean, p.log_var, gmm.means, gmm.floored_log_vars(floor)
    )
    scores = ad.add(ad.neg(kl), gmm.log_weights())  # [B, C] + [C]
    return ad.neg(ad.logsumexp(scores, axis=1))


def _score_matrix(u, gmm: GmmParams, floor):
    u = np.asarray(u, dtype=np.float64)
    squeeze = u.ndim == 1
    u2 = u.reshape(1, -1) if squeeze else u
    log_vars = np.maximum(gmm.log_vars.data, np.log(floor))
    lg = kernels.log_gauss_diag_matrix(u2, gmm.means.data, log_vars)
    scores = np.log(gmm.weights()) + lg
    return scores, squeeze


def cluster_posterior(u, gmm: GmmParams, floor=DEFAULT_VARIANCE_FLOOR) -> np.ndarray:
    """Posterior component responsibilities for latent vectors ``u``.

    Accepts one vector [D] or a batch [B, D]; returns probabilities that sum
    to one per row. Evaluation only; does not record gradients.
    """
    scores, squeeze = _score_matrix(u, gmm, floor)
    scores -= scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    post = e / e.sum(axis=1, keepdims=True)
    return post[0] if squeeze else post


def gmm_log_density(u, gmm: GmmParams, floor=DEFAULT_VARIANCE_FLOOR) -> np.ndarray:
    """Log mixture density at ``u`` (vector or batch)."""
    scores, squeeze = _score_matrix(u, gmm, floor)
    m = scores.max(axis=1, keepdims=True)
    out = (m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True))).ravel()
    return float(out[0]) if squeeze else out
