"""Unsupervised clustering with an annealed variational information
bottleneck over a Gaussian-mixture latent prior, plus exact finite-alphabet
oracles for the underlying bound chain."""

from .autodiff import NumericsError, ShapeError, Tape, TapeError, Tensor, backward
from .gmm_prior import (
    GaussianPosterior,
    GmmParams,
    cluster_posterior,
    gmm_log_density,
    kl_gauss_gauss_diag,
    kl_variational_lb,
)
from .training import (
    AnnealSchedule,
    TrainConfig,
    TrainState,
    anneal_train,
    assign_clusters,
    empirical_cost,
    init_state,
    reconstruction_term,
    reparam_sample,
    train_epoch,
)

__all__ = [
    "AnnealSchedule",
    "GaussianPosterior",
    "GmmParams",
    "NumericsError",
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "TrainConfig",
    "TrainState",
    "anneal_train",
    "assign_clusters",
    "backward",
    "cluster_posterior",
    "empirical_cost",
    "gmm_log_density",
    "init_state",
    "kl_gauss_gauss_diag",
    "kl_variational_lb",
    "reconstruction_term",
    "reparam_sample",
    "train_epoch",
]

__version__ = "0.1.0"
