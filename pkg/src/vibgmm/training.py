"""The annealed training objective and its driver loop.

Each sample's objective is a reconstruction log-likelihood term minus ``s``
times the divergence of its posterior from the mixture prior. The driver
sweeps ``s`` upward over a capped geometric schedule, running a block of
epochs at each value; small ``s`` lets the coders settle into a faithful
embedding before the prior-matching pressure ramps up.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import NumericsError, Tensor
from .baselines import kmeans
from .gmm_prior import (
    DEFAULT_VARIANCE_FLOOR,
    GaussianPosterior,
    GmmParams,
    cluster_posterior,
    kl_variational_lb,
)
from .nn import AdamState, Decoder, Encoder, LrSchedule

RECONSTRUCTION_KINDS = ("bernoulli_cross_entropy", "mean_squared_error")


@dataclass
class TrainConfig:
    batch_size: int = 100
    mc_samples: int = 1
    epochs: int = 1
    seed: int = 0
    variance_floor: float = 1e-6
    reconstruction: str = "mean_squared_error"
    lr: LrSchedule = field(default_factory=LrSchedule)
    gmm_kmeans_init: bool = False
    gmm_kmeans_init_epoch: int = 10

    def __post_init__(self):
        if self.batch_size < 1 or self.mc_samples < 1 or self.epochs < 1:
            raise ValueError("batch_size, mc_samples, and epochs must all be >= 1")
        if self.gmm_kmeans_init_epoch < 1:
            raise ValueError("gmm_kmeans_init_epoch must be >= 1")
        if self.reconstruction not in RECONSTRUCTION_KINDS:
            raise ValueError(
                f"reconstruction must be one of {RECONSTRUCTION_KINDS}, "
                f"got {self.reconstruction!r}"
            )


@dataclass
class AnnealSchedule:
    """Sweep of the trade-off weight: s starts at ``s_min`` and is multiplied
    by (1 + step_factor) after each block of epochs, capped at ``s_max``.

    With ``step_factor`` unset, it is derived so the sweep traverses
    [s_min, s_max] geometrically across the configured number of blocks.
    """

    s_min: float = 1.0
    s_max: float = 5.0
    step_factor: float | None = None
    epochs_per_step: int | None = None

    def __post_init__(self):
        if self.s_min < 0 or self.s_max < self.s_min:
            raise ValueError(f"need 0 <= s_min <= s_max, got [{self.s_min}, {self.s_max}]")
        if self.step_factor is not None and self.step_factor <= 0:
            raise ValueError("step_factor must be positive")
        if self.epochs_per_step is not None and self.epochs_per_step < 1:
            raise ValueError("epochs_per_step must be >= 1")

    def realized(self, total_epochs: int):
        """The (s values, epochs per value) pair actually run for a budget of
        ``total_epochs`` epochs. Blocks always sum to ``total_epochs``."""
        if total_epochs < 1:
            raise ValueError("total_epochs must be >= 1")
        if self.s_min == self.s_max:
            return [self.s_min], [total_epochs]

        if self.step_factor is not None:
            values = [self.s_min]
            while values[-1] < self.s_max:
                values.append(min(values[-1] * (1.0 + self.step_factor), self.s_max))
        else:
            if self.s_min <= 0:
                raise ValueError("geometric sweep needs s_min > 0")
            per = self.epochs_per_step or 1
            n_steps = max(2, -(-total_epochs // per))  # ceil
            values = list(np.geomspace(self.s_min, self.s_max, n_steps))
            values[-1] = self.s_max

        per = self.epochs_per_step or max(1, total_epochs // len(values))
        blocks = []
        remaining = total_epochs
        for _ in values:
            take = min(per, remaining)
            blocks.append(take)
            remaining -= take
            if remaining == 0:
                break
        values = values[: len(blocks)]
        blocks[-1] += remaining  # leftover epochs continue at the last s
        return values, blocks


@dataclass
class EpochStats:
    epoch: int
    s: float
    lr: float
    recon: float
    kl: float
    total: float
    wall_ms: float

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "s": self.s,
            "lr": self.lr,
            "recon": self.recon,
            "kl": self.kl,
            "total": self.total,
            "wall_ms": self.wall_ms,
        }


@dataclass
class TrainState:
    encoder: Encoder
    decoder: Decoder
    gmm: GmmParams
    adam: AdamState
    shuffle_rng: np.random.Generator
    mc_rng: np.random.Generator
    epoch: int = 0
    s: float = 0.0
    history: list[EpochStats] = field(default_factory=list)
    realized_s: list[float] = field(default_factory=list)

    @property
    def params(self):
        return self.encoder.params + self.decoder.params + self.gmm.params


def init_state(encoder: Encoder, decoder: Decoder, gmm: GmmParams,
               config: TrainConfig) -> TrainState:
    """Bundle models with fresh optimizer state and per-subsystem RNG streams
    split off the root seed."""
    shuffle_seed, mc_seed = np.random.SeedSequence(config.seed).spawn(2)
    params = encoder.params + decoder.params + gmm.params
    return TrainState(
        encoder=encoder,
        decoder=decoder,
        gmm=gmm,
        adam=AdamState(params),
        shuffle_rng=np.random.default_rng(shuffle_seed),
        mc_rng=np.random.default_rng(mc_seed),
    )


def reparam_sample(p: GaussianPosterior, rng=None, eps=None) -> Tensor:
    """Draw u = mean + std * eps with eps ~ N(0, I). Gradients flow to the
    posterior parameters, never to eps."""
    if eps is None:
        eps = rng.standard_normal(p.mean.shape)
    std = ad.exp(ad.mul(p.log_var, 0.5))
    return ad.add(p.mean, ad.mul(std, eps))


def reconstruction_term(x, x_hat: Tensor, kind: str) -> Tensor:
    """Per-sample reconstruction log-likelihood surrogate [B]; larger is
    better for both kinds."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "bernoulli_cross_entropy":
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError(
                f"cross-entropy needs targets in [0,1], got range "
                f"[{x.min():.4g}, {x.max():.4g}]"
            )
        xh = ad.clip(x_hat, 1e-7, 1.0 - 1e-7)
        ll = ad.add(
            ad.mul(ad.log(xh), x),
            ad.mul(ad.log(ad.sub(1.0, xh)), 1.0 - x),
        )
        return ad.tsum(ll, axis=1)
    if kind == "mean_squared_error":
        sq = ad.square(ad.sub(x_hat, x))
        return ad.neg(ad.mul(ad.tsum(sq, axis=1), 0.5))
    raise ValueError(f"unknown reconstruction kind {kind!r}")


@dataclass
class CostTerms:
    """Per-sample objective pieces, each a [B] tensor on the tape.
    total = recon - s * kl, by construction."""

    total: Tensor
    recon: Tensor
    kl: Tensor


def empirical_cost(x, encoder: Encoder, decoder: Decoder, gmm: GmmParams,
                   s: float, config: TrainConfig, rng=None, eps=None) -> CostTerms:
    """Objective for a batch: Monte Carlo reconstruction average minus
    s times the posterior-vs-prior divergence surrogate.

    ``eps`` (shape [M, B, D]) pins the Monte Carlo draws; otherwise they come
    from ``rng``.
    """
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    posterior = encoder.encode(x)
    m = config.mc_samples
    recon = None
    for i in range(m):
        e = eps[i] if eps is not None else rng.standard_normal(posterior.mean.shape)
        u = reparam_sample(posterior, eps=e)
        x_hat = decoder(u)
        r = reconstruction_term(x, x_hat, config.reconstruction)
        recon = r if recon is None else ad.add(recon, r)
    if m > 1:
        recon = ad.mul(recon, 1.0 / m)
    kl = kl_variational_lb(posterior, gmm, config.variance_floor)
    total = ad.sub(recon, ad.mul(kl, s))
    return CostTerms(total=total, recon=recon, kl=kl)


def train_epoch(features: np.ndarray, state: TrainState, config: TrainConfig) -> EpochStats:
    """One shuffled pass: per batch, maximize the mean objective by one Adam
    step on all coder and mixture parameters."""
    if features.shape[0] == 0:
        raise ValueError("empty dataset")
    t0 = time.perf_counter()
    n = features.shape[0]
    lr = config.lr.rate(state.epoch)
    s = state.s
    order = state.shuffle_rng.permutation(n)
    params = state.params

    recon_sum = 0.0
    kl_sum = 0.0
    for b, start in enumerate(range(0, n, config.batch_size)):
        batch = features[order[start : start + config.batch_size]]
        try:
            with ad.Tape():
                cost = empirical_cost(batch, state.encoder, state.decoder,
                                      state.gmm, s, config, rng=state.mc_rng)
                loss = ad.neg(ad.tmean(cost.total))
                if not np.isfinite(loss.data):
                    raise NumericsError("non-finite loss")
                nn.zero_grads(params)
                ad.backward(loss)
        except NumericsError as e:
            raise NumericsError(
                f"{e} (batch {b}, epoch {state.epoch}, s={s:.6g}, lr={lr:.6g})"
            ) from None
        nn.adam_step(params, state.adam, lr)
        recon_sum += float(cost.recon.data.sum())
        kl_sum += float(cost.kl.data.sum())

    recon = recon_sum / n
    kl = kl_sum / n
    stats = EpochStats(
        epoch=state.epoch,
        s=s,
        lr=lr,
        recon=recon,
        kl=kl,
        total=recon - s * kl,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    state.epoch += 1
    return stats


def _reinit_gmm_from_kmeans(features, state: TrainState, config: TrainConfig):
    """Re-seed mixture parameters from k-means on the current latent means."""
    latents = state.encoder.encode(features).mean.data
    km = kmeans(latents, state.gmm.n_components, seed=config.seed)
    counts = np.bincount(km.assignments, minlength=state.gmm.n_components)
    freqs = np.maximum(counts, 1) / max(counts.sum(), 1)
    variances = np.ones_like(state.gmm.log_vars.data)
    for c in range(state.gmm.n_components):
        member = latents[km.assignments == c]
        if member.shape[0] > 1:
            variances[c] = np.maximum(member.var(axis=0), config.variance_floor)
    state.gmm.weight_logits.data = np.log(freqs)
    state.gmm.means.data = km.centroids.copy()
    state.gmm.log_vars.data = np.log(variances)
    n_model = len(state.encoder.params) + len(state.decoder.params)
    state.adam.reset_slots(range(n_model, n_model + 3))


def anneal_train(features: np.ndarray, state: TrainState, config: TrainConfig,
                 schedule: AnnealSchedule, log_fn=None) -> TrainState:
    """Run the full annealed sweep. ``features`` is the label-free [N, n_x]
    matrix; ``log_fn`` (if given) receives each EpochStats as it completes."""
    values, blocks = schedule.realized(config.epochs)
    state.realized_s = values
    for s, block in zip(values, blocks):
        state.s = s
        for _ in range(block):
            stats = train_epoch(features, state, config)
            state.history.append(stats)
            if log_fn is not None:
                log_fn(stats)
            if config.gmm_kmeans_init and state.epoch == config.gmm_kmeans_init_epoch:
                _reinit_gmm_from_kmeans(features, state, config)
    return state


def assign_clusters(features: np.ndarray, encoder: Encoder, gmm: GmmParams,
                    floor=DEFAULT_VARIANCE_FLOOR) -> np.ndarray:
    """Hard cluster labels: encode, take the posterior mean as the latent
    point, pick the most responsible component. Deterministic; ties resolve
    to the lowest component index."""
    posterior = encoder.encode(features)
    resp = cluster_posterior(posterior.mean.data, gmm, floor)
    return resp.argmax(axis=1)
