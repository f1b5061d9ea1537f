"""Classical clustering baselines: Lloyd's k-means with k-means++ seeding,
and EM for a diagonal-covariance Gaussian mixture."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass
class KmeansState:
    centroids: np.ndarray  # [k, d]
    assignments: np.ndarray  # [n] int
    sse: float
    n_iters: int
    sse_history: list[float] = field(default_factory=list)


@dataclass
class EmGmmState:
    weights: np.ndarray  # [k]
    means: np.ndarray  # [k, d]
    variances: np.ndarray  # [k, d]
    responsibilities: np.ndarray  # [n, k]
    log_likelihoods: list[float]
    n_iters: int

    def hard_labels(self) -> np.ndarray:
        return self.responsibilities.argmax(axis=1)


def _kmeans_pp_seed(data, k, rng):
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    centroids[0] = data[rng.integers(n)]
    d2 = ((data - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c] = data[rng.integers(n)]
        else:
            centroids[c] = data[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((data - centroids[c]) ** 2).sum(axis=1))
    return centroids


def kmeans(data, k, seed=0, max_iters=100) -> KmeansState:
    """Lloyd iterations from k-means++ seeds. Clusters that empty out are
    re-seeded at the point farthest from every current centroid."""
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} data points")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_seed(data, k, rng)

    labels = np.full(n, -1, dtype=np.int64)
    history = []
    for it in range(1, max_iters + 1):
        new_labels, best = kernels.nearest_centroid(data, centroids)
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(best.argmax())
                centroids[c] = data[far]
                new_labels, best = kernels.nearest_centroid(data, centroids)
        history.append(float(best.sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            # a cluster can stay empty when the data has fewer distinct
            # points than k; keep its centroid rather than average nothing
            if members.any():
                centroids[c] = data[members].mean(axis=0)
    final_labels, best = kernels.nearest_centroid(data, centroids)
    return KmeansState(
        centroids=centroids,
        assignments=final_labels,
        sse=float(best.sum()),
        n_iters=it,
        sse_history=history,
    )


def em_gmm(data, k, seed=0, max_iters=200, tol=1e-6,
           variance_floor=1e-6) -> EmGmmState:
    """EM alternation for a diagonal-covariance mixture. Stops when the
    average log-likelihood improves by less than ``tol``. Collapsing
    variances are clamped to ``variance_floor``."""
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} data points")
    rng = np.random.default_rng(seed)
    means = _kmeans_pp_seed(data, k, rng)
    variances = np.tile(np.maximum(data.var(axis=0), variance_floor), (k, 1))
    weights = np.full(k, 1.0 / k)

    lls = []
    resp = np.full((n, k), 1.0 / k)
    for it in range(1, max_iters + 1):
        # E step in log space
        log_comp = kernels.log_gauss_diag_matrix(data, means, np.log(variances))
        scores = np.log(weights) + log_comp
        m = scores.max(axis=1, keepdims=True)
        log_norm = m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True))
        resp = np.exp(scores - log_norm)
        ll = float(log_norm.sum()) / n
        lls.append(ll)

        # M step
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ data) / nk[:, None]
        sq = (resp.T @ (data * data)) / nk[:, None]
        variances = np.maximum(sq - means * means, variance_floor)

        if len(lls) > 1 and lls[-1] - lls[-2] < tol:
            break

    return EmGmmState(
        weights=weights,
        means=means,
        variances=variances,
        responsibilities=resp,
        log_likelihoods=lls,
        n_iters=it,
    )
