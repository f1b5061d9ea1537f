"""Shared independent oracles for the test suite.

Everything here is deliberately written against plain numpy (loops where
that is simplest), not against the package internals, so these stay valid
checks of the code paths they are compared with.
"""

import itertools

import numpy as np


def numeric_grad(f, params, h=1e-5):
    """Central finite differences of the scalar function ``f()`` with
    respect to each Tensor in ``params`` (perturbed in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = f()
            flat[i] = orig - h
            f_minus = f()
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_grad_error(analytic, numeric, guard=1e-8):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        err = np.abs(a - n) / (np.abs(n) + guard)
        worst = max(worst, float(err.max()))
    return worst


def naive_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def diag_gauss_logpdf(u, mean, log_var):
    """Row-wise log N(u; mean, diag(exp(log_var)))."""
    return -0.5 * (
        ((u - mean) ** 2) * np.exp(-log_var) + log_var + np.log(2.0 * np.pi)
    ).sum(axis=-1)


def mc_kl_gauss_vs_mixture(rng, post_mean, post_log_var, weights, means,
                           log_vars, n_samples):
    """Monte Carlo estimate (mean, standard error) of the divergence from a
    diagonal Gaussian to a diagonal-Gaussian mixture."""
    d = post_mean.size
    u = post_mean + np.exp(0.5 * post_log_var) * rng.standard_normal((n_samples, d))
    log_p = diag_gauss_logpdf(u, post_mean, post_log_var)
    comp = np.stack([
        np.log(weights[c]) + diag_gauss_logpdf(u, means[c], log_vars[c])
        for c in range(len(weights))
    ])
    log_q = np.logaddexp.reduce(comp, axis=0)
    diff = log_p - log_q
    return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(n_samples))


def brute_force_accuracy(pred, true):
    """Best matched fraction over all one-to-one mappings, by enumeration.
    Only usable for small label counts."""
    pred = np.asarray(pred)
    true = np.asarray(true)
    p_vals = np.unique(pred)
    t_vals = np.unique(true)
    big, small = (p_vals, t_vals) if len(p_vals) >= len(t_vals) else (t_vals, p_vals)
    best = 0
    for chosen in itertools.permutations(big, len(small)):
        matched = 0
        for a, b in zip(chosen, small):
            if len(p_vals) >= len(t_vals):
                matched += np.sum((pred == a) & (true == b))
            else:
                matched += np.sum((pred == b) & (true == a))
        best = max(best, matched)
    return best / len(pred)
