"""Exact finite-alphabet verification of the bound chain.

Everything here works on small probability tables, summed exactly, so the
inequalities and identities relating the information objective, its
variational relaxation, and the mixture-decomposed form can be checked to
floating-point precision instead of statistically. Natural logarithms
throughout; 0*log(0) is 0 by continuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr, xlogy

MAX_TABLE_CELLS = 512
ATOL = 1e-12


class ValidationError(ValueError):
    """A probability table violates normalization, positivity, or a required
    consistency relation."""


@dataclass
class DiscreteModel:
    """Joint pmf over (cluster, observation) with a stochastic encoder to a
    finite representation alphabet, plus variational decoder/prior tables.

    Axes: p_cx is [C, X]; p_u_given_x is [X, U] (rows are distributions);
    q_x_given_u is [U, X]; q_u is [U]. The mixture-form tables q_c [C],
    q_u_given_c [C, U], and q_c_given_u [U, C] are optional and must satisfy
    q_u = sum_c q_c q_u_given_c and Bayes consistency when present.
    """

    p_cx: np.ndarray
    p_u_given_x: np.ndarray
    q_x_given_u: np.ndarray
    q_u: np.ndarray
    q_c: np.ndarray | None = None
    q_u_given_c: np.ndarray | None = None
    q_c_given_u: np.ndarray | None = None

    def __post_init__(self):
        self.p_cx = np.asarray(self.p_cx, dtype=np.float64)
        self.p_u_given_x = np.asarray(self.p_u_given_x, dtype=np.float64)
        self.q_x_given_u = np.asarray(self.q_x_given_u, dtype=np.float64)
        self.q_u = np.asarray(self.q_u, dtype=np.float64)
        for name in ("q_c", "q_u_given_c", "q_c_given_u"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=np.float64))

    @property
    def nc(self):
        return self.p_cx.shape[0]

    @property
    def nx(self):
        return self.p_cx.shape[1]

    @property
    def nu(self):
        return self.p_u_given_x.shape[1]

    def validate(self):
        if self.nc * self.nx * self.nu > MAX_TABLE_CELLS:
            raise ValidationError(
                f"alphabet product {self.nc}x{self.nx}x{self.nu} exceeds "
                f"{MAX_TABLE_CELLS} cells"
            )
        _check_pmf("p_cx", self.p_cx.ravel())
        _check_rows("p_u_given_x", self.p_u_given_x)
        _check_rows("q_x_given_u", self.q_x_given_u)
        _check_pmf("q_u", self.q_u)
        if self.p_u_given_x.shape[0] != self.nx:
            raise ValidationError("p_u_given_x must have one row per x symbol")
        if self.q_x_given_u.shape != (self.nu, self.nx):
            raise ValidationError("q_x_given_u must be [U, X]")
        if self.q_u.shape != (self.nu,):
            raise ValidationError("q_u must be [U]")
        if self.has_vade_tables():
            _check_pmf("q_c", self.q_c)
            _check_rows("q_u_given_c", self.q_u_given_c)
            _check_rows("q_c_given_u", self.q_c_given_u)
            mix = self.q_c @ self.q_u_given_c
            if np.max(np.abs(mix - self.q_u)) > ATOL:
                raise ValidationError(
                    "mixture consistency violated: q_u != sum_c q_c * q_u_given_c"
                )
            bayes = (self.q_c[None, :] * self.q_u_given_c.T) / self.q_u[:, None]
            if np.max(np.abs(bayes - self.q_c_given_u)) > ATOL:
                raise ValidationError(
                    "Bayes consistency violated: "
                    "q_c_given_u != q_c * q_u_given_c / q_u"
                )
        return self

    def has_vade_tables(self):
        return self.q_c is not None

    def to_jsonable(self):
        out = {
            "p_cx": self.p_cx.tolist(),
            "p_u_given_x": self.p_u_given_x.tolist(),
            "q_x_given_u": self.q_x_given_u.tolist(),
            "q_u": self.q_u.tolist(),
        }
        if self.has_vade_tables():
            out["q_c"] = self.q_c.tolist()
            out["q_u_given_c"] = self.q_u_given_c.tolist()
            out["q_c_given_u"] = self.q_c_given_u.tolist()
        return out

    # exact marginals of the (C, X, U) joint p(c,x) p(u|x)
    def p_x(self):
        return self.p_cx.sum(axis=0)

    def p_c(self):
        return self.p_cx.sum(axis=1)

    def p_xu(self):
        return self.p_x()[:, None] * self.p_u_given_x

    def p_u(self):
        return self.p_xu().sum(axis=0)

    def p_cu(self):
        return self.p_cx @ self.p_u_given_x

    def p_c_given_x(self):
        px = self.p_x()
        return np.divide(self.p_cx, px[None, :], out=np.zeros_like(self.p_cx),
                         where=px[None, :] > 0)


def _check_pmf(name, v):
    if np.min(v) < 0:
        raise ValidationError(f"{name} has negative entries")
    if abs(float(np.sum(v)) - 1.0) > ATOL:
        raise ValidationError(f"{name} does not sum to 1 (got {float(np.sum(v)):.15f})")


def _check_rows(name, table):
    if np.min(table) < 0:
        raise ValidationError(f"{name} has negative entries")
    sums = table.sum(axis=1)
    worst = int(np.argmax(np.abs(sums - 1.0)))
    if abs(sums[worst] - 1.0) > ATOL:
        raise ValidationError(
            f"{name} row {worst} does not sum to 1 (got {sums[worst]:.15f})"
        )


def entropy(p):
    return -float(xlogy(p, p).sum())


def mutual_information(joint):
    """I between the two axes of a 2-d joint table."""
    a = joint.sum(axis=1)
    b = joint.sum(axis=0)
    return float(rel_entr(joint, np.outer(a, b)).sum())


def conditional_entropy(joint, marginal_axis1):
    """H(axis0 | axis1) from a joint [A, B] and the axis-1 marginal [B]."""
    return -float(rel_entr(joint, np.broadcast_to(marginal_axis1, joint.shape)).sum())


def ib_lagrangian(model: DiscreteModel, s: float) -> float:
    """Relevance-compression objective I(C;U) - s I(X;U), exactly."""
    model.validate()
    return mutual_information(model.p_cu()) - s * mutual_information(model.p_xu())


def upper_bound_objective(model: DiscreteModel, s: float) -> float:
    """-H(X|U) - s [H(U) - H(U|X)]: the objective actually relaxed, equal to
    the information objective plus constants and a non-negative slack."""
    model.validate()
    p_xu = model.p_xu()
    h_x_given_u = conditional_entropy(p_xu, model.p_u())
    h_u = entropy(model.p_u())
    h_u_given_x = conditional_entropy(p_xu.T, model.p_x())
    return -h_x_given_u - s * (h_u - h_u_given_x)


def variational_bound(model: DiscreteModel, s: float) -> float:
    """E[log q(x|u)] - s E_x[KL(p(u|x) || q_u)], exactly over the tables."""
    model.validate()
    p_xu = model.p_xu()
    term1 = float(xlogy(p_xu, model.q_x_given_u.T).sum())
    px = model.p_x()
    term2 = float((px[:, None] * rel_entr(model.p_u_given_x,
                                          model.q_u[None, :])).sum())
    return term1 - s * term2


def vade_bound(model: DiscreteModel, s: float) -> float:
    """Mixture-decomposed form: E[log q(x|u)] - s E_x[KL(p(c|x) || q_c)]
    - s E_x E_{c|x}[KL(p(u|x) || q(u|c))]."""
    model.validate()
    if not model.has_vade_tables():
        raise ValidationError("vade_bound requires q_c, q_u_given_c, q_c_given_u")
    p_xu = model.p_xu()
    term1 = float(xlogy(p_xu, model.q_x_given_u.T).sum())

    p_c_given_x = model.p_c_given_x()  # [C, X]
    px = model.p_x()
    term2 = float((px[None, :] * rel_entr(p_c_given_x,
                                          model.q_c[:, None])).sum())

    # sum_{c,x} p(c,x) KL(p(u|x) || q(u|c))
    kl_ux = rel_entr(model.p_u_given_x[None, :, :],
                     model.q_u_given_c[:, None, :]).sum(axis=2)  # [C, X]
    term3 = float((model.p_cx * kl_ux).sum())
    return term1 - s * (term2 + term3)


def assignment_mismatch_term(model: DiscreteModel) -> float:
    """E_x E_{u|x}[KL(p(c|x) || q(c|u))]: the exact gap between the two bound
    forms, per unit of s."""
    if not model.has_vade_tables():
        raise ValidationError("needs q_c_given_u")
    p_c_given_x = model.p_c_given_x()  # [C, X]
    # sum_{x,u} p(x,u) sum_c p(c|x) log(p(c|x) / q(c|u))
    inner = rel_entr(p_c_given_x[:, :, None],
                     model.q_c_given_u.T[:, None, :]).sum(axis=0)  # [X, U]
    return float((model.p_xu() * inner).sum())


def vade_identity_gap(model: DiscreteModel, s: float) -> float:
    """variational_bound - vade_bound - s * mismatch; identically zero for
    mixture-consistent tables."""
    return (variational_bound(model, s) - vade_bound(model, s)
            - s * assignment_mismatch_term(model))


# ---------------------------------------------------------------------------
# model generators


def random_model(rng, nc, nx, nu) -> DiscreteModel:
    """Random joint, encoder, and (unconstrained) variational tables."""
    return DiscreteModel(
        p_cx=rng.dirichlet(np.ones(nc * nx)).reshape(nc, nx),
        p_u_given_x=rng.dirichlet(np.ones(nu), size=nx),
        q_x_given_u=rng.dirichlet(np.ones(nx), size=nu),
        q_u=rng.dirichlet(np.ones(nu)),
    ).validate()


def with_random_q(model: DiscreteModel, rng) -> DiscreteModel:
    """Same P tables, fresh random Q tables."""
    return DiscreteModel(
        p_cx=model.p_cx,
        p_u_given_x=model.p_u_given_x,
        q_x_given_u=rng.dirichlet(np.ones(model.nx), size=model.nu),
        q_u=rng.dirichlet(np.ones(model.nu)),
    ).validate()


def with_induced_q(model: DiscreteModel) -> DiscreteModel:
    """Q set to the marginals the encoder actually induces; this is the
    unique maximizer of the variational bound."""
    p_xu = model.p_xu()
    p_u = model.p_u()
    q_x_given_u = np.where(
        p_u[:, None] > 0,
        p_xu.T / np.where(p_u[:, None] > 0, p_u[:, None], 1.0),
        1.0 / model.nx,
    )
    return DiscreteModel(
        p_cx=model.p_cx,
        p_u_given_x=model.p_u_given_x,
        q_x_given_u=q_x_given_u,
        q_u=p_u,
    ).validate()


def random_consistent_model(rng, nc, nx, nu) -> DiscreteModel:
    """Random model whose prior tables form an exact mixture: q_u and
    q_c_given_u are derived from (q_c, q_u_given_c)."""
    q_c = rng.dirichlet(np.ones(nc))
    q_u_given_c = rng.dirichlet(np.ones(nu), size=nc)
    q_u = q_c @ q_u_given_c
    q_c_given_u = (q_c[None, :] * q_u_given_c.T) / q_u[:, None]
    return DiscreteModel(
        p_cx=rng.dirichlet(np.ones(nc * nx)).reshape(nc, nx),
        p_u_given_x=rng.dirichlet(np.ones(nu), size=nx),
        q_x_given_u=rng.dirichlet(np.ones(nx), size=nu),
        q_u=q_u,
        q_c=q_c,
        q_u_given_c=q_u_given_c,
        q_c_given_u=q_c_given_u,
    ).validate()


def identity_encoder_model(rng, nc, n) -> DiscreteModel:
    """U = X deterministically, with the mixture prior arranged so the
    variational assignment q(c|u) coincides with the true p(c|x). In this
    configuration the two bound forms agree exactly."""
    p_cx = rng.dirichlet(np.ones(nc * n)).reshape(nc, n)
    p_c = p_cx.sum(axis=1)
    p_x = p_cx.sum(axis=0)
    q_c = p_c
    q_u_given_c = p_cx / p_c[:, None]  # p(x|c), rows
    q_u = q_c @ q_u_given_c  # equals p_x
    q_c_given_u = (q_c[None, :] * q_u_given_c.T) / q_u[:, None]
    return DiscreteModel(
        p_cx=p_cx,
        p_u_given_x=np.eye(n),
        q_x_given_u=rng.dirichlet(np.ones(n), size=n),
        q_u=q_u,
        q_c=q_c,
        q_u_given_c=q_u_given_c,
        q_c_given_u=q_c_given_u,
    ).validate()


# ---------------------------------------------------------------------------
# property suite


def oracle_check(seed=0, trials=200) -> dict:
    """Run every exact property over random models; returns a JSON-ready
    report with per-property pass/fail and worst observed slack."""
    rng = np.random.default_rng(seed)
    report = {"seed": seed, "trials": trials, "properties": {}}

    def prop(name, worst, tol, counterexample=None, count=trials):
        entry = {
            "passed": bool(worst <= tol),
            "trials": count,
            "worst": float(worst),
            "tolerance": tol,
        }
        if not entry["passed"] and counterexample is not None:
            entry["counterexample"] = counterexample.to_jsonable()
        report["properties"][name] = entry

    worst_ineq = -np.inf
    worst_eq = -np.inf
    worst_dpi = -np.inf
    worst_nonneg = -np.inf
    bad_model = None
    for _ in range(trials):
        nc = int(rng.integers(2, 5))
        nx = int(rng.integers(2, 7))
        nu = int(rng.integers(2, 6))
        model = random_model(rng, nc, nx, nu)
        s = float(rng.uniform(0.0, 3.0))
        ub = upper_bound_objective(model, s)
        for _ in range(10):
            q_model = with_random_q(model, rng)
            violation = variational_bound(q_model, s) - ub
            if violation > worst_ineq:
                worst_ineq = violation
                if violation > ATOL:
                    bad_model = q_model
        eq_gap = abs(variational_bound(with_induced_q(model), s) - ub)
        worst_eq = max(worst_eq, eq_gap)
        dpi = mutual_information(model.p_cu()) - mutual_information(model.p_xu())
        worst_dpi = max(worst_dpi, dpi)
        quantities = [
            entropy(model.p_x()),
            entropy(model.p_u()),
            mutual_information(model.p_xu()),
            mutual_information(model.p_cu()),
        ]
        worst_nonneg = max(worst_nonneg, -min(quantities))

    prop("lemma_inequality", worst_ineq, ATOL, bad_model)
    prop("lemma_equality_at_induced_q", worst_eq, ATOL)
    prop("data_processing", worst_dpi, ATOL)
    prop("nonnegative_information", worst_nonneg, ATOL)

    n_consistent = max(trials // 4, 1)
    worst_gap = -np.inf
    worst_order = -np.inf
    bad_model = None
    for _ in range(n_consistent):
        nc = int(rng.integers(2, 5))
        nx = int(rng.integers(2, 7))
        nu = int(rng.integers(2, 6))
        model = random_consistent_model(rng, nc, nx, nu)
        for s in (0.5, 1.0, 2.0):
            gap = abs(vade_identity_gap(model, s))
            if gap > worst_gap:
                worst_gap = gap
                if gap > ATOL:
                    bad_model = model
            order = vade_bound(model, s) - variational_bound(model, s)
            worst_order = max(worst_order, order)

    prop("mixture_decomposition_identity", worst_gap, ATOL, bad_model,
         count=n_consistent)
    prop("mixture_form_is_lower", worst_order, ATOL, count=n_consistent)

    report["all_passed"] = all(p["passed"] for p in report["properties"].values())
    return report
