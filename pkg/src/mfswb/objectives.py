"""Barycenter objectives and their stochastic gradient estimators.

Every estimator follows the same pattern on a shared set of projections:
compute the matrix ``W[k, l] = W_p^p(theta_l # bary, theta_l # marginal_k)``,
turn it into a coefficient matrix ``C`` (selections and importance weights are
held fixed), and return ``sum_kl C[k, l] * grad W[k, l]``. The coefficient
rule is what distinguishes the five methods.

Free-support gradients are exact derivatives with respect to the support
coordinates, so they carry the ``1/n`` mass of each support. The optimizer
divides by the support weights to recover the per-particle step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measures import (
    DiscreteMeasure,
    ProjectedMeasure,
    dual_potential_1d,
    quantile_coupling,
)
from .slicing import ProjectionSet, energy_weights

METHODS = ("uswb", "mfswb", "s", "us", "es")
TIE_BREAK_RULE = "smallest-index-v1"

_ALIASES = {
    "swb": "uswb",
    "dual": "mfswb",
    "mfswb_dual": "mfswb",
    "s_mfswb": "s",
    "s-mfswb": "s",
    "us_mfswb": "us",
    "us-mfswb": "us",
    "es_mfswb": "es",
    "es-mfswb": "es",
}


@dataclass(frozen=True)
class Method:
    tag: str = "uswb"
    lam: float = 0.0
    omega: np.ndarray | None = None

    def __post_init__(self):
        tag = _ALIASES.get(self.tag.lower(), self.tag.lower())
        if tag not in METHODS:
            raise ValueError(f"unknown method {self.tag!r}; expected one of {METHODS}")
        object.__setattr__(self, "tag", tag)
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        if self.omega is not None:
            omega = np.asarray(self.omega, dtype=np.float64)
            if np.any(omega < 0) or abs(omega.sum() - 1.0) > 1e-9:
                raise ValueError("omega must be nonnegative and sum to 1")
            object.__setattr__(self, "omega", omega)


@dataclass
class GradientEstimate:
    objective_value: float
    free_grad: np.ndarray | None = None
    fixed_grad: np.ndarray | None = None
    per_marginal: np.ndarray | None = None  # (1/L) sum_l W[k, l] for every k
    selected: np.ndarray | int | None = field(default=None)

    @property
    def grad(self) -> np.ndarray:
        return self.free_grad if self.free_grad is not None else self.fixed_grad


def _check_inputs(bary: DiscreteMeasure, marginals: Sequence[DiscreteMeasure], proj: ProjectionSet, k_min=1):
    if len(marginals) < k_min:
        raise ValueError(f"need at least {k_min} marginal(s), got {len(marginals)}")
    d = bary.dim
    for k, m in enumerate(marginals):
        if m.dim != d:
            raise ValueError(f"marginal {k} has dimension {m.dim}, barycenter has {d}")
    if proj.dim != d:
        raise ValueError(f"projections have dimension {proj.dim}, barycenter has {d}")


def _sliced_terms_uniform(x, y, theta, p):
    """Equal-size uniform case, vectorized over projections.

    Returns ``W`` of shape (L,) and ``D`` of shape (n, L) where
    ``D[i, l]`` is the derivative of ``W[l]`` w.r.t. ``theta_l . x_i``.
    """
    xp = x @ theta.T
    yp = np.sort(y @ theta.T, axis=0, kind="stable")
    order = np.argsort(xp, axis=0, kind="stable")
    diff_sorted = np.take_along_axis(xp, order, axis=0) - yp
    n = x.shape[0]
    w = np.mean(np.abs(diff_sorted) ** p, axis=0)
    d_sorted = (p / n) * np.abs(diff_sorted) ** (p - 1) * np.sign(diff_sorted)
    deriv = np.empty_like(d_sorted)
    np.put_along_axis(deriv, order, d_sorted, axis=0)
    return w, deriv


def _sliced_terms_general(bary, marginal, theta, p):
    """Arbitrary sizes and weights: one quantile coupling per projection."""
    L = theta.shape[0]
    n = bary.n
    w = np.empty(L)
    deriv = np.zeros((n, L))
    xp_all = bary.supports @ theta.T
    yp_all = marginal.supports @ theta.T
    for l in range(L):
        a = ProjectedMeasure(xp_all[:, l], bary.weights)
        b = ProjectedMeasure(yp_all[:, l], marginal.weights)
        ia, ib, mass = quantile_coupling(a, b)
        diff = a.values[ia] - b.values[ib]
        w[l] = np.sum(mass * np.abs(diff) ** p)
        deriv[:, l] = np.bincount(ia, weights=mass * p * np.abs(diff) ** (p - 1) * np.sign(diff), minlength=n)
    return w, deriv


def _fixed_terms(bary, marginal, theta, p):
    """Fixed-support case: ``W`` of shape (L,) and dual potentials (n, L)."""
    L = theta.shape[0]
    w = np.empty(L)
    pot = np.empty((bary.n, L))
    xp_all = bary.supports @ theta.T
    yp_all = marginal.supports @ theta.T
    for l in range(L):
        a = ProjectedMeasure(xp_all[:, l], bary.weights)
        b = ProjectedMeasure(yp_all[:, l], marginal.weights)
        ia, ib, mass = quantile_coupling(a, b)
        w[l] = np.sum(mass * np.abs(a.values[ia] - b.values[ib]) ** p)
        f = dual_potential_1d(a, b, p)
        # potentials are defined up to a constant; pin the weighted mean to zero
        pot[:, l] = f - np.dot(a.weights, f)
    return w, pot


def sliced_terms(bary: DiscreteMeasure, marginals: Sequence[DiscreteMeasure], proj: ProjectionSet,
                 p: float = 2.0, support: str = "free"):
    """Per-(marginal, projection) 1D costs and their derivative fields.

    Returns ``W`` with shape (K, L) and a list of K arrays of shape (n, L).
    For ``support="free"`` entry ``[i, l]`` is the derivative w.r.t. the
    projected coordinate of support i; for ``"fixed"`` it is the dual
    potential at support i.
    """
    theta = proj.directions
    W = np.empty((len(marginals), theta.shape[0]))
    derivs = []
    for k, m in enumerate(marginals):
        if support == "fixed":
            w, dk = _fixed_terms(bary, m, theta, p)
        elif support == "free":
            if bary.n == m.n and bary.is_uniform and m.is_uniform:
                w, dk = _sliced_terms_uniform(bary.supports, m.supports, theta, p)
            else:
                w, dk = _sliced_terms_general(bary, m, theta, p)
        else:
            raise ValueError(f"support must be 'free' or 'fixed', got {support!r}")
        W[k] = w
        derivs.append(dk)
    return W, derivs


def _assemble(C, W, derivs, proj, support):
    """Gradient ``sum_kl C[k, l] grad W[k, l]`` with a fixed reduction order."""
    field_ = np.zeros_like(derivs[0])
    for k in range(C.shape[0]):
        if np.any(C[k] != 0):
            field_ += derivs[k] * C[k]
    if support == "free":
        return {"free_grad": field_ @ proj.directions}
    return {"fixed_grad": field_.sum(axis=1)}


def _argmax_first(values, axis=None):
    # np.argmax returns the first maximal index, i.e. strict ">" scanning
    return np.argmax(values, axis=axis)


def swb_grad(bary, marginals, proj, p=2.0, omega=None, support="free") -> GradientEstimate:
    """Weighted sliced Wasserstein barycenter objective ``sum_k omega_k SW_p^p``."""
    _check_inputs(bary, marginals, proj)
    K, L = len(marginals), proj.L
    omega = np.full(K, 1.0 / K) if omega is None else np.asarray(omega, dtype=np.float64)
    if omega.shape != (K,):
        raise ValueError(f"omega has shape {omega.shape}, expected ({K},)")
    W, derivs = sliced_terms(bary, marginals, proj, p, support)
    C = np.repeat(omega[:, None] / L, L, axis=1)
    sw = W.mean(axis=1)
    return GradientEstimate(float(np.sum(C * W)), per_marginal=sw, **_assemble(C, W, derivs, proj, support))


def _pairwise_gap(sw):
    K = sw.shape[0]
    i, j = np.triu_indices(K, k=1)
    return np.sum(np.abs(sw[i] - sw[j])) * 2.0 / (K * (K - 1))


def mfswb_dual_grad(bary, marginals, proj, p=2.0, lam=1.0, support="free") -> GradientEstimate:
    """Lagrangian of the fairness-constrained barycenter (``-lambda*eps`` dropped).

    Uses the subgradient ``sign(SW_i - SW_j)`` with ``sign(0) = 0``.
    """
    _check_inputs(bary, marginals, proj, k_min=2)
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam!r}")
    K, L = len(marginals), proj.L
    W, derivs = sliced_terms(bary, marginals, proj, p, support)
    sw = W.mean(axis=1)
    base = np.full(K, 1.0 / K)
    signs = np.sign(sw[:, None] - sw[None, :]).sum(axis=1)
    coef = base + lam * (2.0 / (K * (K - 1))) * signs
    C = np.repeat(coef[:, None] / L, L, axis=1)
    C0 = np.repeat(base[:, None] / L, L, axis=1)
    objective = float(np.sum(C0 * W)) + lam * _pairwise_gap(sw)
    return GradientEstimate(objective, per_marginal=sw, **_assemble(C, W, derivs, proj, support))


def s_mfswb_grad(bary, marginals, proj, p=2.0, support="free") -> GradientEstimate:
    """Maximum over marginals of the Monte Carlo SW estimate."""
    _check_inputs(bary, marginals, proj)
    K, L = len(marginals), proj.L
    W, derivs = sliced_terms(bary, marginals, proj, p, support)
    sw = W.mean(axis=1)
    k_star = int(_argmax_first(sw))
    C = np.zeros((K, L))
    C[k_star] = 1.0 / L
    return GradientEstimate(float(sw[k_star]), per_marginal=sw, selected=k_star,
                            **_assemble(C, W, derivs, proj, support))


def us_mfswb_grad(bary, marginals, proj, p=2.0, support="free") -> GradientEstimate:
    """Mean over projections of the per-projection maximal 1D cost."""
    _check_inputs(bary, marginals, proj)
    K, L = len(marginals), proj.L
    W, derivs = sliced_terms(bary, marginals, proj, p, support)
    k_star = _argmax_first(W, axis=0)
    cols = np.arange(L)
    C = np.zeros((K, L))
    C[k_star, cols] = 1.0 / L
    return GradientEstimate(float(np.mean(W[k_star, cols])), per_marginal=W.mean(axis=1), selected=k_star,
                            **_assemble(C, W, derivs, proj, support))


def es_mfswb_grad(bary, marginals, proj, p=2.0, support="free", through_weights=False) -> GradientEstimate:
    """Energy-reweighted version of :func:`us_mfswb_grad`.

    By default the softmax weights over projections are treated as constants
    when differentiating. ``through_weights=True`` differentiates the full
    self-normalized estimate instead, using
    ``d(sum_l w_l a_l)/d a_j = w_j * (1 + a_j - sum_l w_l a_l)``.
    """
    _check_inputs(bary, marginals, proj)
    K, L = len(marginals), proj.L
    W, derivs = sliced_terms(bary, marginals, proj, p, support)
    k_star = _argmax_first(W, axis=0)
    cols = np.arange(L)
    a = W[k_star, cols]
    w = energy_weights(a)
    value = float(np.sum(w * a))
    C = np.zeros((K, L))
    C[k_star, cols] = w * (1.0 + a - value) if through_weights else w
    return GradientEstimate(value, per_marginal=W.mean(axis=1), selected=k_star,
                            **_assemble(C, W, derivs, proj, support))


def estimate(method: Method, bary, marginals, proj, p=2.0, support="free") -> GradientEstimate:
    """Dispatch to the estimator selected by ``method``."""
    tag = method.tag
    if tag == "uswb":
        return swb_grad(bary, marginals, proj, p, omega=method.omega, support=support)
    if tag == "mfswb":
        return mfswb_dual_grad(bary, marginals, proj, p, lam=method.lam, support=support)
    if tag == "s":
        return s_mfswb_grad(bary, marginals, proj, p, support=support)
    if tag == "us":
        return us_mfswb_grad(bary, marginals, proj, p, support=support)
    return es_mfswb_grad(bary, marginals, proj, p, support=support)
