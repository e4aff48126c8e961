"""Discrete measures, projections to the line and closed-form 1D optimal transport."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHT_TOL = 1e-9


class ContractError(ValueError):
    """Raised when inputs are valid measures but unsuitable for the requested path."""


def _check_weights(weights: np.ndarray, name: str = "weights") -> None:
    if weights.ndim != 1 or weights.size == 0:
        raise ValueError(f"{name} must be a non-empty 1D array")
    if not np.all(np.isfinite(weights)):
        raise ValueError(f"{name} contain non-finite entries")
    if np.any(weights < 0):
        raise ValueError(f"{name} must be nonnegative")
    total = weights.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{name} sum to {total!r}, expected 1")


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i weights[i] * delta_{supports[i]}``."""

    supports: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.supports, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        w = np.asarray(self.weights, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"supports must be an (n, d) array with n, d >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("supports contain non-finite coordinates")
        _check_weights(w)
        if w.shape[0] != x.shape[0]:
            raise ValueError(f"{w.shape[0]} weights for {x.shape[0]} supports")
        object.__setattr__(self, "supports", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, supports) -> "DiscreteMeasure":
        x = np.asarray(supports, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        n = x.shape[0]
        return cls(x, np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.supports.shape[0]

    @property
    def dim(self) -> int:
        return self.supports.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.ptp(self.weights) <= 1e-15)

    def with_supports(self, supports) -> "DiscreteMeasure":
        return DiscreteMeasure(supports, self.weights)

    def with_weights(self, weights) -> "DiscreteMeasure":
        return DiscreteMeasure(self.supports, weights)


@dataclass(frozen=True)
class ProjectedMeasure:
    """A measure pushed forward onto the line: support values and their weights."""

    values: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_uniform(self) -> bool:
        return bool(np.ptp(self.weights) <= 1e-15)


def project(measure: DiscreteMeasure, direction) -> ProjectedMeasure:
    theta = np.asarray(direction, dtype=np.float64).reshape(-1)
    if theta.shape[0] != measure.dim:
        raise ValueError(f"direction has length {theta.shape[0]}, supports have dimension {measure.dim}")
    norm = np.linalg.norm(theta)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must have unit norm, got {norm!r}")
    return ProjectedMeasure(measure.supports @ theta, measure.weights)


def _as_projected(m) -> ProjectedMeasure:
    if isinstance(m, ProjectedMeasure):
        return m
    values = np.asarray(m, dtype=np.float64).reshape(-1)
    return ProjectedMeasure(values, np.full(values.shape[0], 1.0 / values.shape[0]))


def ground_cost(x, y, p: float):
    return np.abs(x - y) ** p


def quantile_coupling(a: ProjectedMeasure, b: ProjectedMeasure):
    """Monotone (quantile) coupling of two 1D measures.

    The unit interval is cut at every cumulative-weight breakpoint of either
    measure; on each piece both quantile functions are constant.

    Returns:
        ia, ib: original support indices in ``a`` and ``b`` for every piece.
        mass: length of every piece (the transported mass), all > 0.
    """
    sa = np.argsort(a.values, kind="stable")
    sb = np.argsort(b.values, kind="stable")
    ca = np.cumsum(a.weights[sa])
    cb = np.cumsum(b.weights[sb])
    ca /= ca[-1]
    cb /= cb[-1]
    hi = np.union1d(ca, cb)
    lo = np.concatenate(([0.0], hi[:-1]))
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    mid = 0.5 * (lo + hi)
    ia = np.minimum(np.searchsorted(ca, mid, side="left"), a.n - 1)
    ib = np.minimum(np.searchsorted(cb, mid, side="left"), b.n - 1)
    return sa[ia], sb[ib], hi - lo


def quantile_cost(a: ProjectedMeasure, b: ProjectedMeasure, p: float) -> float:
    """Exact integral of ``|F_a^{-1} - F_b^{-1}|^p`` over [0, 1]."""
    ia, ib, mass = quantile_coupling(a, b)
    return float(np.sum(mass * ground_cost(a.values[ia], b.values[ib], p)))


def sorted_pairing_cost(a: ProjectedMeasure, b: ProjectedMeasure, p: float) -> float:
    if a.n != b.n:
        raise ContractError("sorted pairing needs equal support counts")
    va = np.sort(a.values, kind="stable")
    vb = np.sort(b.values, kind="stable")
    return float(np.mean(ground_cost(va, vb, p)))


def _validate_pair(a: ProjectedMeasure, b: ProjectedMeasure, p: float) -> None:
    _check_weights(np.asarray(a.weights), "first weights")
    _check_weights(np.asarray(b.weights), "second weights")
    if not (np.isfinite(p) and p >= 1):
        raise ValueError(f"order p must be finite and >= 1, got {p!r}")


def wasserstein1d_pp(a, b, p: float = 2.0) -> float:
    """``W_p^p`` between two measures on the line.

    Plain arrays are treated as uniform empirical measures.
    """
    a, b = _as_projected(a), _as_projected(b)
    _validate_pair(a, b, p)
    if a.n == b.n and a.is_uniform and b.is_uniform:
        return sorted_pairing_cost(a, b, p)
    return quantile_cost(a, b, p)


def sorted_matching(a, b) -> np.ndarray:
    """Optimal matching ``sigma`` with ``a[i]`` sent to ``b[sigma[i]]`` (0-based)."""
    a, b = _as_projected(a), _as_projected(b)
    if a.n != b.n:
        raise ContractError(f"sorted matching needs equal sizes, got {a.n} and {b.n}")
    if not (a.is_uniform and b.is_uniform):
        raise ContractError("sorted matching needs uniform weights; use the quantile coupling")
    order_a = np.argsort(a.values, kind="stable")
    order_b = np.argsort(b.values, kind="stable")
    sigma = np.empty(a.n, dtype=np.intp)
    sigma[order_a] = order_b
    return sigma


def _nw_sweep(xa, wa, xb, wb, p, i_first):
    n, m = xa.shape[0], xb.shape[0]
    f = np.empty(n)
    g = np.empty(m)
    i = j = 0
    f[0] = 0.0
    g[0] = abs(xa[0] - xb[0]) ** p
    ra, rb = wa[0], wb[0]
    while i < n - 1 or j < m - 1:
        if i_first:
            move_i = j == m - 1 or (i < n - 1 and ra <= rb)
        else:
            move_i = not (i == n - 1 or (j < m - 1 and rb <= ra))
        if move_i:
            rb -= ra
            i += 1
            ra = wa[i]
            f[i] = abs(xa[i] - xb[j]) ** p - g[j]
        else:
            ra -= rb
            j += 1
            rb = wb[j]
            g[j] = abs(xa[i] - xb[j]) ** p - f[i]
    return f, g


def dual_potentials_1d(a, b, p: float = 2.0):
    """Kantorovich potentials ``(f, g)`` of 1D OT from a north-west-corner sweep.

    Both measures are sorted and mass is pushed along the staircase of the
    monotone coupling. Every visited cell ``(i, j)`` is a basic cell, so
    ``f[i] + g[j] = c(i, j)`` on it. When both residuals vanish together the
    staircase is degenerate and either neighbouring zero-mass cell can join
    the basis; the sweep is run both ways and the two optimal duals averaged,
    which keeps the result symmetric in ``a`` and ``b`` and constant when
    ``a == b``.
    """
    a, b = _as_projected(a), _as_projected(b)
    _validate_pair(a, b, p)
    sa = np.argsort(a.values, kind="stable")
    sb = np.argsort(b.values, kind="stable")
    xa, wa = a.values[sa], a.weights[sa] / a.weights.sum()
    xb, wb = b.values[sb], b.weights[sb] / b.weights.sum()
    f1, g1 = _nw_sweep(xa, wa, xb, wb, p, True)
    f2, g2 = _nw_sweep(xa, wa, xb, wb, p, False)
    f_out = np.empty(xa.shape[0])
    g_out = np.empty(xb.shape[0])
    f_out[sa] = 0.5 * (f1 + f2)
    g_out[sb] = 0.5 * (g1 + g2)
    return f_out, g_out


def dual_potential_1d(a, b, p: float = 2.0) -> np.ndarray:
    """First Kantorovich potential: the gradient of ``W_p^p(a, b)`` in a's weights (up to a constant)."""
    return dual_potentials_1d(a, b, p)[0]
