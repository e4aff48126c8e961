"""Exact discrete Wasserstein distances and the fairness (F) / centerness (W) metrics."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist

from .measures import DiscreteMeasure

ASSIGNMENT_CAP = 4096


def cost_matrix(x, y, p: float = 2.0) -> np.ndarray:
    if p == 2:
        return cdist(x, y, "sqeuclidean")
    return cdist(x, y, "euclidean") ** p


def _transport_lp(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> float:
    n, m = C.shape
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)])
    cols = np.concatenate([np.arange(n * m), np.arange(n * m)])
    A = coo_matrix((np.ones(2 * n * m), (rows, cols)), shape=(n + m, n * m)).tocsr()
    # the mass-balance rows are rank n+m-1; drop one to keep HiGHS happy
    res = linprog(C.ravel(), A_eq=A[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def exact_w_pp(a: DiscreteMeasure, b: DiscreteMeasure, p: float = 2.0) -> float:
    """Optimal transport cost ``W_p^p(a, b)`` with ground cost ``||x - y||^p``.

    Equal-size uniform measures are solved as an assignment problem;
    anything else goes through the transport linear program.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    C = cost_matrix(a.supports, b.supports, p)
    if a.n == b.n and a.is_uniform and b.is_uniform:
        r, c = linear_sum_assignment(C)
        return float(C[r, c].mean())
    return max(_transport_lp(a.weights, b.weights, C), 0.0)


def distances_to_marginals(bary, marginals: Sequence[DiscreteMeasure], p: float = 2.0) -> np.ndarray:
    return np.array([exact_w_pp(bary, m, p) for m in marginals])


def fairness_from_distances(dists) -> float:
    dists = np.asarray(dists, dtype=np.float64)
    K = dists.shape[0]
    if K < 2:
        raise ValueError("F-metric needs at least two marginals")
    i, j = np.triu_indices(K, k=1)
    return float(np.abs(dists[i] - dists[j]).sum() * 2.0 / (K * (K - 1)))


def f_metric(bary, marginals, p: float = 2.0) -> float:
    """Mean absolute pairwise gap of the exact distances to the marginals."""
    if len(marginals) < 2:
        raise ValueError("F-metric needs at least two marginals")
    return fairness_from_distances(distances_to_marginals(bary, marginals, p))


def w_metric(bary, marginals, p: float = 2.0) -> float:
    """Mean exact distance to the marginals."""
    if len(marginals) < 1:
        raise ValueError("W-metric needs at least one marginal")
    return float(distances_to_marginals(bary, marginals, p).mean())


def subsample_for_eval(m: DiscreteMeasure, cap: int, seed) -> DiscreteMeasure:
    """At most ``cap`` supports drawn without replacement proportionally to the weights."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if m.n <= cap:
        return m
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(m.n, size=cap, replace=False, p=m.weights))
    return DiscreteMeasure.uniform(m.supports[idx])


def make_evaluator(marginals: Sequence[DiscreteMeasure], p: float = 2.0, cap: int = ASSIGNMENT_CAP, seed: int = 0):
    """Callback returning ``(F, W)`` for a barycenter.

    Marginals are subsampled once; the barycenter is subsampled with the same
    seed on each call so a given iterate always sees the same subset.
    """
    subs = [subsample_for_eval(m, cap, (seed, k)) for k, m in enumerate(marginals)]

    def evaluate(bary: DiscreteMeasure):
        b = subsample_for_eval(bary, cap, (seed, len(subs)))
        dists = distances_to_marginals(b, subs, p)
        F = fairness_from_distances(dists) if len(subs) >= 2 else 0.0
        return F, float(dists.mean())

    return evaluate
