"""Property suites driven by ``mfswb bench``.

Each suite draws its own random instances from a seed and checks one family
of invariants against an independent computation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .evaluation import exact_w_pp
from .measures import DiscreteMeasure, ProjectedMeasure, dual_potential_1d, wasserstein1d_pp
from .objectives import (
    es_mfswb_grad,
    mfswb_dual_grad,
    s_mfswb_grad,
    sliced_terms,
    swb_grad,
    us_mfswb_grad,
)
from .slicing import energy_weights, sample_uniform_sphere

SLOPE_TARGET = -0.5
SLOPE_TOL = 0.15


@dataclass
class SuiteResult:
    name: str
    passed: int
    total: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def random_instance(rng, K, n, d, L, m=None):
    """Uniform barycenter and K uniform marginals with random Gaussian supports."""
    m = n if m is None else m
    bary = DiscreteMeasure.uniform(rng.standard_normal((n, d)))
    marginals = [DiscreteMeasure.uniform(rng.standard_normal((m, d)) * rng.uniform(0.5, 2.0)
                                         + rng.standard_normal(d)) for _ in range(K)]
    proj = sample_uniform_sphere(L, d, rng)
    return bary, marginals, proj


# --------------------------------------------------------------------------- sandwich

def sandwich_values(bary, marginals, proj, p):
    s = s_mfswb_grad(bary, marginals, proj, p).objective_value
    us = us_mfswb_grad(bary, marginals, proj, p).objective_value
    es = es_mfswb_grad(bary, marginals, proj, p).objective_value
    return s, us, es


def suite_sandwich(cases: int = 200, seed: int = 0, slack: float = 1e-9) -> SuiteResult:
    rng = np.random.default_rng(seed)
    ok = 0
    worst = -np.inf
    for _ in range(cases):
        K = int(rng.integers(2, 6))
        d = int(rng.choice([2, 3, 10]))
        n = int(rng.integers(5, 51))
        L = int(rng.choice([1, 8, 64]))
        p = float(rng.choice([1, 2]))
        s, us, es = sandwich_values(*random_instance(rng, K, n, d, L), p)
        worst = max(worst, s - us, us - es)
        ok += int(s <= us + slack and us <= es + slack)
    return SuiteResult("sandwich", ok, cases, f"max violation {worst:.3e}")


# --------------------------------------------------------------------------- gradients

def _frozen_objective(tag, marginals, proj, p, lam, ref):
    """Objective with projections, selections and importance weights frozen at ``ref``."""
    W_ref, _ = sliced_terms(ref, marginals, proj, p)
    K, L = W_ref.shape
    k_star = np.argmax(W_ref, axis=0)
    k_hat = int(np.argmax(W_ref.mean(axis=1)))
    w_ref = energy_weights(W_ref[k_star, np.arange(L)])

    def value(x):
        W, _ = sliced_terms(ref.with_supports(x), marginals, proj, p)
        sw = W.mean(axis=1)
        if tag == "uswb":
            return sw.mean()
        if tag == "mfswb":
            i, j = np.triu_indices(K, k=1)
            return sw.mean() + lam * 2.0 / (K * (K - 1)) * np.abs(sw[i] - sw[j]).sum()
        if tag == "s":
            return sw[k_hat]
        if tag == "us":
            return W[k_star, np.arange(L)].mean()
        return np.sum(w_ref * W[k_star, np.arange(L)])

    return value


def _grad_for(tag, bary, marginals, proj, p, lam):
    if tag == "uswb":
        return swb_grad(bary, marginals, proj, p)
    if tag == "mfswb":
        return mfswb_dual_grad(bary, marginals, proj, p, lam)
    if tag == "s":
        return s_mfswb_grad(bary, marginals, proj, p)
    if tag == "us":
        return us_mfswb_grad(bary, marginals, proj, p)
    return es_mfswb_grad(bary, marginals, proj, p)


def central_difference(fun, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def well_separated(bary, marginals, proj, p, gap=1e-3):
    """True if no sorting tie, argmax tie or pairwise-distance tie is within ``gap``."""
    for m in [bary, *marginals]:
        v = np.sort(m.supports @ proj.directions.T, axis=0)
        if m.n > 1 and np.min(np.diff(v, axis=0)) < gap:
            return False
    W, _ = sliced_terms(bary, marginals, proj, p)
    if W.shape[0] > 1:
        top2 = np.sort(W, axis=0)[-2:]
        if np.min(top2[1] - top2[0]) < gap:
            return False
        sw = np.sort(W.mean(axis=1))
        if np.min(np.diff(sw)) < gap:
            return False
    return True


def relative_error(g, ref) -> float:
    return float(np.linalg.norm(g - ref) / max(np.linalg.norm(ref), 1e-12))


def suite_gradient(cases: int = 50, seed: int = 0, tol: float = 1e-4, h: float = 1e-5,
                   potential_dirs: int = 10, potential_tol: float = 1e-5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    tags = ("uswb", "mfswb", "s", "us", "es")
    checks = 0
    ok = 0
    worst = 0.0
    done = 0
    while done < cases:
        K = int(rng.integers(2, 5))
        n = int(rng.integers(3, 9))
        d = int(rng.choice([2, 3]))
        L = int(rng.choice([4, 16]))
        p = float(rng.choice([1.0, 2.0]))
        lam = float(rng.uniform(0.1, 10.0))
        bary, marginals, proj = random_instance(rng, K, n, d, L)
        if not well_separated(bary, marginals, proj, p):
            continue
        done += 1
        for tag in tags:
            est = _grad_for(tag, bary, marginals, proj, p, lam)
            fd = central_difference(_frozen_objective(tag, marginals, proj, p, lam, bary), bary.supports, h)
            err = relative_error(est.free_grad, fd)
            worst = max(worst, err)
            checks += 1
            ok += int(err < tol)
    pot_worst = 0.0
    for _ in range(cases):
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        a = ProjectedMeasure(rng.standard_normal(n), rng.dirichlet(np.ones(n)))
        b = ProjectedMeasure(rng.standard_normal(m), rng.dirichlet(np.ones(m)))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        f = dual_potential_1d(a, b, p)
        for _ in range(potential_dirs):
            delta = rng.standard_normal(n)
            delta -= delta.mean()
            step = h * min(1.0, 0.5 * a.weights.min() / np.abs(delta).max())
            up = wasserstein1d_pp(ProjectedMeasure(a.values, a.weights + step * delta), b, p)
            dn = wasserstein1d_pp(ProjectedMeasure(a.values, a.weights - step * delta), b, p)
            err = abs((up - dn) / (2 * step) - f @ delta)
            pot_worst = max(pot_worst, err)
            checks += 1
            ok += int(err < potential_tol)
    return SuiteResult("gradient", ok, checks, f"max rel err {worst:.2e}, max potential err {pot_worst:.2e}")


# --------------------------------------------------------------------------- 1D / exact OT oracles

def permutation_oracle(x, y, p):
    """Minimal mean matching cost over every permutation (``n <= 8``)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64).T).T
    y = np.atleast_2d(np.asarray(y, dtype=np.float64).T).T
    n = x.shape[0]
    C = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1) ** p
    best = np.inf
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        best = min(best, C[rows, list(perm)].mean())
    return best


def suite_oracle(cases: int = 1000, seed: int = 0, slack: float = 1e-9) -> SuiteResult:
    rng = np.random.default_rng(seed)
    ok = 0
    worst = 0.0
    total = 0
    for _ in range(cases):
        n = int(rng.integers(1, 8))
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        x, y = rng.normal(size=n) * 3, rng.normal(size=n) * 3
        err = abs(wasserstein1d_pp(x, y, p) - permutation_oracle(x[:, None], y[:, None], p))
        worst = max(worst, err)
        ok += int(err <= slack)
        total += 1
    for _ in range(max(cases // 20, 1)):
        n = int(rng.integers(1, 8))
        p = float(rng.choice([1.0, 2.0]))
        a = DiscreteMeasure.uniform(rng.normal(size=(n, 3)))
        b = DiscreteMeasure.uniform(rng.normal(size=(n, 3)))
        err = abs(exact_w_pp(a, b, p) - permutation_oracle(a.supports, b.supports, p))
        worst = max(worst, err)
        ok += int(err <= slack)
        total += 1
    return SuiteResult("oracle", ok, total, f"max abs err {worst:.2e}")


# --------------------------------------------------------------------------- Monte Carlo rate

def mc_slope(Ls=(10, 100, 1000), resamples: int = 200, seed: int = 0, K=3, n=10, d=3) -> float:
    """Log-log slope of the std of one us-MFSWB gradient component against L."""
    rng = np.random.default_rng(seed)
    bary, marginals, _ = random_instance(rng, K, n, d, 1)
    stds = []
    for L in Ls:
        comps = [us_mfswb_grad(bary, marginals, sample_uniform_sphere(L, d, rng)).free_grad[0, 0]
                 for _ in range(resamples)]
        stds.append(np.std(comps, ddof=1))
    slope, _ = np.polyfit(np.log(Ls), np.log(stds), 1)
    return float(slope)


def suite_mc_slope(cases: int = 200, seed: int = 0) -> SuiteResult:
    slope = mc_slope(resamples=cases, seed=seed)
    ok = abs(slope - SLOPE_TARGET) <= SLOPE_TOL
    return SuiteResult("mc-slope", int(ok), 1, f"slope {slope:.3f}")


SUITES = {
    "sandwich": (suite_sandwich, 200),
    "gradient": (suite_gradient, 50),
    "oracle": (suite_oracle, 1000),
    "mc-slope": (suite_mc_slope, 200),
}


def run_suites(names=None, cases: int | None = None, seed: int = 0):
    names = list(SUITES) if not names else names
    results = []
    for name in names:
        fn, default_cases = SUITES[name]
        results.append(fn(cases=cases or default_cases, seed=seed))
    return results


