"""Stochastic gradient descent over barycenter supports or weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .measures import DiscreteMeasure
from .objectives import Method, estimate
from .slicing import iteration_seed, sample_uniform_sphere

Evaluator = Callable[[DiscreteMeasure], tuple[float, float]]


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, what: str = "parameters"):
        super().__init__(f"non-finite {what} at iteration {iteration}; step size too large?")
        self.iteration = iteration


@dataclass(frozen=True)
class BarycenterConfig:
    method: Method = field(default_factory=Method)
    p: float = 2.0
    L: int = 100
    lr: float = 0.01
    iters: int = 1000
    seed: int = 0
    metrics_every: int = 1000
    snapshot_every: int = 0  # 0 disables strided snapshots
    checkpoints: tuple[int, ...] = ()  # extra iterations recorded for metrics and snapshots

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError(f"lr must be >= 0, got {self.lr!r}")
        if self.iters < 1 or self.L < 1 or self.metrics_every < 1:
            raise ValueError("iters, L and metrics_every must all be >= 1")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")

    def projections(self, t: int, d: int):
        return sample_uniform_sphere(self.L, d, iteration_seed(self.seed, t))


@dataclass(frozen=True)
class MetricsRecord:
    iteration: int
    F: float
    W: float
    objective: float


@dataclass
class RunTrace:
    records: list[MetricsRecord] = field(default_factory=list)
    snapshots: list[tuple[int, DiscreteMeasure]] = field(default_factory=list)
    objectives: np.ndarray | None = None  # objective estimate at every iteration 0..iters

    @property
    def final(self) -> DiscreteMeasure:
        return self.snapshots[-1][1]

    def snapshot_at(self, iteration: int) -> DiscreteMeasure:
        for t, m in self.snapshots:
            if t == iteration:
                return m
        raise KeyError(iteration)

    def record_at(self, iteration: int) -> MetricsRecord:
        for r in self.records:
            if r.iteration == iteration:
                return r
        raise KeyError(iteration)


def _metrics_due(t: int, cfg: BarycenterConfig) -> bool:
    return t == 0 or t == cfg.iters or t % cfg.metrics_every == 0 or t in cfg.checkpoints


def _snapshot_due(t: int, cfg: BarycenterConfig) -> bool:
    every = cfg.snapshot_every
    return t == cfg.iters or (every > 0 and t % every == 0) or t in cfg.checkpoints


def _run(init: DiscreteMeasure, marginals: Sequence[DiscreteMeasure], cfg: BarycenterConfig,
         evaluator: Evaluator | None, support: str, step):
    bary = init
    trace = RunTrace()
    objectives = np.empty(cfg.iters + 1)
    for t in range(cfg.iters + 1):
        proj = cfg.projections(t, bary.dim)
        est = estimate(cfg.method, bary, marginals, proj, cfg.p, support=support)
        if not np.isfinite(est.objective_value) or not np.all(np.isfinite(est.grad)):
            raise DivergenceError(t, "objective or gradient")
        objectives[t] = est.objective_value
        if _metrics_due(t, cfg):
            F, W = evaluator(bary) if evaluator is not None else (np.nan, np.nan)
            trace.records.append(MetricsRecord(t, float(F), float(W), est.objective_value))
        if _snapshot_due(t, cfg):
            trace.snapshots.append((t, bary))
        if t == cfg.iters:
            break
        bary = step(bary, est, t)
    trace.objectives = objectives
    return trace


def run_free_support(init: DiscreteMeasure, marginals: Sequence[DiscreteMeasure], cfg: BarycenterConfig,
                     evaluator: Evaluator | None = None) -> RunTrace:
    """Optimize support locations with the weights held fixed.

    Each step moves support ``i`` by ``-lr * grad_i / weight_i``, the
    per-particle form of the sliced gradient (for uniform weights this is
    ``n`` times the raw coordinate gradient).
    """
    w = init.weights
    scale = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0)[:, None]

    def step(bary, est, t):
        x = bary.supports - cfg.lr * (est.free_grad * scale)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t + 1)
        return DiscreteMeasure(x, w)

    return _run(init, marginals, cfg, evaluator, "free", step)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    if np.all(v >= 0) and abs(v.sum() - 1.0) <= 1e-15:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    w = np.maximum(v - tau, 0.0)
    return w / w.sum()


def run_fixed_support(init_weights, support_grid, marginals: Sequence[DiscreteMeasure], cfg: BarycenterConfig,
                      evaluator: Evaluator | None = None) -> RunTrace:
    """Optimize barycenter weights on a fixed grid by projected gradient descent."""
    init = DiscreteMeasure(support_grid, init_weights)

    def step(bary, est, t):
        v = bary.weights - cfg.lr * est.fixed_grad
        if not np.all(np.isfinite(v)):
            raise DivergenceError(t + 1)
        return bary.with_weights(project_simplex(v))

    return _run(init, marginals, cfg, evaluator, "fixed", step)
