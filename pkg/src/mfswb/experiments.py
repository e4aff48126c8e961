"""Problem builders and runners for the Gaussian, point-cloud and color experiments."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .evaluation import ASSIGNMENT_CAP, make_evaluator
from .measures import DiscreteMeasure
from .objectives import TIE_BREAK_RULE, Method
from .optimizer import BarycenterConfig, RunTrace, run_free_support

GAUSS_CENTERS = np.array([[0.0, 0.0], [20.0, 0.0], [18.0, 8.0], [18.0, -8.0]])
GAUSS_INIT_MEAN = np.array([0.0, -5.0])


@dataclass(frozen=True)
class Defaults:
    lr: float
    L: int
    iters: int
    metrics_every: int
    checkpoints: tuple[int, ...]


GAUSS_DEFAULTS = Defaults(lr=0.01, L=100, iters=50000, metrics_every=1000, checkpoints=(0, 1000, 5000))
POINTCLOUD_DEFAULTS = Defaults(lr=0.01, L=10, iters=10000, metrics_every=1000, checkpoints=(0, 1000, 5000, 10000))
COLOR_DEFAULTS = Defaults(lr=0.0001, L=10, iters=20000, metrics_every=5000, checkpoints=(0, 5000, 10000, 20000))


def gaussian_problem(seed: int = 0, n: int = 100):
    """Four 2D Gaussian marginals (identity covariance) and the shifted initial barycenter."""
    rng = np.random.default_rng(seed)
    marginals = [DiscreteMeasure.uniform(rng.standard_normal((n, 2)) + c) for c in GAUSS_CENTERS]
    init = DiscreteMeasure.uniform(rng.standard_normal((n, 2)) + GAUSS_INIT_MEAN)
    return init, marginals


def sphere_surface(n: int, rng, center=(0.0, 0.0, 0.0), radius: float = 1.0, d: int = 3) -> np.ndarray:
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center) + radius * v


def cube_surface(n: int, rng, half_width: float = 1.0) -> np.ndarray:
    """Uniform samples on the surface of the cube ``[-h, h]^3``."""
    pts = rng.uniform(-half_width, half_width, size=(n, 3))
    face_axis = rng.integers(0, 3, size=n)
    face_sign = rng.choice([-1.0, 1.0], size=n)
    pts[np.arange(n), face_axis] = face_sign * half_width
    return pts


def sphere_init(marginals, seed: int) -> DiscreteMeasure:
    """Sphere at the marginals' mean with the mean marginal radius."""
    centers = np.array([m.weights @ m.supports for m in marginals])
    radii = [m.weights @ np.linalg.norm(m.supports - c, axis=1) for m, c in zip(marginals, centers)]
    rng = np.random.default_rng(seed)
    n = marginals[0].n
    return DiscreteMeasure.uniform(sphere_surface(n, rng, centers.mean(axis=0), float(np.mean(radii)),
                                                  d=marginals[0].dim))


def resample_to(m: DiscreteMeasure, n: int, rng) -> DiscreteMeasure:
    """Uniform resample of ``m`` onto exactly ``n`` supports."""
    if m.n == n and m.is_uniform:
        return m
    idx = rng.choice(m.n, size=n, replace=m.n < n, p=m.weights)
    return DiscreteMeasure.uniform(m.supports[np.sort(idx)])


def manifest(subcommand: str, cfg: BarycenterConfig, **extra) -> dict:
    from . import __version__

    out = {
        "subcommand": subcommand,
        "version": __version__,
        "method": cfg.method.tag,
        "lambda": cfg.method.lam,
        "p": cfg.p,
        "projections": cfg.L,
        "lr": cfg.lr,
        "iters": cfg.iters,
        "seed": cfg.seed,
        "metrics_every": cfg.metrics_every,
        "checkpoints": list(cfg.checkpoints),
        "tie_break": TIE_BREAK_RULE,
        "seed_derivation": "splitmix64(splitmix64(seed) ^ t)",
    }
    out.update(extra)
    return out


def _write_outputs(out: Path, trace: RunTrace, man: dict, snapshot_writer):
    out.mkdir(parents=True, exist_ok=True)
    io.write_manifest(man, out / "manifest.json")
    io.write_metrics_csv(trace, out / "metrics.csv")
    for t, m in trace.snapshots:
        snapshot_writer(t, m)


def run_gauss(cfg: BarycenterConfig, out: Path | None = None, eval_cap: int = ASSIGNMENT_CAP) -> RunTrace:
    init, marginals = gaussian_problem(cfg.seed)
    evaluator = make_evaluator(marginals, cfg.p, eval_cap, cfg.seed)
    trace = run_free_support(init, marginals, cfg, evaluator)
    if out is not None:
        out = Path(out)
        man = manifest("gauss", cfg, eval_cap=eval_cap)
        _write_outputs(out, trace, man, lambda t, m: io.write_points(m.supports, out / f"barycenter_{t:06d}.xy"))
        for k, m in enumerate(marginals):
            io.write_points(m.supports, out / f"marginal_{k}.xy")
    return trace


def run_pointcloud(clouds, cfg: BarycenterConfig, out: Path | None = None, eval_cap: int = ASSIGNMENT_CAP,
                   inputs=()) -> RunTrace:
    if len(clouds) < 2:
        raise ValueError("need at least two point clouds")
    sizes = {c.n for c in clouds}
    if len(sizes) != 1:
        raise ValueError(f"point clouds must have equal sizes, got {sorted(sizes)}")
    init = sphere_init(clouds, cfg.seed)
    evaluator = make_evaluator(clouds, cfg.p, eval_cap, cfg.seed)
    trace = run_free_support(init, clouds, cfg, evaluator)
    if out is not None:
        out = Path(out)
        man = manifest("pointcloud", cfg, eval_cap=eval_cap, inputs=[str(p) for p in inputs])

        def snap(t, m):
            if t == cfg.iters:
                io.write_points(m.supports, out / "barycenter_final.xyz")

        _write_outputs(out, trace, man, snap)
    return trace


def color_problem(source: io.ImagePalette, targets, seed: int):
    rng = np.random.default_rng(seed)
    n = source.pixels.shape[0]
    marginals = [resample_to(t, n, rng) for t in targets]
    return DiscreteMeasure.uniform(source.pixels), marginals


def run_color(source: io.ImagePalette, targets, cfg: BarycenterConfig, out: Path | None = None,
              eval_cap: int = ASSIGNMENT_CAP, inputs=()) -> RunTrace:
    if len(targets) < 2:
        raise ValueError("color harmonization needs at least two target images")
    init, marginals = color_problem(source, targets, cfg.seed)
    evaluator = make_evaluator(marginals, cfg.p, eval_cap, cfg.seed)
    trace = run_free_support(init, marginals, cfg, evaluator)
    if out is not None:
        out = Path(out)
        man = manifest("color", cfg, eval_cap=eval_cap, inputs=[str(p) for p in inputs],
                       target_resampling="seeded, without replacement when larger, with replacement when smaller")

        def snap(t, m):
            name = "harmonized.png" if t == cfg.iters else f"harmonized_{t:06d}.png"
            io.write_image_palette(source, m.supports, out / name)

        _write_outputs(out, trace, man, snap)
    return trace
