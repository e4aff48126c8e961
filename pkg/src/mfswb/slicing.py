"""Projection directions on the unit sphere and energy-based reweighting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer (Steele, Lea & Flood)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def iteration_seed(seed: int, t: int) -> int:
    """Seed for iteration ``t`` of a run seeded with ``seed``."""
    return splitmix64(splitmix64(int(seed) & _MASK64) ^ (int(t) & _MASK64))


@dataclass(frozen=True)
class ProjectionSet:
    directions: np.ndarray  # (L, d), unit rows
    seed: int | None = None

    @property
    def L(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @classmethod
    def from_directions(cls, directions, seed=None) -> "ProjectionSet":
        theta = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        norms = np.linalg.norm(theta, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("projection directions must have unit norm")
        return cls(theta, seed)


def sample_uniform_sphere(L: int, d: int, seed) -> ProjectionSet:
    """Draw ``L`` i.i.d. directions uniform on ``S^{d-1}`` by normalizing Gaussians.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if L < 1 or d < 1:
        raise ValueError(f"need L >= 1 and d >= 1, got L={L}, d={d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = rng.standard_normal((L, d))
    norms = np.linalg.norm(theta, axis=1, keepdims=True)
    # a zero Gaussian draw has probability zero; redraw rather than divide by it
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        theta[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(theta, axis=1, keepdims=True)
    theta /= norms
    return ProjectionSet(theta, seed if not isinstance(seed, np.random.Generator) else None)


def energy_weights(maxdists) -> np.ndarray:
    """Self-normalized importance weights ``softmax(maxdists)`` (max-shifted)."""
    a = np.asarray(maxdists, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise ValueError("energy_weights needs at least one entry")
    if np.any(np.isnan(a)):
        raise ValueError("energy values contain NaN")
    e = np.exp(a - a.max())
    return e / e.sum()
