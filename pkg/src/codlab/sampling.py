"""Index-addressable samplers on the unit cube.

Every sampler is a pure function of ``(global index, seed)``: a chunk of
indices can be generated anywhere, in any order, and reproduces exactly
the same points.  This is what makes sweeps independent of chunking and
thread count.
"""

from __future__ import annotations

import numpy as np

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)
RANDOM_BLOCK = 1 << 16

ALIASES = {
    "halton": "halton",
    "low-discrepancy": "halton",
    "random": "random",
    "uniform-random": "random",
    "grid": "grid",
}


def canonical_sampler(kind: str) -> str:
    try:
        return ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown sampler {kind!r}; expected one of {sorted(ALIASES)}") from None


def radical_inverse(idx: np.ndarray, base: int) -> np.ndarray:
    """Van der Corput radical inverse of non-negative integer indices."""
    idx = np.asarray(idx, dtype=np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    f = 1.0 / base
    while np.any(idx > 0):
        out += (idx % base) * f
        idx //= base
        f /= base
    return out


def halton(idx: np.ndarray, dim: int, seed: int = 0, stream: int = 0) -> np.ndarray:
    """Halton points (bases 2, 3, 5, ...) with a seeded Cranley-Patterson shift."""
    if dim > len(PRIMES):
        raise ValueError(f"halton sampler supports at most {len(PRIMES)} dimensions")
    shift = np.random.default_rng([seed, stream, 0x4A17]).random(dim)
    cols = [radical_inverse(idx, PRIMES[j]) for j in range(dim)]
    U = np.stack(cols, axis=-1) if cols else np.zeros((len(idx), 0))
    return np.mod(U + shift, 1.0)


def uniform(idx: np.ndarray, dim: int, seed: int = 0, stream: int = 0) -> np.ndarray:
    """Uniform random points; point ``i`` depends only on ``(seed, stream, i)``."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty((idx.size, dim))
    blocks = idx // RANDOM_BLOCK
    for b in np.unique(blocks):
        sel = blocks == b
        vals = np.random.default_rng([seed, stream, int(b)]).random((RANDOM_BLOCK, dim))
        out[sel] = vals[idx[sel] % RANDOM_BLOCK]
    return out


def grid(idx: np.ndarray, counts) -> np.ndarray:
    """Cell centres of a regular grid, row-major in ``counts``."""
    counts = tuple(int(c) for c in counts)
    parts = np.unravel_index(np.asarray(idx, dtype=np.int64), counts)
    return np.stack([(p + 0.5) / c for p, c in zip(parts, counts)], axis=-1)


def unit_samples(kind: str, idx: np.ndarray, dim: int, seed: int = 0, stream: int = 0, counts=None) -> np.ndarray:
    kind = canonical_sampler(kind)
    if kind == "halton":
        return halton(idx, dim, seed, stream)
    if kind == "random":
        return uniform(idx, dim, seed, stream)
    if counts is None or len(counts) != dim:
        raise ValueError(f"grid sampler needs {dim} per-axis counts")
    return grid(idx, counts)


def cube_to_ball(V: np.ndarray) -> np.ndarray:
    """Radial stretch taking ``[-1, 1]^n`` onto the closed unit ball."""
    V = np.asarray(V, dtype=float)
    inf = np.max(np.abs(V), axis=-1, keepdims=True)
    two = np.linalg.norm(V, axis=-1, keepdims=True)
    scale = np.divide(inf, two, out=np.zeros_like(two), where=two > 0)
    return V * scale


def sphere_points(count: int, n: int, seed: int = 0) -> np.ndarray:
    """Deterministic points on the unit sphere ``S^(n-1)`` in R^n."""
    if n == 1:
        return np.array([[-1.0], [1.0]])
    V = 2.0 * halton(np.arange(1, count + 1), n, seed, stream=7) - 1.0
    return V / np.linalg.norm(V, axis=1, keepdims=True)
