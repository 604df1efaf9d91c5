"""Measurements on point clouds.

* grid occupancy, coverage and an occupancy-based area/volume proxy;
* box-counting dimension with an adaptive scale window;
* an interior-ball certificate for ``h: R^m -> R^n`` built from the
  fixed-point map ``x -> x - J^+ (h(x) - y)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

from . import sampling
from .codiagonal import as_points
from .errors import BadGrid, CodlabError, FullRankFailure, InsufficientSamples, ResidualTestFailed
from .manifold import TOL_RANK, Box, fd_jacobian, numeric_rank

MEASURE_CAVEAT = "occupancy-based, not a verified lower bound"
_MAX_CELLS = 1 << 62


def _box_bounds(box) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(box, Box):
        return box.lo.copy(), box.hi.copy()
    lo, hi = box
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1 or np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
        raise BadGrid("box must be a pair of finite, equal-length bound vectors")
    if np.any(hi <= lo):
        raise BadGrid("box is degenerate")
    return lo, hi


def _grid_counts(lo, hi, cell: float) -> tuple[int, ...]:
    if not (cell > 0 and math.isfinite(cell)):
        raise BadGrid(f"cell edge must be positive and finite, got {cell}")
    k = (hi - lo) / cell
    counts = tuple(int(math.ceil(v - 1e-9 * v)) for v in k)
    if math.prod(counts) >= _MAX_CELLS:
        raise BadGrid("grid has too many cells to index")
    return counts


def _cell_indices(P: np.ndarray, lo, hi, cell, counts) -> tuple[np.ndarray, int]:
    """Linear indices of the cells hit by ``P`` and the number of points outside."""
    if P.size == 0:
        return np.zeros(0, dtype=np.int64), 0
    if P.shape[1] != lo.size:
        raise BadGrid(f"points live in R^{P.shape[1]} but the box is in R^{lo.size}")
    inside = np.all((P >= lo) & (P < hi), axis=1)
    Q = np.floor((P[inside] - lo) / cell).astype(np.int64)
    Q = np.minimum(Q, np.asarray(counts) - 1)
    lin = np.ravel_multi_index(tuple(Q.T), counts) if Q.size else np.zeros(0, dtype=np.int64)
    return np.asarray(lin, dtype=np.int64), int(P.shape[0] - np.count_nonzero(inside))


@dataclass(eq=False)
class GridOccupancy:
    """Occupied cells of a half-open grid over ``[lo, hi)``, stored as sorted cell indices."""

    lo: np.ndarray
    hi: np.ndarray
    cell: float
    counts: tuple
    occupied: np.ndarray
    overflow: int = 0

    @property
    def occupied_count(self) -> int:
        return int(self.occupied.size)

    @property
    def total_cells(self) -> int:
        return math.prod(self.counts)

    @property
    def n(self) -> int:
        return self.lo.size

    def _compatible(self, other: "GridOccupancy") -> None:
        if (self.counts != other.counts or self.cell != other.cell
                or not np.array_equal(self.lo, other.lo) or not np.array_equal(self.hi, other.hi)):
            raise BadGrid("occupancies live on different grids")

    def merge(self, other: "GridOccupancy") -> "GridOccupancy":
        """Bitwise OR of two occupancies of the same grid."""
        self._compatible(other)
        return GridOccupancy(self.lo, self.hi, self.cell, self.counts,
                             np.union1d(self.occupied, other.occupied), self.overflow + other.overflow)

    __or__ = merge

    def add(self, cloud) -> "GridOccupancy":
        lin, over = _cell_indices(as_points(cloud), self.lo, self.hi, self.cell, self.counts)
        return GridOccupancy(self.lo, self.hi, self.cell, self.counts,
                             np.union1d(self.occupied, lin), self.overflow + over)

    def dense(self) -> np.ndarray:
        """Boolean occupancy array of shape ``counts``."""
        bits = np.zeros(self.total_cells, dtype=bool)
        bits[self.occupied] = True
        return bits.reshape(self.counts)

    def cell_centers(self, indices: np.ndarray | None = None) -> np.ndarray:
        idx = np.arange(self.total_cells) if indices is None else np.asarray(indices)
        parts = np.unravel_index(idx, self.counts)
        return self.lo + self.cell * (np.stack(parts, axis=-1) + 0.5)

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "cell": self.cell,
                "counts": list(self.counts), "occupied_count": self.occupied_count,
                "total_cells": self.total_cells, "overflow": self.overflow}


def grid_occupancy(cloud, box, cell: float, chunk: int = 1 << 20) -> GridOccupancy:
    lo, hi = _box_bounds(box)
    counts = _grid_counts(lo, hi, float(cell))
    P = as_points(cloud)
    if P.size and P.ndim == 2 and P.shape[1] != lo.size:
        raise BadGrid(f"points live in R^{P.shape[1]} but the box is in R^{lo.size}")
    P = P.reshape(-1, lo.size) if P.size else np.zeros((0, lo.size))
    parts, over = [], 0
    for s in range(0, P.shape[0], chunk):
        lin, o = _cell_indices(P[s:s + chunk], lo, hi, float(cell), counts)
        parts.append(np.unique(lin))
        over += o
    occ = np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)
    return GridOccupancy(lo, hi, float(cell), counts, occ.astype(np.int64), over)


def coverage_fraction(occ: GridOccupancy) -> float:
    return occ.occupied_count / occ.total_cells


def measure_lower_bound(occ: GridOccupancy) -> float:
    """``occupied_count * cell^n``; see :data:`MEASURE_CAVEAT`."""
    return occ.occupied_count * occ.cell ** occ.n


def region_coverage(occ: GridOccupancy, inside: Callable[[np.ndarray], np.ndarray]) -> tuple[float, int]:
    """Fraction of the cells whose centre satisfies ``inside`` that are occupied.

    Returns ``(fraction, number_of_region_cells)``.
    """
    centers = occ.cell_centers()
    region = np.flatnonzero(np.asarray(inside(centers), dtype=bool))
    if region.size == 0:
        return 0.0, 0
    hit = np.isin(region, occ.occupied, assume_unique=True)
    return float(np.count_nonzero(hit)) / region.size, int(region.size)


def count_in_region(cloud, inside: Callable[[np.ndarray], np.ndarray], chunk: int = 1 << 20) -> int:
    """Number of cloud points satisfying ``inside``."""
    P = as_points(cloud)
    return int(sum(np.count_nonzero(inside(P[s:s + chunk])) for s in range(0, P.shape[0], chunk)))


def product_occupancy(a: GridOccupancy, b: GridOccupancy) -> GridOccupancy:
    """Occupancy of the Cartesian product of two clouds, from the factor occupancies.

    A product cell is hit exactly when both factor cells are hit, so the
    result equals the occupancy of the fully materialised product cloud.
    """
    if a.cell != b.cell:
        raise BadGrid("factor grids must share the cell edge")
    counts = tuple(a.counts) + tuple(b.counts)
    nb = b.total_cells
    occ = (a.occupied[:, None] * nb + b.occupied[None, :]).ravel()
    return GridOccupancy(np.concatenate([a.lo, b.lo]), np.concatenate([a.hi, b.hi]), a.cell,
                         counts, np.sort(occ), 0)


# ---------------------------------------------------------------------------
# box counting


@dataclass
class DimensionEstimate:
    scales: list
    counts: list
    slope: float
    r2: float
    scale_window: list
    samples: int = 0
    accepted: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"scales": list(map(float, self.scales)), "counts": list(map(int, self.counts)),
                "slope": float(self.slope), "r2": float(self.r2),
                "scale_window": list(map(float, self.scale_window)), "samples": int(self.samples),
                "accepted": list(map(bool, self.accepted))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def default_scales(box, finest: int = 9, coarsest: int = 3) -> np.ndarray:
    lo, hi = _box_bounds(box)
    edge = float(np.max(hi - lo))
    return edge * 2.0 ** -np.arange(coarsest, finest + 1)


def _count_cells(P, lo, hi, cell) -> int:
    counts = _grid_counts(lo, hi, cell)
    lin, _ = _cell_indices(P, lo, hi, cell, counts)
    return int(np.unique(lin).size)


def box_counting_dimension(source, box, scales=None, min_count: int = 100, starvation_tol: float = 0.02,
                           samples: int = 1 << 16, max_samples: int = 1 << 22,
                           min_scales: int = 3) -> DimensionEstimate:
    """Least-squares slope of ``log N(delta)`` against ``log(1/delta)``.

    ``source`` is a point array/cloud or a callable ``gen(count)`` returning
    the first ``count`` points of a fixed sequence.  A scale is starved when
    halving the sample changes ``N`` by more than ``starvation_tol``; for a
    generator the sample is doubled until no scale is starved or
    ``max_samples`` is reached.  Scales with ``N < min_count`` and starved
    scales are dropped, and the fit uses the longest contiguous run of
    remaining scales.
    """
    lo, hi = _box_bounds(box)
    scales = default_scales(box) if scales is None else np.asarray(scales, dtype=float)
    if scales.size < 4:
        raise BadGrid("box counting needs at least 4 scales")
    ratios = scales[1:] / scales[:-1]
    if np.any(np.abs(ratios - 0.5) > 1e-9):
        raise BadGrid("scales must form a halving ladder, coarse to fine")

    def measure(P):
        half = P[: P.shape[0] // 2]
        full_n = np.array([_count_cells(P, lo, hi, s) for s in scales])
        half_n = np.array([_count_cells(half, lo, hi, s) for s in scales])
        starved = np.abs(full_n - half_n) > starvation_tol * np.maximum(full_n, 1)
        return full_n, starved

    if callable(source):
        m = int(samples)
        while True:
            P = as_points(source(m))
            N, starved = measure(P)
            if not np.any(starved & (N >= min_count)) or 2 * m > max_samples:
                break
            m *= 2
    else:
        P = as_points(source)
        N, starved = measure(P)

    accepted = (N >= min_count) & ~starved
    best, run = (0, 0), None
    for i, ok in enumerate(accepted):
        if ok:
            run = (run[0], i + 1) if run else (i, i + 1)
            if run[1] - run[0] > best[1] - best[0]:
                best = run
        else:
            run = None
    if best[1] - best[0] < min_scales:
        raise InsufficientSamples(
            f"only {best[1] - best[0]} usable scales (counts {N.tolist()}, starved {starved.tolist()})")
    sel = slice(*best)
    x = np.log(1.0 / scales[sel])
    y = np.log(N[sel].astype(float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return DimensionEstimate(scales=scales.tolist(), counts=N.tolist(), slope=float(slope), r2=r2,
                             scale_window=scales[sel].tolist(), samples=int(P.shape[0]),
                             accepted=accepted.tolist())


# ---------------------------------------------------------------------------
# interior certificate


FD_SINGULAR_FLOOR = 1e-7


@dataclass(frozen=True)
class CertificateConfig:
    max_eps: float = 1.0
    min_eps: float = 1e-6
    shell_samples: int = 200
    shells: int = 10
    bisection_steps: int = 50
    targets_per_axis: int = 5
    max_iter: int = 200
    stall_rel_step: float = 1e-12
    residual_tol: float = 1e-9
    seed: int = 0
    # the shell test only samples the sphere, so the accepted radius is shrunk
    safety: float = 0.9


@dataclass
class BallCertificate:
    x0: np.ndarray
    y0: np.ndarray
    jacobian: np.ndarray
    lambda_: float
    epsilon: float
    tested_targets: np.ndarray
    success_count: int
    residual_max: float
    solutions: np.ndarray
    solved: np.ndarray
    inequality_ok: np.ndarray
    methods: list
    jacobian_op_norm: float

    @property
    def radius(self) -> float:
        """Radius ``lambda * epsilon`` of the target ball around ``y0``."""
        return self.lambda_ * self.epsilon

    @property
    def nonempty(self) -> bool:
        return self.lambda_ > 0 and self.epsilon > 0 and self.success_count > 0

    def to_dict(self) -> dict:
        sol = [None if not ok else s.tolist() for s, ok in zip(self.solutions, self.solved)]
        return {"x0": self.x0.tolist(), "y0": self.y0.tolist(), "jacobian": self.jacobian.tolist(),
                "lambda": float(self.lambda_), "epsilon": float(self.epsilon),
                "tested_targets": self.tested_targets.tolist(), "success_count": int(self.success_count),
                "residual_max": float(self.residual_max), "solutions": sol,
                "solved": self.solved.tolist(), "inequality_ok": self.inequality_ok.tolist(),
                "methods": list(self.methods), "jacobian_op_norm": float(self.jacobian_op_norm)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def target_grid(n: int, per_axis: int) -> np.ndarray:
    """Grid points of ``[-1, 1]^n`` inside the closed unit ball (origin included)."""
    t = np.linspace(-1.0, 1.0, per_axis)
    mesh = np.meshgrid(*([t] * n), indexing="ij")
    G = np.stack([m.ravel() for m in mesh], axis=1)
    return G[np.linalg.norm(G, axis=1) <= 1.0 + 1e-12]


def interior_certificate(h: Callable[[np.ndarray], np.ndarray], x0, config: CertificateConfig | None = None
                         ) -> BallCertificate:
    """Certify (empirically) a ball of radius ``lambda * eps`` around ``h(x0)`` inside ``h``'s image."""
    cfg = config or CertificateConfig()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    H = lambda x: np.atleast_1d(np.asarray(h(x), dtype=float))
    y0 = H(x0)
    m, n = x0.size, y0.size
    if m < n:
        raise FullRankFailure(f"need m >= n, got m={m}, n={n}")
    J = fd_jacobian(lambda X: np.stack([H(x) for x in X]), x0[None, :])[0]
    sv = np.linalg.svd(J, compute_uv=False)
    # the finite-difference Jacobian carries ~1e-7 noise, so tiny singular values are zero
    if numeric_rank(J, TOL_RANK) < n or sv[n - 1] < FD_SINGULAR_FLOOR:
        raise FullRankFailure("Jacobian at x0 is rank deficient")
    Jp = np.linalg.pinv(J)
    lam = 1.0 / (2.0 * float(np.linalg.norm(Jp, 2)))
    opn = float(sv[0])

    per_shell = max(1, cfg.shell_samples // cfg.shells)
    if m == 1:
        # the 0-sphere has only two points
        dirs = np.tile(sampling.sphere_points(2, 1), (cfg.shells, 1, 1))
    else:
        dirs = sampling.sphere_points(per_shell * cfg.shells, m, seed=cfg.seed).reshape(cfg.shells, per_shell, m)

    def residual_ok(eps: float) -> bool:
        try:
            for j in range(cfg.shells):
                r = eps * (j + 1) / cfg.shells
                for u in dirs[j]:
                    x = x0 + r * u
                    res = np.linalg.norm(H(x) - y0 - J @ (x - x0))
                    if not res < lam * r:
                        return False
        except (CodlabError, ValueError, FloatingPointError):
            return False
        return True

    if residual_ok(cfg.max_eps):
        eps = cfg.max_eps
    elif not residual_ok(cfg.min_eps):
        raise ResidualTestFailed("differentiability residual test fails even at the smallest radius")
    else:
        good, bad = math.log(cfg.min_eps), math.log(cfg.max_eps)
        for _ in range(cfg.bisection_steps):
            mid = 0.5 * (good + bad)
            if residual_ok(math.exp(mid)):
                good = mid
            else:
                bad = mid
        eps = math.exp(good)
    eps *= cfg.safety

    targets = y0 + lam * eps * target_grid(n, cfg.targets_per_axis)
    sols = np.full((targets.shape[0], m), np.nan)
    solved = np.zeros(targets.shape[0], dtype=bool)
    ineq = np.zeros(targets.shape[0], dtype=bool)
    methods = []
    res_max = 0.0
    for i, y in enumerate(targets):
        x, res, how = _solve_target(H, Jp, x0, y, cfg, m, n)
        methods.append(how)
        if x is None or res > cfg.residual_tol or np.linalg.norm(x - x0) > eps * (1 + 1e-9):
            continue
        solved[i] = True
        sols[i] = x
        res_max = max(res_max, res)
        dx = float(np.linalg.norm(x - x0))
        dy = float(np.linalg.norm(y - y0))
        tol = 1e-8 * (1.0 + dy)
        ineq[i] = (lam * dx <= dy + tol) and (dy <= (opn + lam) * dx + tol)
    return BallCertificate(x0=x0, y0=y0, jacobian=J, lambda_=lam, epsilon=eps, tested_targets=targets,
                           success_count=int(solved.sum()), residual_max=res_max, solutions=sols,
                           solved=solved, inequality_ok=ineq, methods=methods, jacobian_op_norm=opn)


def _solve_target(H, Jp, x0, y, cfg: CertificateConfig, m: int, n: int):
    # diverging iterates are detected below; silence the overflow noise they cause
    with np.errstate(all="ignore"):
        return _solve_target_inner(H, Jp, x0, y, cfg, m, n)


def _solve_target_inner(H, Jp, x0, y, cfg: CertificateConfig, m: int, n: int):
    x = x0.copy()
    try:
        for _ in range(cfg.max_iter):
            r = H(x) - y
            rn = float(np.linalg.norm(r))
            if rn <= cfg.residual_tol:
                return x, rn, "fixed-point"
            step = Jp @ r
            x = x - step
            if not np.all(np.isfinite(x)):
                break
            if np.linalg.norm(step) < cfg.stall_rel_step * max(1.0, float(np.linalg.norm(x))):
                break
        r = H(x) - y
        if np.all(np.isfinite(x)) and np.linalg.norm(r) <= cfg.residual_tol:
            return x, float(np.linalg.norm(r)), "fixed-point"
    except (CodlabError, ValueError, FloatingPointError):
        pass
    # damped least squares, first from the linear predictor, then by continuation from y0
    method = "lm" if n >= m else "trf"

    def lsq(start, target):
        sol = least_squares(lambda z: H(z) - target, start, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        return sol.x, float(np.linalg.norm(H(sol.x) - target))

    try:
        y0 = H(x0)
        x, res = lsq(x0 + Jp @ (y - y0), y)
        if res <= cfg.residual_tol:
            return x, res, "least-squares"
        x = x0
        for s in np.linspace(0.0, 1.0, 9)[1:]:
            x, res = lsq(x, y0 + s * (y - y0))
        return x, res, "continuation"
    except (CodlabError, ValueError, FloatingPointError):
        return None, math.inf, "failed"
