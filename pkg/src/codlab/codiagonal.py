"""Codiagonal images of embedded bundles: section transforms, sweep maps and line families.

The codiagonal of a bundle ``E`` over ``M`` is the union of the affine fibres
``p + E_p``.  The sweeps below sample it: base points from the chart domain,
fibre coefficients from a bounded box, both drawn from index-addressable
samplers so that the resulting :class:`PointCloud` depends only on the
:class:`SweepSpec`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import sampling
from .bundle import FramedBundle, make_normal_bundle
from .errors import BadDirection, BoundaryConditionViolated, DimensionMismatch
from .manifold import Chart, EmbeddedManifold, ParametricChart, _as_batch, _require_graph, orthonormalize

DEFAULT_FIBER_HALF_WIDTH = 20.0


@dataclass(frozen=True)
class SweepSpec:
    """How a sweep samples its parameter space.

    When neither sampler is a grid the ``count`` parameter points are drawn
    jointly (one sampler over base x fibre coordinates if both samplers are
    of the same kind).  When either is a grid the parameter set is the
    product of the base and fibre samples, each of size ``prod(counts)``
    for a grid or ``count`` otherwise.
    """

    source: str = ""
    count: int = 1 << 16
    base_sampler: str = "halton"
    fiber_sampler: str = "halton"
    base_counts: tuple | None = None
    fiber_counts: tuple | None = None
    base_box: tuple | None = None
    fiber_box: tuple | None = None
    seed: int = 0
    chunk_size: int = 1 << 16
    frame: str = "orthonormal"

    def __post_init__(self):
        if self.count < 1 or self.chunk_size < 1:
            raise ValueError("counts must be >= 1")
        object.__setattr__(self, "base_sampler", sampling.canonical_sampler(self.base_sampler))
        object.__setattr__(self, "fiber_sampler", sampling.canonical_sampler(self.fiber_sampler))
        for name in ("base_counts", "fiber_counts"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(int(c) for c in v)
                if any(c < 1 for c in v):
                    raise ValueError(f"{name} must be >= 1")
                object.__setattr__(self, name, v)
        for name in ("base_box", "fiber_box"):
            v = getattr(self, name)
            if v is not None:
                lo, hi = (tuple(float(t) for t in np.atleast_1d(b)) for b in v)
                if len(lo) != len(hi) or any(h < l for l, h in zip(lo, hi)):
                    raise ValueError(f"{name} must be (lo, hi) with lo <= hi")
                if not all(np.isfinite(lo + hi)):
                    raise ValueError(f"{name} must be bounded")
                object.__setattr__(self, name, (lo, hi))
        if self.frame not in ("orthonormal", "raw"):
            raise ValueError("frame must be 'orthonormal' or 'raw'")

    def replace(self, **kw) -> "SweepSpec":
        d = asdict(self)
        d.update(kw)
        return SweepSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("base_counts", "fiber_counts"):
            d[k] = None if d[k] is None else list(d[k])
        for k in ("base_box", "fiber_box"):
            d[k] = None if d[k] is None else [list(d[k][0]), list(d[k][1])]
        return d

    # -- parameter sampling
    def _part_size(self, kind, counts):
        return int(np.prod(counts)) if kind == "grid" else self.count

    def product_mode(self) -> bool:
        return self.base_sampler == "grid" or self.fiber_sampler == "grid"

    def total(self) -> int:
        if self.product_mode():
            return self._part_size(self.base_sampler, self.base_counts) * \
                self._part_size(self.fiber_sampler, self.fiber_counts)
        return self.count

    def unit_parameters(self, db: int, dk: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(start, stop, dtype=np.int64)
        if self.product_mode():
            nf = self._part_size(self.fiber_sampler, self.fiber_counts)
            ub = sampling.unit_samples(self.base_sampler, idx // nf, db, self.seed, 0, self.base_counts)
            uf = sampling.unit_samples(self.fiber_sampler, idx % nf, dk, self.seed, 1, self.fiber_counts)
            return ub, uf
        if self.base_sampler == self.fiber_sampler:
            U = sampling.unit_samples(self.base_sampler, idx, db + dk, self.seed, 0)
            return U[:, :db], U[:, db:]
        ub = sampling.unit_samples(self.base_sampler, idx, db, self.seed, 0)
        uf = sampling.unit_samples(self.fiber_sampler, idx, dk, self.seed, 1)
        return ub, uf

    def boxes(self, base_lo, base_hi, dk: int, default_fiber=None):
        if self.base_box is not None:
            blo, bhi = np.array(self.base_box[0]), np.array(self.base_box[1])
        else:
            blo, bhi = np.asarray(base_lo, float), np.asarray(base_hi, float)
        if self.fiber_box is not None:
            flo, fhi = np.array(self.fiber_box[0]), np.array(self.fiber_box[1])
            if flo.size == 1 and dk > 1:
                flo, fhi = np.full(dk, flo[0]), np.full(dk, fhi[0])
        elif default_fiber is not None:
            flo, fhi = (np.asarray(b, float) for b in default_fiber)
        else:
            flo, fhi = -DEFAULT_FIBER_HALF_WIDTH * np.ones(dk), DEFAULT_FIBER_HALF_WIDTH * np.ones(dk)
        if blo.size != len(np.atleast_1d(base_lo)) or flo.size != dk:
            raise DimensionMismatch("sweep boxes do not match the parameter dimensions")
        return blo, bhi, flo, fhi


@dataclass(eq=False)
class PointCloud:
    """A finite sample of a codiagonal image together with how it was made."""

    n: int
    points: np.ndarray
    spec: SweepSpec | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.n)

    def __len__(self) -> int:
        return self.points.shape[0]


def as_points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)


def _generate(total: int, chunk: int, make: Callable[[int, int], np.ndarray], threads: int = 1) -> np.ndarray:
    starts = list(range(0, total, chunk))
    spans = [(s, min(s + chunk, total)) for s in starts]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: make(*ab), spans))
    else:
        parts = [make(a, b) for a, b in spans]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, 0))


def _param_sweep(spec: SweepSpec, db: int, dk: int, blo, bhi, flo, fhi, evaluate, n: int,
                 threads: int, meta: dict) -> PointCloud:
    def make(a, b):
        ub, uf = spec.unit_parameters(db, dk, a, b)
        X = blo + (bhi - blo) * ub
        Xi = flo + (fhi - flo) * uf
        return evaluate(X, Xi)

    pts = _generate(spec.total(), spec.chunk_size, make, threads).reshape(-1, n)
    meta = dict(meta)
    meta.update(seed=spec.seed, chunk_size=spec.chunk_size, count=int(pts.shape[0]),
                base_box=[blo.tolist(), bhi.tolist()], fiber_box=[flo.tolist(), fhi.tolist()],
                truncation="unbounded fiber factor restricted to fiber_box")
    return PointCloud(n, pts, spec, meta)


def _split_union(members: Sequence, spec: SweepSpec, run) -> PointCloud:
    """Sweep each member of a union with its share of the budget and concatenate."""
    J = len(members)
    clouds = []
    for j, m in enumerate(members):
        count = spec.count // J + (1 if j < spec.count % J else 0)
        clouds.append(run(m, spec.replace(count=max(count, 1), seed=spec.seed + j)))
    pts = np.concatenate([c.points for c in clouds], axis=0)
    meta = {"members": [c.metadata for c in clouds], "seed": spec.seed, "count": int(pts.shape[0])}
    return PointCloud(clouds[0].n, pts, spec, meta)


# ---------------------------------------------------------------------------
# section transform and sweep maps


def section_transform(chart: Chart, a, x) -> np.ndarray:
    """``phi_f^a(x) = f(x) + J_x f (a - x)``: the tangent-plane value at ``a`` based at ``x``."""
    _require_graph(chart)
    X, single_x = _as_batch(x, chart.d)
    A, single_a = _as_batch(a, chart.d)
    f = chart.graph(X)
    J = chart.graph_jacobian(X)
    out = f + np.einsum("mij,mj->mi", J, A - X)
    return out[0] if (single_x and single_a) else out


def lifted_section_map(chart: Chart, x, a) -> np.ndarray:
    """``Phi_f(x, a) = (a, phi_f^a(x))`` followed by the chart placement."""
    _require_graph(chart)
    X, single_x = _as_batch(x, chart.d)
    A, single_a = _as_batch(a, chart.d)
    A = np.broadcast_to(A, np.broadcast_shapes(A.shape, X.shape))
    P = chart.place_points(np.concatenate([A, section_transform(chart, A, X).reshape(A.shape[0], -1)], axis=1))
    return P[0] if (single_x and single_a) else P


def tangent_sum(chart: Chart, x, xi) -> np.ndarray:
    """``embed(x) + (Id, J_x f) xi``: the codiagonal of the tangent bundle in its graph trivialisation."""
    _require_graph(chart)
    X, single_x = _as_batch(x, chart.d)
    Xi, single_xi = _as_batch(xi, chart.d)
    f = chart.graph(X)
    J = chart.graph_jacobian(X)
    raw = np.concatenate([X + Xi, f + np.einsum("mij,mj->mi", J, Xi)], axis=1)
    P = chart.place_points(raw)
    return P[0] if (single_x and single_xi) else P


def normal_sweep_map(chart: Chart, x, b) -> np.ndarray:
    """``Psi_f(x, b) = (x + J^T (f(x) - b), b)``, placed.

    The point lies on the normal plane of the graph through ``(x, f(x))``.
    """
    _require_graph(chart)
    X, sx = _as_batch(x, chart.d)
    B = np.atleast_2d(np.asarray(b, dtype=float)).reshape(-1, chart.codim)
    f = chart.graph(X)
    J = chart.graph_jacobian(X)
    raw = np.concatenate([X + np.einsum("mji,mj->mi", J, f - B), np.broadcast_to(B, f.shape)], axis=1)
    P = chart.place_points(raw)
    return P[0] if (sx and B.shape[0] == 1) else P


def _fiber_sweep(chart, k: int, frame_of, spec: SweepSpec, threads: int, meta: dict) -> PointCloud:
    blo, bhi, flo, fhi = spec.boxes(chart.domain.lo, chart.domain.hi, k)

    def evaluate(X, Xi):
        A = frame_of(X)
        return chart.embed_batch(X) + np.einsum("mij,mj->mi", A, Xi)

    return _param_sweep(spec, chart.d, k, blo, bhi, flo, fhi, evaluate, chart.n, threads, meta)


def sweep_tangent(chart, spec: SweepSpec, threads: int = 1) -> PointCloud:
    """Sample the union of tangent planes.

    Graph charts use ``Phi_f(x, a)`` with ``a`` drawn from the fibre box;
    parametric charts use ``embed(x) + T(x) xi`` with ``T`` the orthonormal
    tangent frame (or the raw parametric Jacobian when ``spec.frame == "raw"``).
    """
    if isinstance(chart, EmbeddedManifold):
        return _split_union(chart.charts, spec, lambda c, s: sweep_tangent(c, s, threads))
    meta = {"map": "tangent", "source": spec.source or chart.label}
    if isinstance(chart, Chart):
        blo, bhi, flo, fhi = spec.boxes(chart.domain.lo, chart.domain.hi, chart.d)
        return _param_sweep(spec, chart.d, chart.d, blo, bhi, flo, fhi,
                            lambda X, A: lifted_section_map(chart, X, A).reshape(X.shape[0], chart.n),
                            chart.n, threads, meta)
    frame_of = chart.tangent_vectors if spec.frame == "raw" else (
        lambda X: orthonormalize(chart.tangent_vectors(X)))
    return _fiber_sweep(chart, chart.d, frame_of, spec, threads, meta)


def sweep_normal(chart, spec: SweepSpec, threads: int = 1) -> PointCloud:
    """Sample the union of normal planes (``Psi_f`` for graph charts)."""
    if isinstance(chart, EmbeddedManifold):
        return _split_union(chart.charts, spec, lambda c, s: sweep_normal(c, s, threads))
    meta = {"map": "normal", "source": spec.source or chart.label}
    k = chart.n - chart.d
    if isinstance(chart, Chart):
        blo, bhi, flo, fhi = spec.boxes(chart.domain.lo, chart.domain.hi, k)
        return _param_sweep(spec, chart.d, k, blo, bhi, flo, fhi,
                            lambda X, B: normal_sweep_map(chart, X, B).reshape(X.shape[0], chart.n),
                            chart.n, threads, meta)
    nb = make_normal_bundle(chart)
    return _fiber_sweep(chart, k, nb.frame, spec, threads, meta)


def sweep_bundle(bundle, spec: SweepSpec, threads: int = 1) -> PointCloud:
    """Sample ``embed(x) + A(x) xi`` over the base box times the fibre box."""
    if isinstance(bundle, (list, tuple)):
        return _split_union(list(bundle), spec, lambda b, s: sweep_bundle(b, s, threads))
    meta = {"map": "bundle", "kind": bundle.kind, "source": spec.source or bundle.label}
    chart = bundle.base
    if spec.frame == "raw":
        frame_of = bundle.raw_frame
    else:
        frame_of = lambda X: bundle.frame(X).reshape(X.shape[0], bundle.n, bundle.k)
    return _fiber_sweep(chart, bundle.k, frame_of, spec, threads, meta)


def bundle_lines(bundle, spec: SweepSpec) -> tuple[np.ndarray, np.ndarray]:
    """Base points and unit directions of ``spec.count`` fibres of a line bundle.

    Base parameters are drawn by the base sampler alone (stream 0), so the
    lines are those a sweep with this seed would visit.
    """
    if bundle.k != 1:
        raise DimensionMismatch("bundle_lines needs a rank-one bundle")
    chart = bundle.base
    blo, bhi, _, _ = spec.boxes(chart.domain.lo, chart.domain.hi, 1)
    idx = np.arange(spec.count, dtype=np.int64)
    U = sampling.unit_samples(spec.base_sampler, idx, chart.d, spec.seed, 0, spec.base_counts)
    X = blo + (bhi - blo) * U
    return chart.embed_batch(X), bundle.frame(X).reshape(X.shape[0], chart.n)


# ---------------------------------------------------------------------------
# line families over the disk


def _check_boundary(values: np.ndarray, expected: np.ndarray, what: str, tol: float = 1e-9) -> None:
    err = float(np.max(np.abs(values - expected))) if values.size else 0.0
    if err > tol:
        raise BoundaryConditionViolated(f"{what} on the boundary sphere deviates by {err:.3g} > {tol:g}")


def _disk_sweep(n: int, t_range, spec: SweepSpec, evaluate, threads: int, meta: dict) -> PointCloud:
    lo = -np.ones(n)
    hi = np.ones(n)
    tlo, thi = (float(v) for v in t_range)
    if spec.fiber_box is not None:
        tlo, thi = spec.fiber_box[0][0], spec.fiber_box[1][0]

    def wrapped(V, T):
        return evaluate(sampling.cube_to_ball(V), T[:, 0])

    meta = dict(meta, t_range=[tlo, thi])
    return _param_sweep(spec, n, 1, lo, hi, np.array([tlo]), np.array([thi]), wrapped, n + 1, threads, meta)


def halfline_family(alpha, beta, t_range, spec: SweepSpec, n: int, threads: int = 1,
                    boundary_samples: int = 256) -> PointCloud:
    """Sample the half-lines ``t -> (t, t alpha(x) + beta(x))`` over the closed disk ``D^n``.

    ``alpha`` must restrict to the identity on the boundary sphere.
    """
    tlo, thi = (float(v) for v in t_range)
    if not 0.0 < tlo <= thi:
        raise ValueError("t_range must lie in (0, inf)")
    S = sampling.sphere_points(boundary_samples, n)
    _check_boundary(np.reshape(alpha(S), S.shape), S, "alpha")

    def evaluate(X, t):
        return np.concatenate([t[:, None], t[:, None] * np.reshape(alpha(X), X.shape) +
                               np.reshape(beta(X), X.shape)], axis=1)

    return _disk_sweep(n, (tlo, thi), spec, evaluate, threads, {"map": "halfline", "source": spec.source})


def projective_line_family(f, beta, t_range, spec: SweepSpec, n: int, threads: int = 1,
                           boundary_samples: int = 256) -> PointCloud:
    """Sample the lines ``t -> (t + f(x), t beta(x) + x)``; ``f`` must be constant on the boundary."""
    S = sampling.sphere_points(boundary_samples, n)
    fb = np.reshape(f(S), (-1,))
    _check_boundary(fb, np.full_like(fb, fb[0]), "f")

    def evaluate(X, t):
        fx = np.reshape(f(X), (-1,))
        return np.concatenate([(t + fx)[:, None], t[:, None] * np.reshape(beta(X), X.shape) + X], axis=1)

    return _disk_sweep(n, t_range, spec, evaluate, threads, {"map": "projective-line", "source": spec.source})


def line_distance(q, base, direction) -> np.ndarray | float:
    """Euclidean distance from ``q`` to the line ``base + R direction`` (broadcasting)."""
    q = np.asarray(q, dtype=float)
    base = np.asarray(base, dtype=float)
    u = np.asarray(direction, dtype=float)
    norms = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise BadDirection("line direction must be a unit vector (tolerance 1e-12)")
    w = q - base
    r = w - np.sum(w * u, axis=-1, keepdims=True) * u
    out = np.linalg.norm(r, axis=-1)
    return float(out) if out.ndim == 0 else out
