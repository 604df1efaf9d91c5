"""Embedded vector bundles as frame fields over charts.

A bundle of rank ``k`` over a chart is given by any evaluator returning
``(m, n, k)`` spanning vectors; frames are orthonormalised on evaluation,
so only the column span of the supplied vectors matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DomainViolation, NotADistribution
from .manifold import (
    FD_STEP,
    TOL_RANK,
    AnyChart,
    Box,
    EmbeddedManifold,
    ParametricChart,
    _as_batch,
    fd_jacobian,
    normal_frame,
    numeric_rank,
    orthonormalize,
)


@dataclass(frozen=True, eq=False)
class FramedBundle:
    base: AnyChart
    k: int
    frame_map: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"
    label: str = ""

    def __post_init__(self):
        if not 1 <= self.k <= self.base.n:
            raise DimensionMismatch(f"fiber dimension {self.k} outside 1..{self.base.n}")
        if self.kind not in ("tangent", "normal", "custom"):
            raise ValueError("kind must be tangent, normal or custom")

    @property
    def n(self) -> int:
        return self.base.n

    def raw_frame(self, X: np.ndarray) -> np.ndarray:
        return np.reshape(self.frame_map(X), (X.shape[0], self.n, self.k))

    def frame(self, x) -> np.ndarray:
        """Orthonormal fiber basis ``A(x)``, ``n x k`` (or stacked)."""
        X, single = _as_batch(x, self.base.d)
        A = orthonormalize(self.raw_frame(X))
        return A[0] if single else A


def _each(M, build):
    if isinstance(M, EmbeddedManifold):
        return [build(c) for c in M.charts]
    return build(M)


def make_tangent_bundle(M):
    """Tangent bundle of a chart (a list of bundles for an :class:`EmbeddedManifold`)."""
    return _each(M, lambda c: FramedBundle(c, c.d, c.tangent_vectors, kind="tangent", label=c.label))


def make_normal_bundle(M):
    def build(c):
        return FramedBundle(c, c.n - c.d, lambda X: normal_frame(c, X).reshape(X.shape[0], c.n, c.n - c.d),
                            kind="normal", label=c.label)
    return _each(M, build)


def line_bundle(chart: AnyChart, direction: Callable[[np.ndarray], np.ndarray], label: str = "") -> FramedBundle:
    """Rank-one bundle spanned by ``direction(X)`` of shape ``(m, n)``."""
    return FramedBundle(chart, 1, lambda X: np.reshape(direction(X), (X.shape[0], chart.n, 1)),
                        kind="custom", label=label)


def general_position_at(bundle: FramedBundle, x) -> tuple[int, bool]:
    """``(dim(fiber cap T_x), generic)`` where generic means the minimal dimension."""
    X, _ = _as_batch(x, bundle.base.d)
    X = X[:1]
    A = bundle.frame(X)[0]
    T = orthonormalize(bundle.base.tangent_vectors(X))[0]
    k, d, n = bundle.k, bundle.base.d, bundle.n
    dim = k + d - int(numeric_rank(np.concatenate([A, T], axis=1)))
    return dim, dim == max(k + d - n, 0)


def chart_grid(chart: AnyChart, per_axis: int, box: Box | None = None) -> np.ndarray:
    """Cell-centred grid of ``per_axis**d`` points inside ``box`` (default the domain)."""
    box = chart.domain if box is None else box
    axes = [lo + (hi - lo) * (np.arange(per_axis) + 0.5) / per_axis for lo, hi in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def transverse_to(bundle: FramedBundle, V: np.ndarray, sample_grid=16) -> bool:
    """True iff ``rank [A(x) | V] = n`` at every sample point.

    ``sample_grid`` is either an ``(m, d)`` array of base points or a
    number of grid points per axis.
    """
    V = np.asarray(V, dtype=float)
    n, k = bundle.n, bundle.k
    if V.ndim != 2 or V.shape != (n, n - k):
        raise DimensionMismatch(f"V must be {n} x {n - k}, got {V.shape}")
    X = chart_grid(bundle.base, sample_grid) if np.isscalar(sample_grid) else np.asarray(sample_grid, float)
    A = bundle.frame(X).reshape(X.shape[0], n, k)
    M = np.concatenate([A, np.broadcast_to(V, (X.shape[0], n, n - k))], axis=2)
    return bool(np.all(numeric_rank(M) == n))


def osculation_defect(distribution: FramedBundle, x) -> float:
    """Normal component of ``D_X X`` for the unit field of a tangent line distribution.

    One central difference along the integral direction; for a unit field
    this is the normal curvature of the leaf through ``x``.
    """
    if distribution.k != 1:
        raise NotADistribution("osculation defect needs a rank-one bundle")
    chart = distribution.base
    X, _ = _as_batch(x, chart.d)
    X = X[:1]
    dim, _ = general_position_at(distribution, X)
    if dim != 1:
        raise NotADistribution("fiber direction is not tangent to the base")
    field_ = lambda Y: distribution.frame(Y).reshape(Y.shape[0], chart.n)
    u = field_(X)[0]
    B = chart.tangent_vectors(X)[0]
    b = np.linalg.lstsq(B, u, rcond=None)[0]
    h = FD_STEP * max(1.0, float(np.max(np.abs(X))))
    h /= max(float(np.linalg.norm(b)), 1e-300)
    Xp, Xm = X + h * b, X - h * b
    chart.check_domain(np.vstack([Xp, Xm]))
    DXX = (field_(Xp)[0] - field_(Xm)[0]) / (2.0 * h)
    T = orthonormalize(B)
    normal_part = DXX - T @ (T.T @ DXX)
    return float(np.linalg.norm(normal_part))


# ---------------------------------------------------------------------------
# sections and deformations


def bump(U: np.ndarray) -> np.ndarray:
    """``exp(1 - 1/(1 - |u|^2))`` inside the unit ball, 0 outside; ``bump(0) = 1``."""
    U = np.asarray(U, dtype=float)
    r2 = np.sum(U * U, axis=-1)
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


@dataclass(frozen=True, eq=False)
class Section:
    """Section ``x -> s(x) A(x)`` of a line bundle."""

    bundle: FramedBundle
    coefficient: Callable[[np.ndarray], np.ndarray]
    center: np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.bundle.k != 1:
            raise DimensionMismatch("sections are defined for line bundles only")

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.reshape(self.coefficient(X), (X.shape[0],))

    def vectors(self, X: np.ndarray) -> np.ndarray:
        A = self.bundle.frame(X).reshape(X.shape[0], self.bundle.n)
        return self.values(X)[:, None] * A


def zero_section(bundle: FramedBundle) -> Section:
    return Section(bundle, lambda X: np.zeros(X.shape[0]))


def bump_section(bundle: FramedBundle, center, radius: float, t: float) -> Section:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dom = bundle.base.domain
    if radius <= 0:
        raise DomainViolation("bump radius must be positive")
    if center.shape != dom.lo.shape or np.any(center - radius < dom.lo) or np.any(center + radius > dom.hi):
        raise DomainViolation("bump ball is not inside the chart domain")
    coef = lambda X: t * bump((np.asarray(X, float) - center) / radius)
    return Section(bundle, coef, center=center, radius=float(radius))


@dataclass(frozen=True, eq=False)
class Deformation:
    chart: AnyChart
    section: Section
    jacobian_ok: bool
    displacement: float
    grid: np.ndarray = field(repr=False)

    def deformed_map(self, x) -> np.ndarray:
        X, single = _as_batch(x, self.chart.d)
        P = self.chart.embed_batch(X) + self.section.vectors(X)
        return P[0] if single else P

    def deformed_bundle(self) -> FramedBundle:
        """The same fibres carried over the deformed chart.

        Point ``x`` of the new base sits at ``p + s(x) A(x)``, which lies on
        the old fibre line through ``p``; so both bundles have the same lines.
        """
        b = self.section.bundle
        ch = self.chart
        moved = ParametricChart(ch.d, ch.n, param_map=lambda X: self.deformed_map(X), derivative_mode="fd",
                                domain=ch.domain, label=f"deformed({ch.label})")
        return FramedBundle(moved, b.k, b.raw_frame, kind="custom", label=f"deformed({b.label})")


def deform(chart: AnyChart, section: Section, grid: int = 32) -> Deformation:
    """Deform ``chart`` by ``section`` and test the result on a ``grid**d`` sample.

    ``jacobian_ok`` requires the deformed Jacobian to have rank ``d`` and its
    projection onto the original tangent plane to stay orientation
    preserving; the second condition catches folds (a tangential bump that
    turns back on itself keeps rank ``d`` at generic samples).
    """
    if section.bundle.base is not chart:
        raise ValueError("section is not defined over this chart")
    dom = chart.domain
    if section.center is not None:
        lo = np.maximum(section.center - section.radius, dom.lo)
        hi = np.minimum(section.center + section.radius, dom.hi)
    else:
        lo, hi = dom.lo, dom.hi
    # keep finite-difference stencils inside the open domain
    pad = 4 * FD_STEP * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    X = chart_grid(chart, grid, Box(lo + pad, hi - pad))
    if section.center is not None:
        X = np.vstack([section.center[None, :], X])

    moved = lambda Y: chart.embed_batch(Y) + section.vectors(Y)
    Jdef = fd_jacobian(moved, X)
    T = orthonormalize(chart.tangent_vectors(X))
    rank_ok = np.all(numeric_rank(Jdef) == chart.d)
    dets = np.linalg.det(np.einsum("mji,mjk->mik", T, Jdef))
    ref = np.linalg.det(np.einsum("mji,mjk->mik", T, chart.tangent_vectors(X)))
    orient_ok = np.all(dets * np.sign(ref) > 0)
    disp = float(np.max(np.abs(section.values(X)))) if X.size else 0.0
    return Deformation(chart, section, bool(rank_ok and orient_ok), disp, X)
