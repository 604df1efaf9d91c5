"""Ready-made constructions, each paired with a machine-checkable claim.

A :class:`Claim` names what should be true of a sampled codiagonal image
(``fills-box``, ``covers-region``, ``excludes-region``, ``dimension``,
``measure-zero-in-R^n``) and carries the region and tolerance it is
judged by.  :func:`evaluate_claim` judges it using the estimate module only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.spatial import cKDTree

from . import sampling
from .bundle import FramedBundle, line_bundle, make_tangent_bundle
from .codiagonal import PointCloud, as_points
from .errors import (
    DegenerateRuling,
    IntegrationUnstable,
    NoSuchField,
    NotStrictlyConvex,
    SingularTransform,
)
from .estimate import (
    DimensionEstimate,
    box_counting_dimension,
    count_in_region,
    coverage_fraction,
    grid_occupancy,
    region_coverage,
)
from .manifold import (
    Box,
    Chart,
    EmbeddedManifold,
    ParametricChart,
    PolynomialMap,
    affine_image,
    fd_jacobian,
    polynomial_chart,
)

# ---------------------------------------------------------------------------
# claims and regions


@dataclass(frozen=True)
class Claim:
    kind: str
    params: dict
    statement: str = ""

    KINDS = ("fills-box", "covers-region", "excludes-region", "dimension", "measure-zero-in-R^n")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown claim kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params), "statement": self.statement}


@dataclass(frozen=True)
class ClaimResult:
    kind: str
    passed: bool
    value: float
    threshold: object
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": bool(self.passed), "value": float(self.value),
                "threshold": _jsonable(self.threshold), "detail": _jsonable(self.detail)}


@dataclass(frozen=True, eq=False)
class Construction:
    id: str
    builds: object
    claim: Claim
    statement: str


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def region_mask(region: dict, Q: np.ndarray) -> np.ndarray:
    """Membership of the rows of ``Q`` in a region descriptor."""
    Q = np.asarray(Q, dtype=float)
    shape = region["shape"]
    if shape == "union":
        out = np.zeros(Q.shape[0], dtype=bool)
        for part in region["parts"]:
            out |= region_mask(part, Q)
        return out
    if shape == "ball":
        return np.linalg.norm(Q - np.asarray(region.get("center", 0.0)), axis=1) < region["radius"]
    if shape == "shell":
        r = np.linalg.norm(Q - np.asarray(region.get("center", 0.0)), axis=1)
        return (r > region["r_in"]) & (r <= region["r_out"])
    if shape == "box":
        lo, hi = np.asarray(region["lo"]), np.asarray(region["hi"])
        return np.all((Q >= lo) & (Q <= hi), axis=1)
    if shape == "ellipsoid":
        inv = np.asarray(region["inverse"], dtype=float)
        c = np.asarray(region.get("center", np.zeros(Q.shape[1])), dtype=float)
        return np.linalg.norm((Q - c) @ inv.T, axis=1) < region["radius"]
    if shape == "cone":
        axis = np.asarray(region["axis"], dtype=float)
        axis = axis / np.linalg.norm(axis)
        r = np.linalg.norm(Q, axis=1)
        cosang = np.divide(Q @ axis, r, out=np.full_like(r, -1.0), where=r > 0)
        return (cosang > math.cos(region["half_angle"])) & (r > region["r_min"]) & (r <= region["r_max"])
    if shape == "graph-tube":
        x0, x1 = region["x_range"]
        xs = np.linspace(x0, x1, int(region.get("samples", 20001)))
        pts = np.stack([xs, np.polyval(region["coefficients"], xs)], axis=1)
        dist, _ = cKDTree(pts).query(Q)
        return dist < region["radius"]
    raise ValueError(f"unknown region shape {shape!r}")


def evaluate_claim(claim: Claim, source) -> ClaimResult:
    """Judge ``claim`` on a cloud (or, for dimension claims, a generator)."""
    p = claim.params
    if claim.kind == "fills-box":
        occ = grid_occupancy(source, p["box"], p["cell"])
        cov = coverage_fraction(occ)
        return ClaimResult(claim.kind, cov >= p["threshold"], cov, p["threshold"], occ.to_dict())
    if claim.kind == "covers-region":
        occ = grid_occupancy(source, p["box"], p["cell"])
        cov, ncells = region_coverage(occ, lambda C: region_mask(p["region"], C))
        return ClaimResult(claim.kind, ncells > 0 and cov >= p["threshold"], cov, p["threshold"],
                           {"region_cells": ncells, **occ.to_dict()})
    if claim.kind == "excludes-region":
        k = count_in_region(source, lambda Q: region_mask(p["region"], Q))
        return ClaimResult(claim.kind, k == 0, k, 0, {"points_checked": len(as_points(source))})
    if claim.kind in ("dimension", "measure-zero-in-R^n"):
        est = box_counting_dimension(source, p["box"], scales=p.get("scales"),
                                     samples=p.get("samples", 1 << 16),
                                     max_samples=p.get("max_samples", 1 << 22))
        if claim.kind == "dimension":
            ok = abs(est.slope - p["value"]) <= p["tolerance"]
            thr = [p["value"] - p["tolerance"], p["value"] + p["tolerance"]]
        else:
            ok = est.slope <= p["max_slope"]
            thr = p["max_slope"]
        return ClaimResult(claim.kind, ok, est.slope, thr, est.to_dict())
    raise ValueError(claim.kind)


# ---------------------------------------------------------------------------
# basic charts


def flat_chart(d: int, n: int, **kw) -> Chart:
    return polynomial_chart(PolynomialMap(np.zeros((1, d), dtype=int), np.zeros((1, n - d))), **kw)


def parabola(**kw) -> Chart:
    """``y = x^2``."""
    return polynomial_chart(PolynomialMap([[2]], [1.0]), label="parabola", **kw)


def paraboloid(**kw) -> Chart:
    return polynomial_chart(PolynomialMap([[2, 0], [0, 2]], [1.0, 1.0]), label="paraboloid", **kw)


def saddle(**kw) -> Chart:
    """``z = x y``; its coordinate lines ``y = const`` are straight rulings."""
    return polynomial_chart(PolynomialMap([[1, 1]], [1.0]), label="saddle", **kw)


def twisted_quartic(**kw) -> Chart:
    """``t -> (t, t^2, t^3, t^4)`` as a graph chart over the first axis."""
    return polynomial_chart(PolynomialMap([[2], [3], [4]], np.eye(3)), label="twisted-quartic", **kw)


def arc_chart(center: complex, radius: float, t0: float, t1: float, label: str = "") -> ParametricChart:
    """``center + radius e^{it}`` for ``t`` in the open interval ``(t0, t1)``."""
    c = np.array([center.real, center.imag])

    def p(X):
        t = X[:, 0]
        return c + radius * np.stack([np.cos(t), np.sin(t)], axis=1)

    def dp(X):
        t = X[:, 0]
        return (radius * np.stack([-np.sin(t), np.cos(t)], axis=1))[:, :, None]

    def ddp(X):
        t = X[:, 0]
        return (-radius * np.stack([np.cos(t), np.sin(t)], axis=1))[:, :, None, None]

    return ParametricChart(1, 2, param_map=p, jac=dp, second=ddp, domain=Box([t0], [t1]), label=label)


def unit_circle(radius: float = 1.0) -> ParametricChart:
    return arc_chart(0j, radius, -math.pi, math.pi, label="circle")


def cylinder(radius: float = 1.0, height: float = 2.0) -> ParametricChart:
    """``(cos t, sin t, z)``; its axis-parallel lines are straight."""

    def p(X):
        return np.stack([radius * np.cos(X[:, 0]), radius * np.sin(X[:, 0]), X[:, 1]], axis=1)

    def dp(X):
        m = X.shape[0]
        J = np.zeros((m, 3, 2))
        J[:, 0, 0] = -radius * np.sin(X[:, 0])
        J[:, 1, 0] = radius * np.cos(X[:, 0])
        J[:, 2, 1] = 1.0
        return J

    def ddp(X):
        m = X.shape[0]
        S = np.zeros((m, 3, 2, 2))
        S[:, 0, 0, 0] = -radius * np.cos(X[:, 0])
        S[:, 1, 0, 0] = -radius * np.sin(X[:, 0])
        return S

    return ParametricChart(2, 3, param_map=p, jac=dp, second=ddp,
                           domain=Box([-math.pi, -height / 2], [math.pi, height / 2]), label="cylinder")


# ---------------------------------------------------------------------------
# glued circles


GLUED_ARCS = (
    # (center, radius, t0, t1)
    (0j, 6.0, math.pi / 2, 3 * math.pi / 2),
    (-3j, 3.0, -math.pi / 2, math.pi / 2),
    (2j, 2.0, math.pi / 2, 3 * math.pi / 2),
    (5j, 1.0, -math.pi / 2, math.pi / 2),
)


def glued_circles() -> EmbeddedManifold:
    """Closed C^1 curve made of four circular arcs of radii 6, 3, 2, 1."""
    return EmbeddedManifold(tuple(arc_chart(c, r, t0, t1, label=f"arc{k + 1}")
                                  for k, (c, r, t0, t1) in enumerate(GLUED_ARCS)))


def _arc_end(k: int, which: int) -> tuple[np.ndarray, np.ndarray]:
    c, r, t0, t1 = GLUED_ARCS[k]
    t = (t0, t1)[which]
    z = c + r * complex(math.cos(t), math.sin(t))
    v = complex(-math.sin(t), math.cos(t))
    return np.array([z.real, z.imag]), np.array([v.real, v.imag])


def glued_joints() -> list[dict]:
    """Position and unit-tangent mismatch at the four joints of the glued curve.

    Going around the curve: arc 1 forward, arc 2 forward, arc 3 backward,
    arc 4 forward.  Tangent lines are unoriented, so the tangent mismatch
    is measured up to sign.
    """
    joints = [((0, 1), (1, 0)), ((1, 1), (2, 1)), ((2, 0), (3, 0)), ((3, 1), (0, 0))]
    out = []
    for (ka, ea), (kb, eb) in joints:
        pa, va = _arc_end(ka, ea)
        pb, vb = _arc_end(kb, eb)
        out.append({"arcs": (ka + 1, kb + 1), "position_gap": float(np.linalg.norm(pa - pb)),
                    "tangent_gap": float(min(np.linalg.norm(va - vb), np.linalg.norm(va + vb)))})
    return out


def glued_circles_construction(threshold: float = 0.99) -> Construction:
    return Construction(
        "glued-circles", glued_circles(),
        Claim("fills-box", {"box": [[-20.0, -20.0], [20.0, 20.0]], "cell": 0.5, "threshold": threshold},
              "tangent lines of the glued curve fill the plane"),
        "Four circular arcs glued into a closed C^1 curve whose tangent lines cover the whole plane; "
        "each arc alone misses a disk and a slab.")


# ---------------------------------------------------------------------------
# tangent developables


def tangent_developable(g, one_sided: bool = True, v_min: float = 0.05, v_max: float = 5.0,
                        u_range=None, tol: float = 1e-9) -> ParametricChart:
    """Ruled surface ``x(u, v) = g(u) + v g'(u)`` over a curve chart ``g``.

    One-sided surfaces take ``v`` in ``(v_min, v_max)``, two-sided ones
    ``(-v_max, v_max)``.
    """
    if g.d != 1:
        raise ValueError("tangent developables are built on curves")
    if one_sided and v_min <= 0:
        raise ValueError("one-sided developables need v_min > 0")
    ulo, uhi = (g.domain.lo[0], g.domain.hi[0]) if u_range is None else u_range
    U = (ulo + (uhi - ulo) * (np.arange(64) + 0.5) / 64)[:, None]
    speed = np.linalg.norm(g.tangent_vectors(U)[:, :, 0], axis=1)
    if np.any(speed < tol):
        raise DegenerateRuling(f"curve has a vanishing derivative near u={float(U[np.argmin(speed), 0]):.4g}")
    n = g.n
    d1 = lambda U: g.tangent_vectors(U)[:, :, 0]
    d2 = lambda U: g.second_vectors(U)[:, :, 0, 0]

    def p(X):
        return g.embed_batch(X[:, :1]) + X[:, 1:2] * d1(X[:, :1])

    def jac(X):
        U, v = X[:, :1], X[:, 1:2]
        return np.stack([d1(U) + v * d2(U), d1(U)], axis=2)

    def second(X):
        U, v = X[:, :1], X[:, 1:2]
        d3 = fd_jacobian(d2, U)[:, :, 0]
        S = np.zeros((X.shape[0], n, 2, 2))
        S[:, :, 0, 0] = d2(U) + v * d3
        S[:, :, 0, 1] = S[:, :, 1, 0] = d2(U)
        return S

    lo = [ulo, v_min if one_sided else -v_max]
    return ParametricChart(2, n, param_map=p, jac=jac, second=second, domain=Box(lo, [uhi, v_max]),
                           label=f"developable({g.label})")


def developable_construction(u_range=(-1.0, 1.0), v_min: float = 0.05, v_max: float = 5.0,
                             max_slope: float = 3.3) -> Construction:
    surf = tangent_developable(twisted_quartic(), True, v_min, v_max, u_range=u_range)
    return Construction(
        "tangent-developable-r4", surf,
        Claim("measure-zero-in-R^n", {"box": [[-2.0] * 4, [2.0] * 4], "max_slope": max_slope},
              "the union of tangent planes of the one-sided developable is Lebesgue-null in R^4"),
        "One-sided tangent developable of the twisted quartic in R^4: its tangent planes form a "
        "3-parameter family, so their union has 4-dimensional measure zero.")


# ---------------------------------------------------------------------------
# Peano-type tangent curve


def hilbert_points(order: int) -> np.ndarray:
    """Integer cell coordinates visited by the Hilbert curve on a ``2^order`` grid."""
    nside = 1 << order
    t = np.arange(nside * nside, dtype=np.int64)
    x = np.zeros_like(t)
    y = np.zeros_like(t)
    s = 1
    while s < nside:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        flip = (ry == 0) & (rx == 1)
        x = np.where(flip, s - 1 - x, x)
        y = np.where(flip, s - 1 - y, y)
        swap = ry == 0
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        x = x + s * rx
        y = y + s * ry
        t //= 4
        s *= 2
    return np.stack([x, y], axis=1)


def hilbert_curve(order: int) -> Callable[[np.ndarray], np.ndarray]:
    """Piecewise-linear map ``[0, 1] -> [0, 1]^2`` through the cell centres in Hilbert order.

    Vertex ``j`` is reached at time ``(j + 1/2) / 4^order``; the map is
    constant before the first and after the last vertex.
    """
    V = (hilbert_points(order) + 0.5) / (1 << order)
    tv = (np.arange(V.shape[0]) + 0.5) / V.shape[0]

    def phi(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, tv, V[:, 0]), np.interp(t, tv, V[:, 1])], axis=-1)

    return phi


def hilbert_knots(order: int, t_end: float = 1.0) -> np.ndarray:
    """Times in ``[0, t_end]`` where the Hilbert approximation changes slope, with both ends."""
    N = 4 ** order
    tv = (np.arange(N) + 0.5) / N
    return np.concatenate([[0.0], tv[tv < t_end], [t_end]])


def exact_tangent_solution(phi: Callable, knots: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Closed-form solution of ``alpha' = phi - alpha``, ``alpha(0) = 0``, for piecewise-linear ``phi``.

    On a piece where ``phi(s) = p + q s`` the solution is
    ``phi(s) - q + C e^{-s}``; the constants are chained across ``knots``.
    """
    P = phi(knots)
    a = np.zeros((knots.size, 2))
    Q = np.diff(P, axis=0) / np.diff(knots)[:, None]
    for i in range(knots.size - 1):
        dt = knots[i + 1] - knots[i]
        a[i + 1] = P[i + 1] - Q[i] + (a[i] - P[i] + Q[i]) * math.exp(-dt)
    j = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.size - 2)
    ds = t - knots[j]
    return phi(t) - Q[j] + (a[j] - P[j] + Q[j]) * np.exp(-ds)[:, None]


@dataclass(frozen=True, eq=False)
class PeanoCurve:
    order: int
    step: float
    chart: ParametricChart
    t: np.ndarray
    alpha: np.ndarray
    phi: Callable
    knots: np.ndarray = field(repr=False)

    def ode_residual(self) -> float:
        """``max |alpha + alpha' - phi|`` for the interpolated curve, at the nodes and step midpoints."""
        tm = 0.5 * (self.t[1:] + self.t[:-1])
        T = np.concatenate([self.t[1:-1], tm])
        X = T[:, None]
        a = self.chart.embed_batch(X)
        da = self.chart.tangent_vectors(X)[:, :, 0]
        return float(np.max(np.abs(a + da - self.phi(T))))

    def solution_error(self) -> float:
        """Max deviation of the RK4 nodes from the closed-form solution."""
        return float(np.max(np.abs(self.alpha - exact_tangent_solution(self.phi, self.knots, self.t))))


def peano_tangent_curve(order: int, step: float = 1e-4, t_end: float = 1.0) -> PeanoCurve:
    """Integrate ``alpha' = phi(t) - alpha``, ``alpha(0) = 0`` with classical RK4.

    ``phi`` is the order-``order`` Hilbert approximation.  The tangent line
    of ``alpha`` at time ``t`` passes through ``phi(t)``.  The time grid
    puts a node on every slope change of ``phi`` and splits each linear
    piece into equal steps no longer than ``step``.  The returned chart
    interpolates the nodes by cubic Hermite pieces whose node slopes are
    the ODE right-hand side.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not step > 0:
        raise IntegrationUnstable("step must be positive")
    # RK4 amplification factor for y' = -y
    amp = 1 - step + step ** 2 / 2 - step ** 3 / 6 + step ** 4 / 24
    if abs(amp) >= 1:
        raise IntegrationUnstable(f"RK4 step {step} is outside the stability interval")
    phi = hilbert_curve(order)
    knots = hilbert_knots(order, t_end)
    pieces = [np.linspace(t0, t1, max(1, math.ceil((t1 - t0) / step - 1e-9)) + 1)[:-1]
              for t0, t1 in zip(knots[:-1], knots[1:]) if t1 > t0]
    t = np.concatenate(pieces + [[knots[-1]]])
    N = t.size - 1
    P0 = phi(t)
    Ph = phi(0.5 * (t[1:] + t[:-1]))
    a = np.zeros((N + 1, 2))
    ax, ay = 0.0, 0.0
    for i in range(N):
        h = t[i + 1] - t[i]
        px, py = P0[i]
        qx, qy = Ph[i]
        rx, ry = P0[i + 1]
        k1x, k1y = px - ax, py - ay
        k2x, k2y = qx - (ax + 0.5 * h * k1x), qy - (ay + 0.5 * h * k1y)
        k3x, k3y = qx - (ax + 0.5 * h * k2x), qy - (ay + 0.5 * h * k2y)
        k4x, k4y = rx - (ax + h * k3x), ry - (ay + h * k3y)
        ax += h * (k1x + 2 * k2x + 2 * k3x + k4x) / 6
        ay += h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6
        a[i + 1] = ax, ay
    bound = 10.0 * (1.0 + float(np.max(np.abs(P0))))
    if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > bound:
        raise IntegrationUnstable("solution left the energy bound")
    spline = CubicHermiteSpline(t, a, P0 - a, axis=0)
    ds = spline.derivative()
    dds = ds.derivative()
    chart = ParametricChart(
        1, 2,
        param_map=lambda X: spline(X[:, 0]),
        jac=lambda X: ds(X[:, 0])[:, :, None],
        second=lambda X: dds(X[:, 0])[:, :, None, None],
        domain=Box([0.0], [t[-1]]), label=f"peano{order}",
    )
    return PeanoCurve(order, step, chart, t, a, phi, knots)


def peano_construction(order: int, step: float = 1e-4, threshold: float = 0.9) -> Construction:
    return Construction(
        "peano-curve", peano_tangent_curve(order, step),
        Claim("fills-box", {"box": [[0.0, 0.0], [1.0, 1.0]], "cell": 0.05, "threshold": threshold},
              "tangent points alpha + s alpha' near s = 1 cover the unit square"),
        "Solution of alpha + alpha' = phi with phi a Hilbert-curve approximation; the point at "
        "parameter s = 1 on each tangent line is phi(t), so tangent lines reach the whole square "
        "as the order grows.")


# ---------------------------------------------------------------------------
# Cantor hyperplane families


def cantor_ratio(dim: float) -> float:
    """Ratio ``r`` of a two-map self-similar set of dimension ``dim``: ``2 r^dim = 1``."""
    if dim <= 0:
        return 0.0
    return 2.0 ** (-1.0 / dim)


def cantor_points(dim: float, depth: int) -> np.ndarray:
    """Left endpoints of the depth-``depth`` intervals of the two-map Cantor set in ``[0, 1]``.

    Point ``i`` has binary address given by the bits of ``i``, least
    significant bit first, so every prefix of length ``2^j`` samples the
    set evenly at level ``j``.  For ``dim = 0`` the set is ``{0, 1}``.
    """
    r = cantor_ratio(dim)
    if r == 0.0:
        return np.array([0.0, 1.0])
    i = np.arange(1 << depth, dtype=np.int64)
    t = np.zeros(i.size)
    for k in range(depth):
        t += ((i >> k) & 1) * (1.0 - r) * r ** k
    return t


@dataclass(frozen=True, eq=False)
class HyperplaneFamily:
    """Hyperplanes ``{y = a.x + b}`` over a window ``x in [lo, hi]^n``."""

    parameters: np.ndarray  # rows (a_1..a_n, b)
    window: tuple
    seed: int = 0

    @property
    def n(self) -> int:
        return self.parameters.shape[1] - 1

    def points(self, count: int, start: int = 0) -> np.ndarray:
        """Point ``i`` lies on hyperplane ``i mod P`` at an x drawn from a Halton sequence."""
        P = self.parameters.shape[0]
        idx = np.arange(start, start + count, dtype=np.int64)
        lo, hi = self.window
        X = lo + (hi - lo) * sampling.halton(idx // P, self.n, self.seed)
        ab = self.parameters[idx % P]
        y = np.sum(ab[:, :-1] * X, axis=1) + ab[:, -1]
        return np.concatenate([X, y[:, None]], axis=1)

    def __call__(self, count: int) -> np.ndarray:
        return self.points(count)


def cantor_hyperplane_family(s: float, n: int = 1, depth: int = 8, tolerance: float = 0.15) -> Construction:
    """Hyperplanes whose slope parameter runs over ``E = C u {0}``, ``dim C = s - n``.

    The parameters are ``(a, b) = (t e_1, 0)`` with ``t`` in ``C``; over the
    window ``x in [1, 2]^n`` the union is a bi-Lipschitz image of
    ``[1, 2]^n x C`` and so has dimension ``s``.
    """
    if not n <= s <= n + 1:
        raise ValueError("s must lie in [n, n + 1]")
    if depth < 4:
        raise ValueError("depth must be >= 4")
    t = cantor_points(s - n, depth)
    if not np.any(t == 0.0):
        t = np.concatenate([[0.0], t])
    params = np.zeros((t.size, n + 1))
    params[:, 0] = t
    fam = HyperplaneFamily(params, (1.0, 2.0))
    box = [[1.0] * n + [0.0], [2.0] * n + [2.0]]
    return Construction(
        "cantor-hyperplanes", fam,
        Claim("dimension", {"box": box, "value": float(s), "tolerance": tolerance},
              "the union of the hyperplane family has dimension s"),
        f"Hyperplanes y = a.x + b with (a, b) on a Cantor set of dimension {s - n:g} plus the origin; "
        f"the union has dimension n + min(dim E, 1) = {s:g}.")


# ---------------------------------------------------------------------------
# spheres and line fields


def sphere_charts(n: int, radius: float = 1.0) -> list:
    """Charts covering ``S^n`` of the given radius in ``R^(n+1)``.

    The circle uses one angle chart; higher spheres use the ``2(n+1)``
    radial projections of the faces of the cube ``[-1, 1]^(n+1)``.
    """
    if n == 1:
        return [unit_circle(radius)]
    charts = []
    N = n + 1
    for axis in range(N):
        for sign in (1.0, -1.0):
            others = [j for j in range(N) if j != axis]

            def lift(X, axis=axis, sign=sign, others=others):
                V = np.empty((X.shape[0], N))
                V[:, axis] = sign
                V[:, others] = X
                return V

            def p(X, lift=lift):
                V = lift(X)
                return radius * V / np.linalg.norm(V, axis=1, keepdims=True)

            def jac(X, lift=lift, others=others):
                V = lift(X)
                r = np.linalg.norm(V, axis=1)[:, None, None]
                u = V / r[:, :, 0]
                P = np.eye(N)[None] - u[:, :, None] * u[:, None, :]
                return radius * P[:, :, others] / r

            def second(X, lift=lift, others=others):
                V = lift(X)
                r = np.linalg.norm(V, axis=1)
                u = V / r[:, None]
                E = np.eye(N)[others]  # (n, N): e_{k_a}
                ua = u[:, others]  # (m, n)
                S = (-np.einsum("ab,mi->miab", np.eye(n), u)
                     - np.einsum("ai,mb->miab", E, ua)
                     - np.einsum("bi,ma->miab", E, ua)
                     + 3.0 * np.einsum("mi,ma,mb->miab", u, ua, ua))
                return radius * S / (r ** 2)[:, None, None, None]

            charts.append(ParametricChart(n, N, param_map=p, jac=jac, second=second,
                                          domain=Box(-np.ones(n), np.ones(n)),
                                          label=f"face{'+' if sign > 0 else '-'}{axis}"))
    return charts


def _rotation_field(U: np.ndarray) -> np.ndarray:
    X = np.empty_like(U)
    X[:, 0::2] = -U[:, 1::2]
    X[:, 1::2] = U[:, 0::2]
    return X


def sphere_direction(mode: str, n: int, angle: float = 0.3) -> Callable[[np.ndarray], np.ndarray]:
    """Direction field on ``S^n`` as a function of the unit position ``u``."""
    if mode == "tangent_field":
        if n % 2 == 0:
            raise NoSuchField(f"S^{n} carries no continuous nowhere-vanishing tangent field")
        return _rotation_field
    if mode == "radial":
        return lambda U: U
    if mode == "tilted":
        if n % 2 == 1:
            T = _rotation_field
        else:
            # projection of e_1 onto the tangent plane; vanishes only at +-e_1
            def T(U):
                return np.eye(U.shape[1])[0] - U[:, :1] * U
        ca, sa = math.cos(angle), math.sin(angle)
        return lambda U: ca * T(U) + sa * U
    raise ValueError(f"unknown sphere line mode {mode!r}")


def sphere_line_bundles(n: int = 1, mode: str = "tangent_field", angle: float = 0.3,
                        radius: float = 1.0) -> Construction:
    direction = sphere_direction(mode, n, angle)
    bundles = []
    for ch in sphere_charts(n, radius):
        bundles.append(line_bundle(ch, lambda X, ch=ch: direction(ch.embed_batch(X) / radius), label=ch.label))
    N = n + 1
    if mode == "tangent_field":
        claim = Claim("excludes-region", {"region": {"shape": "ball", "center": [0.0] * N,
                                                     "radius": radius * (1 - 1e-9)}},
                      "tangent lines of a nowhere-vanishing field miss the open ball")
        text = "Lines along a unit tangent field of the sphere: their union is the complement of the open ball."
    elif mode == "radial":
        claim = Claim("fills-box", {"box": [[-2.0 * radius] * N, [2.0 * radius] * N],
                                    "cell": 0.1 * radius, "threshold": 0.99},
                      "radial lines cover a box around the sphere, centre included")
        text = "Radial lines through the sphere: every point of space lies on one."
    else:
        claim = Claim("fills-box", {"box": [[-0.1 * radius] * n + [0.95 * radius], [0.1 * radius] * n + [1.05 * radius]],
                                    "cell": 0.02 * radius, "threshold": 0.99},
                      "lines tilted away from the tangent planes cover an open box around the pole")
        text = f"Lines tilted by {angle:g} rad out of the tangent planes: their union has interior points."
    return Construction(f"sphere-{mode.replace('_field', '')}", bundles, claim, text)


def ellipsoid_pushforward(T, construction: Construction) -> Construction:
    """Image of a sphere-line construction under ``q -> L q + c``.

    Base points map by ``T``; fibre directions by ``L`` (renormalised by the
    frame evaluator).  Ball exclusion claims become ellipsoid exclusions.
    """
    if isinstance(T, tuple):
        L, c = T
    else:
        L, c = T, None
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    if L.ndim != 2 or L.shape != (n, n) or not np.all(np.isfinite(L)) or np.linalg.cond(L) > 1e12:
        raise SingularTransform("affine map must be invertible")
    bundles = construction.builds if isinstance(construction.builds, (list, tuple)) else [construction.builds]
    out = []
    for b in bundles:
        ch = affine_image(b.base, L, c)
        out.append(FramedBundle(ch, b.k, lambda X, b=b: np.einsum("ij,mjk->mik", L, b.raw_frame(X)),
                                kind=b.kind, label=b.label))
    claim = construction.claim
    if claim.kind == "excludes-region" and claim.params["region"]["shape"] == "ball":
        reg = claim.params["region"]
        claim = Claim("excludes-region", {"region": {
            "shape": "ellipsoid", "inverse": np.linalg.inv(L).tolist(),
            "center": (c + L @ np.asarray(reg["center"], float)).tolist(), "radius": reg["radius"]}},
            "the image lines miss the open ellipsoid")
    return Construction(construction.id.replace("sphere", "ellipsoid"), out, claim,
                        "Affine image of " + construction.statement[0].lower() + construction.statement[1:])


# ---------------------------------------------------------------------------
# convex curves with line fields


def convex_curve_bundle(f: Callable, phi="tangent", domain=(-1.0, 1.0), df: Callable | None = None,
                        box=((-3.0, -3.0), (3.0, 3.0)), cell: float = 0.05,
                        threshold: float = 0.5) -> Construction:
    """Line field ``(cos phi, sin phi)`` over the graph of a strictly convex ``f``.

    ``f`` and ``df`` act on 1-d arrays.  ``phi`` is a callable on 1-d arrays,
    ``"tangent"`` (``arctan f'``) or ``"vertical"``.
    """
    lo, hi = domain
    xs = np.linspace(lo, hi, 259)[1:-1]
    fx = np.asarray(f(xs), dtype=float)
    second = fx[:-2] - 2 * fx[1:-1] + fx[2:]
    tol = 1e-12 * (1.0 + float(np.max(np.abs(fx))))
    if np.any(second <= tol):
        raise NotStrictlyConvex("sampled second differences are not all positive")
    kw = {"jac": (lambda X: np.asarray(df(X[:, 0]))[:, None, None])} if df is not None else {"derivative_mode": "fd"}
    chart = Chart(1, 2, graph_map=lambda X: np.asarray(f(X[:, 0]))[:, None], domain=Box([lo], [hi]),
                  label="convex-graph", **kw)
    if phi == "tangent":
        angle = lambda X: np.arctan(chart.graph_jacobian(X)[:, 0, 0])
    elif phi == "vertical":
        angle = lambda X: np.full(X.shape[0], math.pi / 2)
    else:
        angle = lambda X: np.asarray(phi(X[:, 0]), dtype=float)
    bundle = line_bundle(chart, lambda X: np.stack([np.cos(angle(X)), np.sin(angle(X))], axis=1),
                         label="convex-lines")
    if phi == "vertical":
        slab = {"shape": "box", "lo": [lo, box[0][1]], "hi": [hi, box[1][1]]}
        claim = Claim("covers-region", {"box": [list(box[0]), list(box[1])], "cell": cell, "region": slab,
                                        "threshold": 0.99},
                      "vertical lines over the interval cover the slab above it")
    else:
        claim = Claim("fills-box", {"box": [list(box[0]), list(box[1])], "cell": cell, "threshold": threshold},
                      "the lines have interior points in the reference box")
    return Construction("convex-curve", bundle, claim,
                        "Line field over the graph of a strictly convex function; the union has interior.")


# ---------------------------------------------------------------------------
# products


def product_sweep(a, b, count: int | None = None, seed: int = 0) -> PointCloud:
    """Cartesian product of two clouds.

    The full product is returned when it has at most ``count`` points (or
    ``count`` is None); otherwise ``count`` index pairs are drawn from a
    two-dimensional Halton sequence.
    """
    A, B = as_points(a), as_points(b)
    na, nb = A.shape[0], B.shape[0]
    if count is None or na * nb <= count:
        ia = np.repeat(np.arange(na), nb)
        ib = np.tile(np.arange(nb), na)
    else:
        U = sampling.halton(np.arange(count), 2, seed)
        ia = np.minimum((U[:, 0] * na).astype(np.int64), na - 1)
        ib = np.minimum((U[:, 1] * nb).astype(np.int64), nb - 1)
    P = np.concatenate([A[ia], B[ib]], axis=1)
    return PointCloud(P.shape[1], P, metadata={"product_of": [na, nb], "count": int(P.shape[0])})


def product_claim(a: Claim, b: Claim, threshold: float) -> Claim:
    """Fills-box claim on the product of two fills-box claims with a shared cell."""
    if a.kind != "fills-box" or b.kind != "fills-box" or a.params["cell"] != b.params["cell"]:
        raise ValueError("can only compose fills-box claims on a shared cell")
    box = [list(a.params["box"][0]) + list(b.params["box"][0]), list(a.params["box"][1]) + list(b.params["box"][1])]
    return Claim("fills-box", {"box": box, "cell": a.params["cell"], "threshold": threshold},
                 "the product of two tangent sweeps fills the product box")


# ---------------------------------------------------------------------------
# line families over the disk


@dataclass(frozen=True, eq=False)
class DiskLineFamily:
    """``kind`` is ``"halfline"`` (``t -> (t, t alpha + beta)``) or ``"projective"`` (``t -> (t + f, t beta + x)``)."""

    kind: str
    n: int
    first: Callable  # alpha for half-lines, f for projective lines
    beta: Callable
    t_range: tuple


def _rotate2(X: np.ndarray, angle: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    out = X.copy()
    out[:, 0] = c * X[:, 0] - s * X[:, 1]
    out[:, 1] = s * X[:, 0] + c * X[:, 1]
    return out


def swirl_halfline_family(n: int = 2, swirl: float = 2.0, t_range=(0.1, 12.0), r_min: float = 4.0,
                          r_max: float = 10.0, cell: float = 0.5, threshold: float = 0.95) -> Construction:
    """Half-lines with ``alpha`` the identity on the boundary and a swirl inside.

    For ``n >= 2`` the first two coordinates are rotated by
    ``swirl (1 - |x|^2)``; for ``n = 1`` ``alpha(x) = x + swirl x (1 - x^2) / 4``.
    ``beta`` is bounded.
    """
    if n == 1:
        alpha = lambda X: X + swirl * X * (1 - X ** 2) / 4
    else:
        alpha = lambda X: _rotate2(X, swirl * (1 - np.sum(X * X, axis=1)))
    beta = lambda X: 0.5 * np.sin(3.0 * X + 1.0)
    fam = DiskLineFamily("halfline", n, alpha, beta, tuple(t_range))
    w = r_max * math.tan(math.pi / 6) + cell
    box = [[0.0] + [-w] * n, [r_max] + [w] * n]
    cone = {"shape": "cone", "axis": [1.0] + [0.0] * n, "half_angle": math.pi / 6, "r_min": r_min, "r_max": r_max}
    return Construction(
        "halfline-swirl", fam,
        Claim("covers-region", {"box": box, "cell": cell, "region": cone, "threshold": threshold},
              "the half-lines cover the far part of a cone around the t axis"),
        "Half-lines (t, t alpha(x) + beta(x)) over the disk with alpha fixing the boundary sphere: "
        "far from the origin they cover every direction within pi/6 of the t axis.")


def projective_paraboloid_family(n: int = 1, t_range=(-4.0, 4.0), box=None, cell: float = 0.1,
                                 threshold: float = 0.2) -> Construction:
    """Lines ``(t + |x|^2 - 1, x - t x)`` over the disk; they cross the cap transversally."""
    f = lambda X: np.sum(X * X, axis=1) - 1.0
    beta = lambda X: -X
    fam = DiskLineFamily("projective", n, f, beta, tuple(t_range))
    box = box or [[-2.0] * (n + 1), [2.0] * (n + 1)]
    return Construction(
        "projective-paraboloid", fam,
        Claim("fills-box", {"box": box, "cell": cell, "threshold": threshold},
              "the union of the lines has interior points"),
        "Lines through the paraboloid cap t = |x|^2 - 1 over the disk, never tangent to it; "
        "their union has nonempty interior.")


def sweep_disk_family(fam: DiskLineFamily, spec, threads: int = 1) -> PointCloud:
    from .codiagonal import halfline_family, projective_line_family

    run = halfline_family if fam.kind == "halfline" else projective_line_family
    return run(fam.first, fam.beta, fam.t_range, spec, fam.n, threads=threads)
