"""Embedded submanifolds as rigidly placed charts with derivative oracles.

Two chart flavours are provided.  A :class:`Chart` is a graph chart: the
piece of manifold is ``{Q (x, f(x)) + c : x in D}`` for a box ``D`` in R^d.
A :class:`ParametricChart` is an arbitrary immersion ``x -> Q p(x) + c``;
it is used for closed curves, spheres and ruled surfaces that are not
graphs over a coordinate plane.

Every evaluator works on batches.  User-supplied maps receive an
``(m, d)`` array and must return ``(m, ...)`` arrays; the module-level
functions also accept a single point and then return a single result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DerivativeUnavailable, DomainViolation, NotAGraphChart, NotAHypersurface

EPS = float(np.finfo(float).eps)
FD_STEP = EPS ** (1.0 / 3.0)
FD2_STEP = EPS ** 0.25
TOL_RANK = 1e-8
TOL_ORTH = 1e-9

ArrayMap = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# small linear-algebra helpers


def numeric_rank(M: np.ndarray, tol: float = TOL_RANK) -> np.ndarray | int:
    """Rank of (a stack of) matrices, counting singular values above ``tol * s_max``."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] == 0 or M.shape[-2] == 0:
        return np.zeros(M.shape[:-2], dtype=int) if M.ndim > 2 else 0
    s = np.linalg.svd(M, compute_uv=False)
    r = np.sum(s > tol * s[..., :1], axis=-1)
    return int(r) if M.ndim == 2 else r


def orthonormalize(B: np.ndarray, complete: bool = False) -> np.ndarray:
    """Orthonormal basis of the column span of ``B`` via Householder QR.

    The columns are sign-normalised so that ``R`` has a non-negative
    diagonal; this keeps frames continuous in ``B`` and reproducible.
    With ``complete=True`` the trailing columns span the orthogonal
    complement.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[-1]
    q, r = np.linalg.qr(B, mode="complete" if complete else "reduced")
    s = np.sign(np.diagonal(r, axis1=-2, axis2=-1)[..., :k])
    s[s == 0] = 1.0
    q = q.copy()
    q[..., :k] *= s[..., None, :]
    return q


# ---------------------------------------------------------------------------
# domains and finite differences


@dataclass(frozen=True, eq=False)
class Box:
    """Open axis-aligned box ``prod (lo_i, hi_i)``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(hi <= lo):
            raise ValueError("box must have positive width along every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, d: int, half: float = np.pi) -> "Box":
        return cls(-half * np.ones(d), half * np.ones(d))

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, X: np.ndarray, margin: np.ndarray | float = 0.0) -> np.ndarray:
        """Row mask of points strictly inside, keeping ``margin`` from the faces."""
        X = np.asarray(X, dtype=float)
        return np.all((X - margin > self.lo) & (X + margin < self.hi), axis=-1)

    def product(self, other: "Box") -> "Box":
        return Box(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))


def _fd_steps(X: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(X))


def fd_jacobian(func: ArrayMap, X: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of a batched map, shape ``(m, p, d)``."""
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    H = _fd_steps(X, step)
    cols = []
    for i in range(d):
        Xp = X.copy()
        Xm = X.copy()
        Xp[:, i] += H[:, i]
        Xm[:, i] -= H[:, i]
        # divide by the representable step, not the nominal one
        width = (Xp[:, i] - Xm[:, i]).reshape(m, 1)
        cols.append((np.reshape(func(Xp), (m, -1)) - np.reshape(func(Xm), (m, -1))) / width)
    return np.stack(cols, axis=-1)


def fd_second(func: ArrayMap, X: np.ndarray, step: float = FD2_STEP) -> np.ndarray:
    """Second partials by the 4-point stencil, shape ``(m, p, d, d)``.

    ``(f(x+hi+hj) - f(x+hi-hj) - f(x-hi+hj) + f(x-hi-hj)) / (4 hi hj)``;
    on the diagonal this reduces to the centred second difference with
    step ``2h``.
    """
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    H = _fd_steps(X, step)
    f = lambda Y: np.reshape(func(Y), (m, -1))
    out = None
    for i in range(d):
        for j in range(i, d):
            Ei = np.zeros_like(X)
            Ej = np.zeros_like(X)
            Ei[:, i] = H[:, i]
            Ej[:, j] = H[:, j]
            val = f(X + Ei + Ej) - f(X + Ei - Ej) - f(X - Ei + Ej) + f(X - Ei - Ej)
            val /= (4.0 * H[:, i] * H[:, j])[:, None]
            if out is None:
                out = np.zeros((m, val.shape[1], d, d))
            out[:, :, i, j] = val
            out[:, :, j, i] = val
    return out


# ---------------------------------------------------------------------------
# charts


def _as_batch(x, d: int) -> tuple[np.ndarray, bool]:
    """Return ``(X, single)`` with ``X`` of shape ``(m, d)``."""
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
        return X, True
    if X.ndim == 1:
        if X.size == d:
            return X.reshape(1, d), True
        if d == 1:
            return X.reshape(-1, 1), False
        raise DomainViolation(f"expected a point in R^{d}, got shape {X.shape}")
    if X.shape[-1] != d:
        raise DomainViolation(f"expected points in R^{d}, got shape {X.shape}")
    return X, False


@dataclass(frozen=True, eq=False)
class _ChartBase:
    d: int
    n: int
    domain: Box | None = field(default=None, kw_only=True)
    rotation: np.ndarray | None = field(default=None, kw_only=True)
    translation: np.ndarray | None = field(default=None, kw_only=True)
    derivative_mode: str = field(default="analytic", kw_only=True)
    label: str = field(default="", kw_only=True)

    def __post_init__(self):
        if self.d < 0 or self.n < 1 or self.d > self.n:
            raise ValueError(f"need 0 <= d <= n and n >= 1, got d={self.d}, n={self.n}")
        if self.derivative_mode not in ("analytic", "fd"):
            raise ValueError("derivative_mode must be 'analytic' or 'fd'")
        if self.domain is None:
            object.__setattr__(self, "domain", Box.cube(self.d))
        elif self.domain.dim != self.d:
            raise ValueError("domain dimension does not match d")
        if self.rotation is not None:
            Q = np.asarray(self.rotation, dtype=float)
            if Q.shape != (self.n, self.n) or np.max(np.abs(Q.T @ Q - np.eye(self.n))) > 1e-10:
                raise ValueError("rotation must be an orthogonal n x n matrix")
            object.__setattr__(self, "rotation", Q)
        if self.translation is not None:
            c = np.asarray(self.translation, dtype=float).reshape(self.n)
            object.__setattr__(self, "translation", c)

    # -- to be provided by subclasses: unplaced geometry
    def _raw_points(self, X):  # (m, n)
        raise NotImplementedError

    def _raw_tangent(self, X):  # (m, n, d)
        raise NotImplementedError

    def _raw_second(self, X):  # (m, n, d, d)
        raise NotImplementedError

    # -- shared machinery
    def check_domain(self, X: np.ndarray, margin=0.0) -> None:
        ok = self.domain.contains(X, margin)
        if not np.all(ok):
            bad = X[~ok][0]
            raise DomainViolation(f"point {bad.tolist()} is not inside the open domain "
                                  f"{self.domain.lo.tolist()}..{self.domain.hi.tolist()}")

    def _fd_margin(self, X, second=False):
        if self.derivative_mode != "fd":
            return 0.0
        return 2.0 * _fd_steps(X, FD2_STEP) if second else _fd_steps(X, FD_STEP)

    def place_points(self, P: np.ndarray) -> np.ndarray:
        if self.rotation is not None:
            P = P @ self.rotation.T
        if self.translation is not None:
            P = P + self.translation
        return P

    def place_vectors(self, V: np.ndarray) -> np.ndarray:
        """Rotate vectors stored along axis 1 of ``V``."""
        if self.rotation is None:
            return V
        return np.einsum("ij,mj...->mi...", self.rotation, V)

    def embed_batch(self, X: np.ndarray) -> np.ndarray:
        self.check_domain(X)
        return self.place_points(self._raw_points(X))

    def tangent_vectors(self, X: np.ndarray) -> np.ndarray:
        """Embedded first partials ``d embed / d x_i`` as columns, ``(m, n, d)``."""
        self.check_domain(X, self._fd_margin(X))
        return self.place_vectors(self._raw_tangent(X))

    def second_vectors(self, X: np.ndarray) -> np.ndarray:
        """Embedded second partials, ``(m, n, d, d)``."""
        self.check_domain(X, self._fd_margin(X, second=True))
        return self.place_vectors(self._raw_second(X))

    def placement(self) -> tuple[np.ndarray, np.ndarray]:
        Q = np.eye(self.n) if self.rotation is None else self.rotation
        c = np.zeros(self.n) if self.translation is None else self.translation
        return Q, c


@dataclass(frozen=True, eq=False)
class Chart(_ChartBase):
    """Graph chart ``x -> Q (x, f(x)) + c`` over an open box.

    ``graph_map`` maps ``(m, d)`` to ``(m, n - d)``; the optional ``jac`` and
    ``hess`` return ``(m, n - d, d)`` and ``(m, n - d, d, d)``.  In ``"fd"``
    mode the derivatives are always computed by finite differences.
    """

    graph_map: ArrayMap = None
    jac: ArrayMap | None = None
    hess: ArrayMap | None = None

    @property
    def codim(self) -> int:
        return self.n - self.d

    def _f(self, X):
        m = X.shape[0]
        if self.codim == 0:
            return np.zeros((m, 0))
        return np.reshape(self.graph_map(X), (m, self.codim))

    def graph(self, X: np.ndarray) -> np.ndarray:
        self.check_domain(X)
        return self._f(X)

    def graph_jacobian(self, X: np.ndarray) -> np.ndarray:
        m = X.shape[0]
        if self.codim == 0:
            return np.zeros((m, 0, self.d))
        if self.derivative_mode == "fd":
            self.check_domain(X, self._fd_margin(X))
            return fd_jacobian(self._f, X)
        if self.jac is None:
            raise DerivativeUnavailable("analytic Jacobian requested but chart has no jac evaluator")
        self.check_domain(X)
        return np.reshape(self.jac(X), (m, self.codim, self.d))

    def graph_hessian(self, X: np.ndarray) -> np.ndarray:
        m = X.shape[0]
        if self.codim == 0:
            return np.zeros((m, 0, self.d, self.d))
        if self.derivative_mode == "fd":
            self.check_domain(X, self._fd_margin(X, second=True))
            return fd_second(self._f, X)
        if self.hess is None:
            raise DerivativeUnavailable("analytic Hessian requested but chart has no hess evaluator")
        self.check_domain(X)
        return np.reshape(self.hess(X), (m, self.codim, self.d, self.d))

    def _raw_points(self, X):
        return np.concatenate([X, self._f(X)], axis=1)

    def _raw_tangent(self, X):
        m = X.shape[0]
        eye = np.broadcast_to(np.eye(self.d), (m, self.d, self.d))
        return np.concatenate([eye, self.graph_jacobian(X)], axis=1)

    def _raw_second(self, X):
        m = X.shape[0]
        zero = np.zeros((m, self.d, self.d, self.d))
        return np.concatenate([zero, self.graph_hessian(X)], axis=1)

    def placed(self, rotation=None, translation=None) -> "Chart":
        return Chart(self.d, self.n, graph_map=self.graph_map, jac=self.jac, hess=self.hess,
                     domain=self.domain, rotation=rotation, translation=translation,
                     derivative_mode=self.derivative_mode, label=self.label)


@dataclass(frozen=True, eq=False)
class ParametricChart(_ChartBase):
    """Immersion chart ``x -> Q p(x) + c``.

    ``param_map`` maps ``(m, d)`` to ``(m, n)``; ``jac`` returns ``(m, n, d)``
    and ``second`` returns ``(m, n, d, d)``.
    """

    param_map: ArrayMap = None
    jac: ArrayMap | None = None
    second: ArrayMap | None = None

    def _p(self, X):
        return np.reshape(self.param_map(X), (X.shape[0], self.n))

    def _raw_points(self, X):
        return self._p(X)

    def _raw_tangent(self, X):
        m = X.shape[0]
        if self.derivative_mode == "fd":
            return fd_jacobian(self._p, X)
        if self.jac is None:
            raise DerivativeUnavailable("analytic Jacobian requested but chart has no jac evaluator")
        return np.reshape(self.jac(X), (m, self.n, self.d))

    def _raw_second(self, X):
        m = X.shape[0]
        if self.derivative_mode == "fd":
            return fd_second(self._p, X)
        if self.second is None:
            raise DerivativeUnavailable("analytic second derivatives requested but chart has none")
        return np.reshape(self.second(X), (m, self.n, self.d, self.d))

    def placed(self, rotation=None, translation=None) -> "ParametricChart":
        return ParametricChart(self.d, self.n, param_map=self.param_map, jac=self.jac,
                               second=self.second, domain=self.domain, rotation=rotation,
                               translation=translation, derivative_mode=self.derivative_mode,
                               label=self.label)


AnyChart = Chart | ParametricChart


@dataclass(frozen=True, eq=False)
class EmbeddedManifold:
    """Union of charts sharing an ambient dimension.  Overlaps are not tracked."""

    charts: tuple
    labels: tuple = ()

    def __post_init__(self):
        charts = tuple(self.charts)
        if not charts:
            raise ValueError("an embedded manifold needs at least one chart")
        if len({c.n for c in charts}) != 1:
            raise ValueError("all charts must share the ambient dimension")
        labels = tuple(self.labels) if self.labels else tuple(c.label or f"chart{i}" for i, c in enumerate(charts))
        if len(labels) != len(charts):
            raise ValueError("one label per chart")
        object.__setattr__(self, "charts", charts)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.charts[0].n

    def __iter__(self):
        return iter(self.charts)

    def __len__(self):
        return len(self.charts)


@dataclass(frozen=True)
class OsculatingReport:
    point: np.ndarray
    tangent_rank: int
    osculating_rank: int
    hessian_min_singular_value: float | None


# ---------------------------------------------------------------------------
# operations


def _require_graph(chart) -> Chart:
    if not isinstance(chart, Chart):
        raise NotAGraphChart("this operation needs a graph chart")
    return chart


def embed(chart: AnyChart, x) -> np.ndarray:
    X, single = _as_batch(x, chart.d)
    P = chart.embed_batch(X)
    return P[0] if single else P


def jacobian(chart: Chart, x) -> np.ndarray:
    """Graph-coordinate Jacobian ``J_x f`` (before placement), ``(n-d) x d``."""
    _require_graph(chart)
    X, single = _as_batch(x, chart.d)
    J = chart.graph_jacobian(X)
    return J[0] if single else J


def hessian(chart: Chart, x) -> np.ndarray:
    _require_graph(chart)
    X, single = _as_batch(x, chart.d)
    H = chart.graph_hessian(X)
    return H[0] if single else H


def tangent_frame(chart: AnyChart, x) -> np.ndarray:
    """Orthonormal ``n x d`` basis of the tangent space."""
    X, single = _as_batch(x, chart.d)
    T = orthonormalize(chart.tangent_vectors(X))
    return T[0] if single else T


def normal_frame(chart: AnyChart, x) -> np.ndarray:
    """Orthonormal ``n x (n-d)`` basis of the normal space."""
    X, single = _as_batch(x, chart.d)
    F = orthonormalize(chart.tangent_vectors(X), complete=True)[..., chart.d:]
    return F[0] if single else F


def full_frame(chart: AnyChart, x) -> np.ndarray:
    """``[T | N]``, an orthogonal ``n x n`` matrix."""
    X, single = _as_batch(x, chart.d)
    F = orthonormalize(chart.tangent_vectors(X), complete=True)
    return F[0] if single else F


def osculating_report(chart: AnyChart, x, tol: float = TOL_RANK) -> OsculatingReport:
    X, _ = _as_batch(x, chart.d)
    X = X[:1]
    d = chart.d
    B = chart.tangent_vectors(X)[0]
    S = chart.second_vectors(X)[0]
    iu, ju = np.triu_indices(d)
    M = np.concatenate([B, S[:, iu, ju]], axis=1)
    hmin = None
    if isinstance(chart, Chart) and chart.codim == 1:
        hmin = float(np.linalg.svd(chart.graph_hessian(X)[0, 0], compute_uv=False)[-1])
    return OsculatingReport(point=X[0].copy(), tangent_rank=int(numeric_rank(B, tol)),
                            osculating_rank=int(numeric_rank(M, tol)),
                            hessian_min_singular_value=hmin)


def shape_operator(chart: AnyChart, x) -> np.ndarray:
    """Second fundamental form along the unit normal in an orthonormal tangent basis.

    For a graph chart at a critical point of ``f`` this is ``Hess f``.
    """
    if chart.n - chart.d != 1:
        raise NotAHypersurface(f"codimension {chart.n - chart.d} != 1")
    X, _ = _as_batch(x, chart.d)
    X = X[:1]
    B = chart.tangent_vectors(X)[0]
    S = chart.second_vectors(X)[0]
    Q, R = np.linalg.qr(B, mode="complete")
    nu = Q[:, chart.d]
    II = np.einsum("i,ijk->jk", nu, S)
    Rinv = np.linalg.inv(R[: chart.d])
    return Rinv.T @ II @ Rinv


def is_inflection(chart: AnyChart, x, tol: float = 1e-8) -> bool:
    """True when the second fundamental form is degenerate at ``x``."""
    W = shape_operator(chart, x)
    return bool(np.linalg.svd(W, compute_uv=False)[-1] < tol)


def nonlinearity_probe(chart: Chart, segment: Sequence, samples: int = 257) -> float:
    """Largest gap between ``f`` along a segment and the chord of its end values."""
    _require_graph(chart)
    if samples < 3:
        raise ValueError("need at least 3 samples")
    p0 = np.atleast_1d(np.asarray(segment[0], dtype=float))
    p1 = np.atleast_1d(np.asarray(segment[1], dtype=float))
    t = np.linspace(0.0, 1.0, samples)[:, None]
    P = (1.0 - t) * p0 + t * p1
    F = chart.graph(P)
    chord = (1.0 - t) * F[0] + t * F[-1]
    return float(np.max(np.linalg.norm(F - chord, axis=1)))


# ---------------------------------------------------------------------------
# polynomial maps and chart combinators


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """Polynomial ``R^d -> R^p``: rows of ``exponents`` are monomials,
    rows of ``coefficients`` their vector coefficients."""

    exponents: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.exponents, dtype=int))
        C = np.asarray(self.coefficients, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        if E.shape[0] != C.shape[0] or np.any(E < 0):
            raise ValueError("exponents and coefficients must pair up, exponents >= 0")
        object.__setattr__(self, "exponents", E)
        object.__setattr__(self, "coefficients", C)

    @property
    def d(self) -> int:
        return self.exponents.shape[1]

    @property
    def p(self) -> int:
        return self.coefficients.shape[1]

    @staticmethod
    def _mono(X, E):
        return np.prod(X[:, None, :] ** E[None, :, :], axis=2)

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._mono(X, self.exponents) @ self.coefficients

    def jacobian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cols = []
        for i in range(self.d):
            E = self.exponents.copy()
            fac = E[:, i].astype(float)
            E[:, i] = np.maximum(E[:, i] - 1, 0)
            cols.append(self._mono(X, E) @ (fac[:, None] * self.coefficients))
        return np.stack(cols, axis=-1)

    def hessian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m, d = X.shape
        out = np.zeros((m, self.p, d, d))
        for i in range(d):
            for j in range(i, d):
                E = self.exponents.copy()
                fac = E[:, i].astype(float)
                E[:, i] = np.maximum(E[:, i] - 1, 0)
                fac = fac * E[:, j]
                E[:, j] = np.maximum(E[:, j] - 1, 0)
                out[:, :, i, j] = self._mono(X, E) @ (fac[:, None] * self.coefficients)
                out[:, :, j, i] = out[:, :, i, j]
        return out

    @classmethod
    def random(cls, rng: np.random.Generator, d: int, p: int, degree: int, scale: float = 1.0) -> "PolynomialMap":
        """All monomials of total degree <= ``degree`` with normal coefficients."""
        import itertools

        exps = [e for e in itertools.product(range(degree + 1), repeat=d) if sum(e) <= degree]
        return cls(np.array(exps), scale * rng.standard_normal((len(exps), p)))


def polynomial_chart(poly: PolynomialMap, **kwargs) -> Chart:
    return Chart(poly.d, poly.d + poly.p, graph_map=poly, jac=poly.jacobian, hess=poly.hessian, **kwargs)


def affine_image(chart: AnyChart, L: np.ndarray, c: np.ndarray | None = None) -> ParametricChart:
    """Chart of ``T(M)`` for the affine map ``T(q) = L q + c``."""
    L = np.asarray(L, dtype=float)
    c = np.zeros(chart.n) if c is None else np.asarray(c, dtype=float)
    return ParametricChart(
        chart.d, chart.n,
        param_map=lambda X: chart.embed_batch(X) @ L.T + c,
        jac=lambda X: np.einsum("ij,mjk->mik", L, chart.tangent_vectors(X)),
        second=lambda X: np.einsum("ij,mjkl->mikl", L, chart.second_vectors(X)),
        domain=chart.domain, label=chart.label,
    )


def product_chart(a: AnyChart, b: AnyChart) -> ParametricChart:
    """Chart of ``M x N`` in ``R^(n_a + n_b)``."""
    da, db = a.d, b.d

    def param(X):
        return np.concatenate([a.embed_batch(X[:, :da]), b.embed_batch(X[:, da:])], axis=1)

    def jac(X):
        m = X.shape[0]
        out = np.zeros((m, a.n + b.n, da + db))
        out[:, : a.n, :da] = a.tangent_vectors(X[:, :da])
        out[:, a.n:, da:] = b.tangent_vectors(X[:, da:])
        return out

    def second(X):
        m = X.shape[0]
        out = np.zeros((m, a.n + b.n, da + db, da + db))
        out[:, : a.n, :da, :da] = a.second_vectors(X[:, :da])
        out[:, a.n:, da:, da:] = b.second_vectors(X[:, da:])
        return out

    return ParametricChart(da + db, a.n + b.n, param_map=param, jac=jac, second=second,
                           domain=a.domain.product(b.domain),
                           label=f"{a.label}x{b.label}" if a.label or b.label else "")


def product_manifold(A, B) -> EmbeddedManifold:
    ca = list(A) if isinstance(A, EmbeddedManifold) else [A]
    cb = list(B) if isinstance(B, EmbeddedManifold) else [B]
    return EmbeddedManifold(tuple(product_chart(x, y) for x in ca for y in cb))
