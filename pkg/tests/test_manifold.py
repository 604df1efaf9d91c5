import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from codlab import gallery
from codlab.errors import DerivativeUnavailable, DomainViolation, NotAGraphChart, NotAHypersurface
from codlab.manifold import (
    Box,
    Chart,
    EmbeddedManifold,
    PolynomialMap,
    affine_image,
    embed,
    fd_jacobian,
    fd_second,
    full_frame,
    hessian,
    is_inflection,
    jacobian,
    nonlinearity_probe,
    normal_frame,
    numeric_rank,
    orthonormalize,
    osculating_report,
    polynomial_chart,
    product_chart,
    product_manifold,
    tangent_frame,
)


def random_rotation(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def sympy_oracle(poly: PolynomialMap):
    """Symbolic f, Jacobian and Hessian of a PolynomialMap, lambdified."""
    xs = sp.symbols(f"x0:{poly.d}")
    exprs = []
    for k in range(poly.p):
        e = 0
        for row, c in zip(poly.exponents, poly.coefficients[:, k]):
            e += sp.Float(float(c), 30) * sp.Mul(*[x ** int(a) for x, a in zip(xs, row)])
        exprs.append(sp.expand(e))
    F = sp.Matrix(exprs)
    J = F.jacobian(xs)
    H = [sp.hessian(e, xs) for e in exprs]
    return (sp.lambdify(xs, F, "numpy"), sp.lambdify(xs, J, "numpy"), [sp.lambdify(xs, h, "numpy") for h in H])


# ---------------------------------------------------------------------------
# frames


def test_flat_chart_frames():
    ch = gallery.flat_chart(1, 2)
    assert np.allclose(tangent_frame(ch, [0.3]), [[1.0], [0.0]])
    assert np.allclose(np.abs(normal_frame(ch, [0.3])), [[0.0], [1.0]])


def test_parabola_frames_at_critical_point():
    ch = gallery.parabola()
    assert np.allclose(tangent_frame(ch, [0.0]), [[1.0], [0.0]])
    assert np.allclose(np.abs(normal_frame(ch, [0.0])), [[0.0], [1.0]])


def test_diagonal_line_frames():
    ch = polynomial_chart(PolynomialMap([[1]], [1.0]))
    T = tangent_frame(ch, [0.0])[:, 0]
    N = normal_frame(ch, [0.0])[:, 0]
    s = 1 / math.sqrt(2)
    assert np.allclose(np.abs(T), [s, s]) and T[0] * T[1] > 0
    assert np.allclose(np.abs(N), [s, s]) and N[0] * N[1] < 0


@settings(max_examples=40)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_frame_orthogonality_and_span(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    p = int(rng.integers(1, 3))
    poly = PolynomialMap.random(rng, d, p, 3)
    ch = polynomial_chart(poly, rotation=random_rotation(rng, d + p))
    X = rng.uniform(-2, 2, (20, d))
    F = full_frame(ch, X)
    err = np.max(np.abs(np.einsum("mji,mjk->mik", F, F) - np.eye(d + p)))
    assert err <= 1e-9
    # the raw tangent columns Q [Id; J] lie in the span of T and are orthogonal to N
    Q = ch.rotation
    raw = np.einsum("ij,mjk->mik", Q, np.concatenate([np.broadcast_to(np.eye(d), (20, d, d)), poly.jacobian(X)], axis=1))
    N = normal_frame(ch, X)
    assert np.max(np.abs(np.einsum("mji,mjk->mik", N, raw))) <= 1e-9 * (1 + np.abs(raw).max())


def test_orthonormalize_is_deterministic_and_sign_fixed():
    B = np.array([[2.0, 1.0], [0.0, 1.0], [0.0, 3.0]])
    Q1, Q2 = orthonormalize(B), orthonormalize(B.copy())
    assert np.array_equal(Q1, Q2)
    assert Q1[0, 0] > 0
    assert np.allclose(Q1.T @ Q1, np.eye(2))


def test_numeric_rank_relative_threshold():
    assert numeric_rank(np.diag([1.0, 1e-9])) == 1
    assert numeric_rank(np.diag([1e-20, 1e-20])) == 2


# ---------------------------------------------------------------------------
# osculating spaces and inflection


def test_twisted_quartic_values_and_rank():
    tq = gallery.twisted_quartic()
    assert np.allclose(embed(tq, [0.0]), 0.0)
    assert np.allclose(embed(tq, [1.0]), [1, 1, 1, 1])
    assert osculating_report(tq, [0.0]).osculating_rank == 2
    assert osculating_report(tq, [0.37]).osculating_rank == 2


def test_affine_chart_osculating_rank_is_d():
    ch = polynomial_chart(PolynomialMap([[0, 0], [1, 0], [0, 1]], [[1.0], [2.0], [-1.0]]))
    assert osculating_report(ch, [0.1, 0.2]).osculating_rank == 2


def test_paraboloid_osculating_rank_3():
    rep = osculating_report(gallery.paraboloid(), [0.0, 0.0])
    assert rep.osculating_rank == 3 and rep.tangent_rank == 2
    assert rep.hessian_min_singular_value == pytest.approx(2.0)


def test_inflection_examples():
    assert not is_inflection(gallery.paraboloid(), [0.0, 0.0])
    assert is_inflection(polynomial_chart(PolynomialMap([[2, 0]], [1.0])), [0.0, 0.0])
    assert not is_inflection(gallery.saddle(), [0.0, 0.0])
    with pytest.raises(NotAHypersurface):
        is_inflection(gallery.twisted_quartic(), [0.0])


def test_inflection_uses_second_fundamental_form_off_critical_points():
    # z = x^2 at x = 1: the graph is still curved in x and flat in y
    ch = polynomial_chart(PolynomialMap([[2, 0]], [1.0]))
    assert is_inflection(ch, [1.0, 0.5])
    # paraboloid away from the vertex: second fundamental form stays definite
    assert not is_inflection(gallery.paraboloid(), [1.0, -0.7])


@settings(max_examples=25)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_osculating_rank_placement_invariant(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    p = int(rng.integers(1, 3))
    ch = polynomial_chart(PolynomialMap.random(rng, d, p, 2))
    x = rng.uniform(-1, 1, d)
    r0 = osculating_report(ch, x).osculating_rank
    for _ in range(2):
        placed = ch.placed(random_rotation(rng, d + p), rng.standard_normal(d + p))
        assert osculating_report(placed, x).osculating_rank == r0


# ---------------------------------------------------------------------------
# nonlinearity probe


def test_nonlinearity_probe_examples():
    assert nonlinearity_probe(gallery.parabola(), ([-1.0], [1.0]), samples=257) == pytest.approx(1.0)
    assert nonlinearity_probe(gallery.saddle(), ([-1.0, 0.0], [1.0, 0.0])) == 0.0
    with pytest.raises(ValueError):
        nonlinearity_probe(gallery.parabola(), ([-1.0], [1.0]), samples=2)


@settings(max_examples=40)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_nonlinearity_probe_zero_for_affine(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    ch = polynomial_chart(PolynomialMap.random(rng, d, 2, 1))
    a, b = rng.uniform(-2, 2, (2, d))
    assert nonlinearity_probe(ch, (a, b), samples=33) <= 1e-12


# ---------------------------------------------------------------------------
# derivatives against a symbolic oracle


@settings(max_examples=20)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_polynomial_derivatives_match_symbolic(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    p = int(rng.integers(1, 3))
    poly = PolynomialMap.random(rng, d, p, 3)
    F, J, H = sympy_oracle(poly)
    X = rng.uniform(-1, 1, (8, d))
    for x, f, jac, hes in zip(X, poly(X), poly.jacobian(X), poly.hessian(X)):
        assert np.allclose(f, np.asarray(F(*x), float).ravel(), rtol=0, atol=1e-12)
        assert np.allclose(jac, np.asarray(J(*x), float), rtol=0, atol=1e-12)
        assert np.allclose(hes, np.stack([np.asarray(h(*x), float) for h in H]), rtol=0, atol=1e-11)


def test_fd_matches_analytic_on_cubics():
    rng = np.random.default_rng(11)
    for _ in range(5):
        d = int(rng.integers(1, 4))
        poly = PolynomialMap.random(rng, d, 2, 3)
        g = np.linspace(-1, 1, 10)
        X = np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1).reshape(-1, d)[:100]
        # third derivatives of a cubic are its cubic coefficients times at most 6
        third = 6 * np.abs(poly.coefficients).sum()
        hj = np.finfo(float).eps ** (1 / 3) * 2
        h2 = np.finfo(float).eps ** 0.25 * 2
        assert np.max(np.abs(fd_jacobian(poly, X) - poly.jacobian(X))) <= 10 * hj ** 2 * third + 1e-9
        assert np.max(np.abs(fd_second(poly, X) - poly.hessian(X))) <= 10 * h2 ** 2 * third + 1e-6


def test_fd_mode_chart_agrees_with_analytic():
    poly = PolynomialMap([[3, 0], [1, 2]], [1.0, -2.0])
    a = polynomial_chart(poly)
    f = polynomial_chart(poly, derivative_mode="fd")
    x = np.array([0.4, -0.3])
    assert np.allclose(jacobian(a, x), jacobian(f, x), atol=1e-8)
    assert np.allclose(hessian(a, x), hessian(f, x), atol=1e-5)


# ---------------------------------------------------------------------------
# domain, errors, combinators


def test_domain_is_open():
    ch = gallery.parabola()
    with pytest.raises(DomainViolation):
        embed(ch, [math.pi])
    with pytest.raises(DomainViolation):
        embed(ch, [10.0])


def test_fd_stencil_must_stay_inside_domain():
    ch = gallery.parabola(domain=Box([-1.0], [1.0]), derivative_mode="fd")
    with pytest.raises(DomainViolation):
        jacobian(ch, [1.0 - 1e-9])


def test_missing_derivatives_raise():
    ch = Chart(1, 2, graph_map=lambda X: X ** 2)
    with pytest.raises(DerivativeUnavailable):
        jacobian(ch, [0.1])
    with pytest.raises(NotAGraphChart):
        jacobian(gallery.unit_circle(), [0.1])


def test_bad_chart_arguments():
    with pytest.raises(ValueError):
        Chart(3, 2, graph_map=lambda X: X)
    with pytest.raises(ValueError):
        gallery.parabola(rotation=np.ones((2, 2)))
    with pytest.raises(ValueError):
        Box([0.0], [0.0])


def test_placement_is_rigid():
    rng = np.random.default_rng(3)
    Q = random_rotation(rng, 3)
    c = np.array([1.0, -2.0, 0.5])
    base = gallery.paraboloid()
    placed = base.placed(Q, c)
    X = rng.uniform(-1, 1, (10, 2))
    assert np.allclose(embed(placed, X), embed(base, X) @ Q.T + c)
    assert np.allclose(placed.tangent_vectors(X), np.einsum("ij,mjk->mik", Q, base.tangent_vectors(X)))


def test_product_chart_blocks():
    a, b = gallery.unit_circle(), gallery.parabola()
    pc = product_chart(a, b)
    X = np.array([[0.3, 0.7]])
    assert np.allclose(pc.embed_batch(X), [[math.cos(0.3), math.sin(0.3), 0.7, 0.49]])
    J = pc.tangent_vectors(X)[0]
    assert np.allclose(J[2:, 0], 0) and np.allclose(J[:2, 1], 0) and np.allclose(J[2:, 1], [1, 1.4])
    M = product_manifold(gallery.glued_circles(), a)
    assert isinstance(M, EmbeddedManifold) and len(M) == 4 and M.n == 4


def test_affine_image_of_circle_is_ellipse():
    L = np.diag([2.0, 1.0])
    e = affine_image(gallery.unit_circle(), L, np.array([1.0, 0.0]))
    t = np.array([[0.0], [math.pi / 2]])
    assert np.allclose(e.embed_batch(t), [[3.0, 0.0], [1.0, 1.0]])
    assert np.allclose(e.tangent_vectors(t)[:, :, 0], [[0.0, 1.0], [-2.0, 0.0]])


def test_embedded_manifold_rejects_mixed_dimensions():
    with pytest.raises(ValueError):
        EmbeddedManifold((gallery.parabola(), gallery.paraboloid()))
