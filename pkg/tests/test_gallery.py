import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codlab import gallery
from codlab.codiagonal import SweepSpec, sweep_bundle, sweep_tangent
from codlab.errors import DegenerateRuling, IntegrationUnstable, NoSuchField, NotStrictlyConvex, SingularTransform
from codlab.manifold import Box, ParametricChart


# ---------------------------------------------------------------------------
# glued circles


def test_glued_arc_data():
    # centres, radii and parameter ranges of the four arcs
    assert gallery.GLUED_ARCS == (
        (0j, 6.0, math.pi / 2, 3 * math.pi / 2),
        (-3j, 3.0, -math.pi / 2, math.pi / 2),
        (2j, 2.0, math.pi / 2, 3 * math.pi / 2),
        (5j, 1.0, -math.pi / 2, math.pi / 2),
    )


def test_glued_joints_close_up():
    joints = gallery.glued_joints()
    assert len(joints) == 4
    for j in joints:
        assert j["position_gap"] <= 1e-9 and j["tangent_gap"] <= 1e-9


def test_glued_arcs_on_their_circles():
    for ch, (c, r, t0, t1) in zip(gallery.glued_circles().charts, gallery.GLUED_ARCS):
        t = np.linspace(t0, t1, 50)[1:-1, None]
        P = ch.embed_batch(t)
        assert np.allclose(np.abs(P[:, 0] + 1j * P[:, 1] - c), r)


def test_first_arc_tangent_lines_avoid_its_disk():
    # tangent lines of a circle never enter the open disk it bounds
    arc = gallery.glued_circles().charts[0]
    P = sweep_tangent(arc, SweepSpec(count=1 << 14)).points
    assert np.min(np.linalg.norm(P, axis=1)) >= 6 - 1e-9


# ---------------------------------------------------------------------------
# tangent developable


def test_developable_rulings_lie_in_tangent_planes():
    surf = gallery.tangent_developable(gallery.twisted_quartic(), u_range=(-1.0, 1.0))
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(-0.9, 0.9, 50), rng.uniform(0.1, 4.0, 50)])
    g = gallery.twisted_quartic()
    P = surf.embed_batch(X)
    base = g.embed_batch(X[:, :1])
    d1 = g.tangent_vectors(X[:, :1])[:, :, 0]
    assert np.max(np.abs(P - base - X[:, 1:2] * d1)) <= 1e-12
    # the ruling direction is the second tangent vector of the surface
    T = surf.tangent_vectors(X)
    assert np.max(np.abs(T[:, :, 1] - d1)) <= 1e-9
    assert surf.domain.lo[1] == pytest.approx(0.05)


def test_developable_degenerate_and_bad_args():
    # graph charts never have zero speed; the cusp t -> (t^2, t^3) does at t = 0
    cusp = ParametricChart(1, 2, param_map=lambda X: np.column_stack([X[:, 0] ** 2, X[:, 0] ** 3]),
                           jac=lambda X: np.stack([2 * X[:, 0], 3 * X[:, 0] ** 2], 1)[:, :, None],
                           derivative_mode="analytic", domain=Box([-1.0], [1.0]))
    # the speed check samples 64 cell centres; with this range the first centre is t = 0
    with pytest.raises(DegenerateRuling):
        gallery.tangent_developable(cusp, u_range=(-1.0 / 127, 1.0))
    with pytest.raises(ValueError):
        gallery.tangent_developable(gallery.twisted_quartic(), one_sided=True, v_min=0.0)
    with pytest.raises(ValueError):
        gallery.tangent_developable(gallery.paraboloid())


# ---------------------------------------------------------------------------
# Hilbert curve and Peano-type tangent curve


def test_hilbert_points_visit_every_cell_once_with_unit_steps():
    for order in (1, 2, 3, 5):
        H = gallery.hilbert_points(order)
        assert len({tuple(p) for p in H}) == 4 ** order
        assert np.all(np.abs(np.diff(H, axis=0)).sum(axis=1) == 1)


@settings(max_examples=50)
@given(t=st.floats(0, 1), order=st.integers(1, 5))
def test_hilbert_orders_are_nested(t, order):
    # consecutive approximations stay within a cell diagonal of each other
    a = gallery.hilbert_curve(order)(np.array([t]))[0]
    b = gallery.hilbert_curve(order + 1)(np.array([t]))[0]
    assert np.linalg.norm(a - b) <= 2.0 ** -order * math.sqrt(2) + 1e-12


def test_exact_tangent_solution_solves_ode():
    phi = gallery.hilbert_curve(2)
    knots = gallery.hilbert_knots(2)
    t = np.linspace(0, 1, 2001)
    a = gallery.exact_tangent_solution(phi, knots, t)
    assert np.allclose(a[0], 0)
    # the derivative of the closed form, checked away from the knots by central differences
    h = 1e-6
    tm = t[1:-1][np.min(np.abs(t[1:-1, None] - knots[None, :]), axis=1) > 10 * h]
    da = (gallery.exact_tangent_solution(phi, knots, tm + h) - gallery.exact_tangent_solution(phi, knots, tm - h)) / (2 * h)
    assert np.max(np.abs(da + gallery.exact_tangent_solution(phi, knots, tm) - phi(tm))) <= 1e-6


def test_peano_curve_matches_exact_solution():
    pc = gallery.peano_tangent_curve(2, step=1e-3)
    assert pc.solution_error() <= 1e-10
    assert pc.ode_residual() <= 1e-6
    # the tangent point at s = 1 is phi(t)
    X = pc.t[1:-1:50, None]
    tip = pc.chart.embed_batch(X) + pc.chart.tangent_vectors(X)[:, :, 0]
    assert np.max(np.abs(tip - pc.phi(X[:, 0]))) <= 1e-10


def test_peano_instability():
    with pytest.raises(IntegrationUnstable):
        gallery.peano_tangent_curve(1, step=3.0)
    with pytest.raises(IntegrationUnstable):
        gallery.peano_tangent_curve(1, step=0.0)
    with pytest.raises(ValueError):
        gallery.peano_tangent_curve(0)


# ---------------------------------------------------------------------------
# Cantor sets and hyperplanes


def test_cantor_ratio():
    for s in (0.25, 0.5, 0.75, 1.0):
        assert 2 * gallery.cantor_ratio(s) ** s == pytest.approx(1.0)
    assert gallery.cantor_ratio(0.0) == 0.0
    assert gallery.cantor_ratio(math.log(2) / math.log(3)) == pytest.approx(1 / 3)


def test_cantor_points_middle_thirds():
    r = 1 / 3
    s = math.log(2) / math.log(3)
    pts = np.sort(gallery.cantor_points(s, 3))
    # left endpoints of the level-3 middle-thirds intervals, in units of 1/27
    assert np.allclose(pts * 27, [0, 2, 6, 8, 18, 20, 24, 26])
    assert gallery.cantor_points(0.0, 5).tolist() == [0.0, 1.0]
    assert np.all(np.diff(np.sort(gallery.cantor_points(0.5, 6))) >= (1 - 2 * 0.25) * 0.25 ** 5 - 1e-15)
    assert r == pytest.approx(gallery.cantor_ratio(s))


def test_cantor_hyperplane_family_points_on_planes():
    c = gallery.cantor_hyperplane_family(1.5, n=1, depth=6)
    fam = c.builds
    P = fam.points(1000)
    ab = fam.parameters[np.arange(1000) % fam.parameters.shape[0]]
    assert np.allclose(P[:, 1], ab[:, 0] * P[:, 0] + ab[:, 1])
    assert np.all((P[:, 0] >= 1) & (P[:, 0] <= 2))
    assert c.claim.kind == "dimension" and c.claim.params["value"] == 1.5
    assert np.any(fam.parameters[:, 0] == 0)
    with pytest.raises(ValueError):
        gallery.cantor_hyperplane_family(2.5, n=1)


# ---------------------------------------------------------------------------
# spheres and ellipsoids


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_charts_cover_sphere(n):
    charts = gallery.sphere_charts(n, radius=2.0)
    assert len(charts) == (1 if n == 1 else 2 * (n + 1))
    rng = np.random.default_rng(n)
    for ch in charts:
        X = rng.uniform(ch.domain.lo, ch.domain.hi, (20, n)) * 0.99
        P = ch.embed_batch(X)
        assert np.allclose(np.linalg.norm(P, axis=1), 2.0)
        # tangent vectors are orthogonal to the position
        T = ch.tangent_vectors(X)
        assert np.max(np.abs(np.einsum("mi,mik->mk", P, T))) <= 1e-12


def test_sphere_tangent_field_needs_odd_dimension():
    with pytest.raises(NoSuchField):
        gallery.sphere_line_bundles(2, "tangent_field")
    with pytest.raises(ValueError):
        gallery.sphere_direction("spiral", 1)
    c = gallery.sphere_line_bundles(3, "tangent_field")
    B = c.builds[0]
    X = np.zeros((4, 3))
    A = B.frame(X)[:, :, 0]
    assert np.allclose(np.sum(A * B.base.embed_batch(X), axis=1), 0)


def test_tilted_even_sphere_field():
    d = gallery.sphere_direction("tilted", 2, 0.3)
    U = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    V = d(U)
    # the radial component is sin(angle) times the tangential one's scale
    assert np.allclose(np.sum(V * U, axis=1), math.sin(0.3))


def test_ellipsoid_pushforward():
    c = gallery.sphere_line_bundles(1, "tangent_field")
    L = np.diag([2.0, 0.5])
    e = gallery.ellipsoid_pushforward((L, np.array([1.0, 0.0])), c)
    assert e.claim.params["region"]["shape"] == "ellipsoid"
    P = sweep_bundle(e.builds[0], SweepSpec(count=5000)).points
    inside = gallery.region_mask(e.claim.params["region"], P)
    assert not inside.any()
    with pytest.raises(SingularTransform):
        gallery.ellipsoid_pushforward(np.array([[1.0, 2.0], [2.0, 4.0]]), c)


# ---------------------------------------------------------------------------
# convex curves, regions, claims, products


def test_convex_curve_rejects_nonconvex():
    with pytest.raises(NotStrictlyConvex):
        gallery.convex_curve_bundle(lambda x: x)
    with pytest.raises(NotStrictlyConvex):
        gallery.convex_curve_bundle(lambda x: -x ** 2)
    c = gallery.convex_curve_bundle(lambda x: x ** 2, "vertical")
    assert c.claim.kind == "covers-region"


def test_region_masks():
    Q = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 2.0]])
    assert gallery.region_mask({"shape": "ball", "radius": 1.0}, Q).tolist() == [True, False, False]
    assert gallery.region_mask({"shape": "shell", "r_in": 0.5, "r_out": 1.0}, Q).tolist() == [False, True, False]
    assert gallery.region_mask({"shape": "box", "lo": [0, 0], "hi": [1, 1]}, Q).tolist() == [True, True, False]
    cone = {"shape": "cone", "axis": [1, 1], "half_angle": 0.1, "r_min": 1, "r_max": 3}
    assert gallery.region_mask(cone, Q).tolist() == [False, False, True]
    tube = {"shape": "graph-tube", "x_range": [-1, 1], "coefficients": [1, 0, 0], "radius": 0.01}
    assert gallery.region_mask(tube, np.array([[0.5, 0.25], [0.5, 0.5]])).tolist() == [True, False]
    union = {"shape": "union", "parts": [{"shape": "ball", "radius": 0.5},
                                         {"shape": "ball", "center": [2, 2], "radius": 0.5}]}
    assert gallery.region_mask(union, Q).tolist() == [True, False, True]
    with pytest.raises(ValueError):
        gallery.region_mask({"shape": "star"}, Q)


def test_claims():
    with pytest.raises(ValueError):
        gallery.Claim("nonsense", {})
    P = np.random.default_rng(0).uniform(0, 1, (20000, 2))
    ok = gallery.evaluate_claim(gallery.Claim("fills-box", {"box": [[0, 0], [1, 1]], "cell": 0.1,
                                                            "threshold": 0.99}), P)
    assert ok.passed and ok.value == 1.0
    ex = gallery.evaluate_claim(gallery.Claim("excludes-region", {"region": {"shape": "ball", "center": [0.5, 0.5],
                                                                             "radius": 0.1}}), P)
    assert not ex.passed and ex.value > 0
    cov = gallery.evaluate_claim(gallery.Claim("covers-region", {"box": [[0, 0], [1, 1]], "cell": 0.1,
                                                                 "region": {"shape": "box", "lo": [5, 5], "hi": [6, 6]},
                                                                 "threshold": 0.5}), P)
    assert not cov.passed and cov.detail["region_cells"] == 0
    assert set(ok.to_dict()) == {"kind", "passed", "value", "threshold", "detail"}


def test_product_sweep_and_claim():
    A = np.arange(3.0)[:, None]
    B = np.arange(4.0)[:, None] * 10
    full = gallery.product_sweep(A, B)
    assert len(full) == 12 and {tuple(p) for p in full.points} == {(a, b) for a in range(3) for b in range(0, 40, 10)}
    sub = gallery.product_sweep(A, B, count=5)
    assert len(sub) == 5 and all(p[0] in (0, 1, 2) and p[1] in (0, 10, 20, 30) for p in sub.points)
    a = gallery.Claim("fills-box", {"box": [[0], [1]], "cell": 0.1, "threshold": 1})
    c = gallery.product_claim(a, a, 0.9)
    assert c.params["box"] == [[0, 0], [1, 1]]
    with pytest.raises(ValueError):
        gallery.product_claim(a, gallery.Claim("fills-box", {"box": [[0], [1]], "cell": 0.2, "threshold": 1}), 0.9)


def test_disk_families_construct():
    h = gallery.swirl_halfline_family(2)
    assert h.builds.kind == "halfline" and h.claim.kind == "covers-region"
    p = gallery.projective_paraboloid_family(1)
    P = gallery.sweep_disk_family(p.builds, SweepSpec(count=500)).points
    assert P.shape == (500, 2)
