import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from codlab.errors import BadGrid, FullRankFailure, InsufficientSamples, ResidualTestFailed
from codlab.estimate import (
    CertificateConfig,
    box_counting_dimension,
    count_in_region,
    coverage_fraction,
    default_scales,
    grid_occupancy,
    interior_certificate,
    measure_lower_bound,
    product_occupancy,
    region_coverage,
    target_grid,
)
from codlab.sampling import halton

UNIT = [[0.0, 0.0], [1.0, 1.0]]


# ---------------------------------------------------------------------------
# occupancy


def test_single_point_and_duplicates():
    occ = grid_occupancy(np.array([[0.25, 0.75]]), UNIT, 0.5)
    assert occ.counts == (2, 2) and occ.occupied.tolist() == [1]
    assert coverage_fraction(occ) == 0.25
    dup = grid_occupancy(np.tile([[0.25, 0.75]], (100, 1)), UNIT, 0.5)
    assert dup.occupied_count == 1


def test_empty_and_full():
    assert coverage_fraction(grid_occupancy(np.zeros((0, 2)), UNIT, 0.1)) == 0.0
    assert measure_lower_bound(grid_occupancy(np.zeros((0, 2)), UNIT, 0.1)) == 0.0
    centres = (np.stack(np.meshgrid(np.arange(10), np.arange(10), indexing="ij"), -1).reshape(-1, 2) + 0.5) / 10
    assert coverage_fraction(grid_occupancy(centres, UNIT, 0.1)) == 1.0


def test_half_open_cells_and_overflow():
    P = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 0.5], [-1e-12, 0.5], [0.999999, 0.999999]])
    occ = grid_occupancy(P, UNIT, 0.5)
    # lo is included, hi is excluded
    assert occ.overflow == 2
    assert occ.occupied.tolist() == [0, 3]


def test_half_space_fraction():
    P = halton(np.arange(1 << 16), 2)
    P = P[P[:, 0] < 0.5]
    occ = grid_occupancy(P, UNIT, 1 / 64)
    assert abs(coverage_fraction(occ) - 0.5) <= 1 / 64


def test_disk_fraction_and_measure():
    P = 2 * halton(np.arange(1 << 18), 2) - 1
    disk = P[np.sum(P ** 2, axis=1) < 1]
    occ = grid_occupancy(disk, [[-2, -2], [2, 2]], 1 / 64)
    assert coverage_fraction(occ) == pytest.approx(math.pi / 16, abs=0.02)
    assert measure_lower_bound(occ) == pytest.approx(math.pi, abs=0.1)
    sq = grid_occupancy(halton(np.arange(1 << 16), 2), UNIT, 1 / 64)
    assert measure_lower_bound(sq) == pytest.approx(1.0, abs=0.03)


@settings(max_examples=40)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 3), split=st.integers(0, 400))
def test_chunk_merge_is_union(seed, n, split):
    rng = np.random.default_rng(seed)
    P = rng.uniform(-0.2, 1.2, (400, n))
    box = [[0.0] * n, [1.0] * n]
    whole = grid_occupancy(P, box, 0.125)
    merged = grid_occupancy(P[:split], box, 0.125) | grid_occupancy(P[split:], box, 0.125)
    assert np.array_equal(whole.occupied, merged.occupied) and whole.overflow == merged.overflow
    assert np.array_equal(grid_occupancy(P, box, 0.125, chunk=17).occupied, whole.occupied)
    added = grid_occupancy(P[:split], box, 0.125).add(P[split:])
    assert np.array_equal(added.occupied, whole.occupied)
    # dense view agrees with the sparse indices
    assert np.array_equal(np.flatnonzero(whole.dense()), whole.occupied)


@settings(max_examples=40)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_coverage_is_monotone_in_points(seed):
    rng = np.random.default_rng(seed)
    P = rng.uniform(0, 1, (300, 2))
    prev = -1.0
    for k in (0, 50, 100, 300):
        f = coverage_fraction(grid_occupancy(P[:k], UNIT, 0.1))
        assert f >= prev
        prev = f


def test_product_occupancy_matches_materialised_product():
    rng = np.random.default_rng(2)
    A = rng.uniform(0, 1, (60, 1))
    B = rng.uniform(0, 1, (70, 2))
    oa = grid_occupancy(A, [[0.0], [1.0]], 0.125)
    ob = grid_occupancy(B, UNIT, 0.125)
    prod = np.hstack([np.repeat(A, len(B), 0), np.tile(B, (len(A), 1))])
    direct = grid_occupancy(prod, [[0.0] * 3, [1.0] * 3], 0.125)
    got = product_occupancy(oa, ob)
    assert got.counts == direct.counts and np.array_equal(got.occupied, direct.occupied)
    with pytest.raises(BadGrid):
        product_occupancy(oa, grid_occupancy(B, UNIT, 0.25))


def test_region_coverage_and_counts():
    P = halton(np.arange(1 << 14), 2)
    occ = grid_occupancy(P[P[:, 0] < 0.5], UNIT, 0.125)
    frac, ncells = region_coverage(occ, lambda C: C[:, 0] < 0.5)
    assert frac == 1.0 and ncells == 32
    frac, ncells = region_coverage(occ, lambda C: C[:, 0] > 0.5)
    assert frac == 0.0 and ncells == 32
    assert region_coverage(occ, lambda C: C[:, 0] > 2) == (0.0, 0)
    assert count_in_region(P, lambda X: X[:, 0] < 0.5, chunk=1000) == np.count_nonzero(P[:, 0] < 0.5)


def test_bad_grids():
    with pytest.raises(BadGrid):
        grid_occupancy(np.zeros((1, 2)), UNIT, 0.0)
    with pytest.raises(BadGrid):
        grid_occupancy(np.zeros((1, 2)), [[0.0, 0.0], [0.0, 1.0]], 0.1)
    with pytest.raises(BadGrid):
        grid_occupancy(np.zeros((1, 3)), UNIT, 0.1)
    with pytest.raises(BadGrid):
        grid_occupancy(np.zeros((1, 2)), UNIT, 1e-12)
    a = grid_occupancy(np.zeros((1, 2)), UNIT, 0.1)
    with pytest.raises(BadGrid):
        a | grid_occupancy(np.zeros((1, 2)), UNIT, 0.2)


def test_occupancy_dict_fields():
    d = grid_occupancy(np.array([[0.1, 0.1]]), UNIT, 0.5).to_dict()
    assert d == {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "cell": 0.5, "counts": [2, 2], "occupied_count": 1,
                 "total_cells": 4, "overflow": 0}


# ---------------------------------------------------------------------------
# box counting


def test_default_scales():
    s = default_scales([[0.0, 0.0], [2.0, 1.0]])
    assert np.allclose(s, 2.0 * 2.0 ** -np.arange(3, 10))


def test_box_counting_square_and_segment():
    sq = box_counting_dimension(lambda c: halton(np.arange(c), 2), UNIT)
    assert abs(sq.slope - 2) <= 0.05 and sq.r2 > 0.99
    seg = box_counting_dimension(lambda c: np.hstack([halton(np.arange(c), 1), np.full((c, 1), 0.3)]), UNIT)
    assert abs(seg.slope - 1) <= 0.05


def test_box_counting_fixed_array():
    P = halton(np.arange(1 << 18), 2)
    est = box_counting_dimension(P, UNIT)
    assert abs(est.slope - 2) <= 0.05 and est.samples == 1 << 18


def test_box_counting_errors():
    P = halton(np.arange(1000), 2)
    with pytest.raises(BadGrid):
        box_counting_dimension(P, UNIT, scales=[0.5, 0.25, 0.125])
    with pytest.raises(BadGrid):
        box_counting_dimension(P, UNIT, scales=[0.5, 0.25, 0.1, 0.05])
    with pytest.raises(InsufficientSamples):
        box_counting_dimension(P[:10], UNIT)


def test_dimension_json_fields():
    est = box_counting_dimension(lambda c: halton(np.arange(c), 2), UNIT)
    d = json.loads(est.to_json())
    assert set(d) == {"scales", "counts", "slope", "r2", "scale_window", "samples", "accepted"}
    assert len(d["scales"]) == len(d["counts"]) == len(d["accepted"])


# ---------------------------------------------------------------------------
# interior certificate


def test_target_grid():
    G = target_grid(2, 5)
    assert np.all(np.linalg.norm(G, axis=1) <= 1 + 1e-12)
    assert any(np.allclose(g, 0) for g in G) and len(G) == 13


def test_certificate_identity():
    cert = interior_certificate(lambda x: x, [0.0, 0.0])
    assert cert.lambda_ == pytest.approx(0.5, abs=1e-6)
    assert cert.epsilon == pytest.approx(0.9)
    assert cert.solved.all() and cert.inequality_ok.all() and cert.nonempty
    assert cert.radius == pytest.approx(0.45, abs=1e-6)


def test_certificate_rotation_scale():
    cert = interior_certificate(lambda x: np.array([x[0] + x[1], x[0] - x[1]]), [0.3, -0.2])
    # J^+ = J^T / 2 has operator norm 1/sqrt(2)
    assert cert.lambda_ == pytest.approx(math.sqrt(2) / 2, abs=1e-6)
    assert cert.jacobian_op_norm == pytest.approx(math.sqrt(2), abs=1e-6)
    assert cert.solved.all() and cert.inequality_ok.all()
    sol = cert.solutions
    y = np.stack([sol[:, 0] + sol[:, 1], sol[:, 0] - sol[:, 1]], 1)
    assert np.max(np.abs(y - cert.tested_targets)) <= 1e-9


def test_certificate_lifted_parabola_jacobian():
    # (x, a) -> (a, x^2 + 2x(a - x)); jacobian from an independent symbolic derivative
    x, a = sp.symbols("x a")
    F = sp.Matrix([a, x ** 2 + 2 * x * (a - x)])
    Jsym = np.array(F.jacobian([x, a]).subs({x: 0, a: 1}), dtype=float)
    assert np.array_equal(Jsym, [[0.0, 1.0], [2.0, 0.0]])
    h = lambda v: np.array([v[1], v[0] ** 2 + 2 * v[0] * (v[1] - v[0])])
    cert = interior_certificate(h, [0.0, 1.0])
    assert np.allclose(cert.jacobian, Jsym, atol=1e-6)
    sv = np.linalg.svd(Jsym, compute_uv=False)
    assert cert.lambda_ == pytest.approx(sv[-1] / 2, rel=1e-6)
    assert cert.success_count > 0 and cert.inequality_ok[cert.solved].all()


def test_certificate_submersion_m_greater_than_n():
    cert = interior_certificate(lambda v: np.array([v[0] + v[2] ** 2, v[1] - v[2]]), [0.0, 0.0, 0.0])
    assert cert.solved.all() and cert.inequality_ok.all()


def test_certificate_full_rank_failures():
    with pytest.raises(FullRankFailure):
        interior_certificate(lambda v: np.array([v[0] + v[1], v[0] + v[1]]), [0.0, 0.0])
    with pytest.raises(FullRankFailure):
        interior_certificate(lambda v: np.array([v[0], v[0], v[0]]), [0.0])
    with pytest.raises(FullRankFailure):
        # x^3 has zero derivative at the origin
        interior_certificate(lambda v: v ** 3, [0.0])


def test_certificate_residual_failure():
    # residual of size 10 |x| at every radius, far above lambda |x|
    h = lambda v: v + 10 * np.abs(v) * np.cos(2 * np.pi * np.log2(np.abs(v) + 1e-300))
    with pytest.raises(ResidualTestFailed):
        interior_certificate(h, [0.0], CertificateConfig(min_eps=1e-3))


def test_certificate_json_keys():
    d = json.loads(interior_certificate(lambda x: 2 * x, [1.0]).to_json())
    assert d["lambda"] == pytest.approx(1.0, abs=1e-6)
    assert {"x0", "y0", "jacobian", "epsilon", "tested_targets", "success_count", "residual_max",
            "solutions", "solved", "inequality_ok"} <= set(d)
