"""Registry of runnable experiments.

An experiment takes a :class:`RunContext` (resolved parameters, sweep and
estimator overrides, seed, thread count) and returns an :class:`Outcome`:
named estimates, pass/fail checks and the point clouds it sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gallery
from .bundle import bump_section, deform, line_bundle, osculation_defect
from .codiagonal import (
    PointCloud,
    SweepSpec,
    bundle_lines,
    lifted_section_map,
    line_distance,
    sweep_bundle,
    sweep_normal,
    sweep_tangent,
)
from .errors import UnknownExperiment
from .estimate import (
    CertificateConfig,
    coverage_fraction,
    grid_occupancy,
    interior_certificate,
    product_occupancy,
)
from .gallery import Claim, evaluate_claim
from .manifold import Box, product_manifold


@dataclass
class RunContext:
    params: dict
    sweep: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1

    def spec(self, **defaults) -> SweepSpec:
        """Experiment defaults overlaid by the user's sweep overrides."""
        d = dict(defaults)
        d.update(self.sweep)
        d["seed"] = self.seed + int(defaults.get("seed", 0))
        return SweepSpec(**d)

    def claim(self, claim: Claim) -> Claim:
        """Apply estimator overrides to the keys a claim already has."""
        upd = {k: v for k, v in self.estimator.items() if k in claim.params}
        if not upd:
            return claim
        return Claim(claim.kind, {**claim.params, **upd}, claim.statement)


@dataclass
class Outcome:
    estimates: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    clouds: dict = field(default_factory=dict)

    def add(self, name: str, result: gallery.ClaimResult) -> None:
        self.checks.append({"name": name, **result.to_dict()})

    def add_value(self, name: str, kind: str, passed: bool, value, threshold, detail=None) -> None:
        self.checks.append({"name": name, "kind": kind, "passed": bool(passed), "value": value,
                            "threshold": threshold, "detail": detail or {}})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


@dataclass(frozen=True)
class Experiment:
    id: str
    summary: str
    claim: str
    defaults: dict
    choices: dict
    runner: Callable[[RunContext], Outcome]

    def param_schema(self) -> dict:
        props = {}
        for k, v in self.defaults.items():
            props[k] = {**_json_type(v), "default": v}
            if k in self.choices:
                props[k]["enum"] = list(self.choices[k])
        return {"type": "object", "properties": props, "additionalProperties": False}

    def describe(self) -> dict:
        return {"id": self.id, "summary": self.summary, "claim": self.claim, "params": self.param_schema()}


def _json_type(v) -> dict:
    if isinstance(v, bool):
        return {"type": "boolean"}
    if isinstance(v, int):
        return {"type": "integer"}
    if isinstance(v, float):
        return {"type": "number"}
    if isinstance(v, str):
        return {"type": "string"}
    if isinstance(v, list):
        return {"type": "array", "items": _json_type(v[0]) if v else {}}
    return {}


REGISTRY: dict[str, Experiment] = {}


def experiment(id: str, summary: str, claim: str, choices: dict | None = None, **defaults):
    def wrap(fn):
        REGISTRY[id] = Experiment(id, summary, claim, defaults, choices or {}, fn)
        return fn
    return wrap


def get(id: str) -> Experiment:
    try:
        return REGISTRY[id]
    except KeyError:
        raise UnknownExperiment(f"unknown experiment {id!r}; try 'list'") from None


def run_experiment(id: str, params: dict | None = None, sweep: dict | None = None,
                   estimator: dict | None = None, seed: int = 0, threads: int = 1) -> Outcome:
    exp = get(id)
    p = dict(exp.defaults)
    p.update(params or {})
    return exp.runner(RunContext(p, dict(sweep or {}), dict(estimator or {}), int(seed), int(threads)))


# ---------------------------------------------------------------------------
# curves in the plane


@experiment("glued-circles",
            "tangent lines of the glued four-arc curve fill the plane",
            "The union of tangent lines of a closed C^1 curve made of arcs of radii 6, 3, 2, 1 is the "
            "whole plane, while the tangent lines of the radius-6 arc alone miss a disk and a slab.",
            count=1_000_000, fiber=40.0, arc1_count=1 << 18)
def _glued(ctx: RunContext) -> Outcome:
    p = ctx.params
    C = gallery.glued_circles_construction()
    out = Outcome()
    spec = ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],)))
    cloud = sweep_tangent(C.builds, spec, ctx.threads)
    out.add("fills-box", evaluate_claim(ctx.claim(C.claim), cloud))
    arc1 = sweep_tangent(C.builds.charts[0], spec.replace(count=p["arc1_count"]), ctx.threads)
    r = 1 - 1e-9
    out.add("arc1-excludes-unit-disk", evaluate_claim(
        Claim("excludes-region", {"region": {"shape": "ball", "center": [0.0, 0.0], "radius": r}}), arc1))
    six = 6 * r
    out.add("arc1-excludes-disk-and-slab", evaluate_claim(
        Claim("excludes-region", {"region": {"shape": "union", "parts": [
            {"shape": "ball", "center": [0.0, 0.0], "radius": six},
            {"shape": "box", "lo": [0.0, -six], "hi": [1e6, six]}]}}), arc1))
    joints = gallery.glued_joints()
    gap = max(max(j["position_gap"], j["tangent_gap"]) for j in joints)
    out.add_value("joints-c1", "joint-gap", gap <= 1e-9, gap, 1e-9, {"joints": joints})
    out.clouds = {"tangent": cloud, "arc1": arc1}
    return out


@experiment("convex-curve",
            "a line field over a strictly convex graph has interior",
            "Lines attached to the graph of a strictly convex function with a continuous angle field "
            "sweep a set with nonempty interior.",
            choices={"f": ("parabola", "quartic", "cosh"), "phi": ("tangent", "vertical")},
            f="parabola", phi="tangent", count=1 << 18, fiber=6.0)
def _convex(ctx: RunContext) -> Outcome:
    p = ctx.params
    funcs = {
        "parabola": (lambda x: x ** 2, lambda x: 2 * x),
        "quartic": (lambda x: x ** 4 + x ** 2, lambda x: 4 * x ** 3 + 2 * x),
        "cosh": (np.cosh, np.sinh),
    }
    f, df = funcs[p["f"]]
    C = gallery.convex_curve_bundle(f, p["phi"], df=df)
    cloud = sweep_bundle(C.builds, ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],))),
                         ctx.threads)
    out = Outcome(clouds={"lines": cloud})
    out.add(C.claim.kind, evaluate_claim(ctx.claim(C.claim), cloud))
    return out


@experiment("normal-circle",
            "normal lines of the unit circle cover the plane",
            "Every point lies on a normal line of the circle, so the normal sweep covers any box.",
            count=1 << 18, fiber=5.0, threshold=0.999)
def _normal_circle(ctx: RunContext) -> Outcome:
    p = ctx.params
    cloud = sweep_normal(gallery.unit_circle(), ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],))),
                         ctx.threads)
    claim = Claim("fills-box", {"box": [[-3.0, -3.0], [3.0, 3.0]], "cell": 0.05, "threshold": p["threshold"]})
    out = Outcome(clouds={"normal": cloud})
    out.add("fills-box", evaluate_claim(ctx.claim(claim), cloud))
    return out


@experiment("normal-parabola",
            "normal lines of an open parabola arc cover a tube around it",
            "A submanifold lies inside the interior of the union of its normal planes; for the "
            "parabola arc every point of a thin tube around a compact sub-arc is reached.",
            count=1 << 19, b_lo=-0.2, b_hi=1.2, tube_half=0.9, radius=0.1, cell=0.01, threshold=0.99)
def _normal_parabola(ctx: RunContext) -> Outcome:
    p = ctx.params
    chart = gallery.parabola(domain=Box([-1.0], [1.0]))
    cloud = sweep_normal(chart, ctx.spec(count=p["count"], fiber_box=((p["b_lo"],), (p["b_hi"],))), ctx.threads)
    h = p["tube_half"]
    region = {"shape": "graph-tube", "coefficients": [1.0, 0.0, 0.0], "x_range": [-h, h], "radius": p["radius"]}
    claim = Claim("covers-region", {"box": [[-h - 0.3, -0.2], [h + 0.3, h * h + 0.3]], "cell": p["cell"],
                                    "region": region, "threshold": p["threshold"]})
    out = Outcome(clouds={"normal": cloud})
    out.add("covers-tube", evaluate_claim(ctx.claim(claim), cloud))
    return out


@experiment("peano-curve",
            "tangent lines of the ODE curve alpha + alpha' = phi approach the unit square",
            "For a plane-filling phi the curve solving alpha + alpha' = phi, alpha(0) = 0 has the "
            "square inside its tangent sweep; with Hilbert approximations coverage grows with the order.",
            orders=[2, 3, 4, 5], step=1e-4, count=1 << 18, s_lo=0.8, s_hi=1.2, threshold=0.9,
            residual_tol=1e-10)
def _peano(ctx: RunContext) -> Outcome:
    p = ctx.params
    out = Outcome()
    covs, res = [], []
    for k in p["orders"]:
        C = gallery.peano_construction(int(k), p["step"], p["threshold"])
        spec = ctx.spec(count=p["count"], fiber_box=((p["s_lo"],), (p["s_hi"],)), frame="raw")
        cloud = sweep_tangent(C.builds.chart, spec, ctx.threads)
        claim = ctx.claim(C.claim)
        occ = grid_occupancy(cloud, claim.params["box"], claim.params["cell"])
        covs.append(coverage_fraction(occ))
        res.append(C.builds.ode_residual())
        out.clouds[f"order{k}"] = cloud
    out.estimates = {"orders": list(p["orders"]), "coverage": covs, "ode_residual": res}
    out.add_value("ode-residual", "max-residual", max(res) <= p["residual_tol"], max(res), p["residual_tol"])
    mono = all(b >= a for a, b in zip(covs, covs[1:]))
    out.add_value("coverage-nondecreasing", "monotone", mono, covs[-1] - covs[0], 0.0, {"coverage": covs})
    out.add_value("final-coverage", "fills-box", covs[-1] >= claim.params["threshold"], covs[-1],
                  claim.params["threshold"])
    return out


# ---------------------------------------------------------------------------
# spheres


def _radius_lines(bundles, spec, radius):
    worst = 0.0
    for b in bundles:
        B, U = bundle_lines(b, spec.replace(count=max(1, spec.count // len(bundles))))
        worst = max(worst, float(np.max(np.abs(line_distance(np.zeros(b.n), B, U) - radius))))
    return worst


@experiment("sphere-tangent",
            "lines along a unit tangent field of an odd sphere fill exactly the outside of the ball",
            "For a nowhere-vanishing tangent field on S^n the union of its lines is R^(n+1) minus "
            "the open ball.",
            n=1, radius=1.0, count=1 << 18, fiber=12.0, shell_threshold=0.99)
def _sphere_tangent(ctx: RunContext) -> Outcome:
    p = ctx.params
    n, R = int(p["n"]), float(p["radius"])
    C = gallery.sphere_line_bundles(n, "tangent_field", radius=R)
    spec = ctx.spec(count=p["count"], fiber_box=((-p["fiber"] * R,), (p["fiber"] * R,)))
    cloud = sweep_bundle(C.builds, spec, ctx.threads)
    out = Outcome(clouds={"lines": cloud})
    out.add("excludes-interior", evaluate_claim(C.claim, cloud))
    N = n + 1
    cell = (0.25 if n == 1 else 1.0) * R
    shell = Claim("covers-region", {"box": [[-10 * R] * N, [10 * R] * N], "cell": cell,
                                    "region": {"shape": "shell", "center": [0.0] * N, "r_in": R, "r_out": 10 * R},
                                    "threshold": p["shell_threshold"]})
    out.add("covers-shell", evaluate_claim(ctx.claim(shell), cloud))
    dev = _radius_lines(C.builds, spec, R)
    out.add_value("line-distance", "max-deviation", dev <= 1e-9 * max(1.0, R), dev, 1e-9 * max(1.0, R))
    return out


@experiment("sphere-tilted",
            "lines tilted out of the tangent planes of a sphere have interior",
            "Lines over an open piece of the sphere that are nowhere tangent to it sweep an open set "
            "around that piece.",
            n=2, angle=0.3, count=1 << 18, base_half=0.25, fiber=0.3)
def _sphere_tilted(ctx: RunContext) -> Outcome:
    p = ctx.params
    n = int(p["n"])
    C = gallery.sphere_line_bundles(n, "tilted", angle=p["angle"])
    pole = C.builds[0] if n == 1 else next(b for b in C.builds if b.label == f"face+{n}")
    if n == 1:
        # the angle chart puts the pole (0, 1) at t = pi / 2
        base_box = ([math.pi / 2 - p["base_half"]], [math.pi / 2 + p["base_half"]])
    else:
        base_box = ([-p["base_half"]] * n, [p["base_half"]] * n)
    spec = ctx.spec(count=p["count"], base_box=base_box, fiber_box=((-p["fiber"],), (p["fiber"],)))
    cloud = sweep_bundle(pole, spec, ctx.threads)
    out = Outcome(clouds={"lines": cloud})
    out.add("fills-box", evaluate_claim(ctx.claim(C.claim), cloud))
    return out


@experiment("sphere-radial",
            "radial lines through a sphere fill space",
            "Every point of space lies on a line through the origin, so the radial line field covers "
            "any box, centre included.",
            n=1, count=1 << 18, fiber=3.0)
def _sphere_radial(ctx: RunContext) -> Outcome:
    p = ctx.params
    C = gallery.sphere_line_bundles(int(p["n"]), "radial")
    cloud = sweep_bundle(C.builds, ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],))),
                         ctx.threads)
    out = Outcome(clouds={"lines": cloud})
    out.add("fills-box", evaluate_claim(ctx.claim(C.claim), cloud))
    return out


@experiment("ellipse-tangent",
            "tangent lines of an ellipse miss exactly its open interior",
            "Affine images carry the sphere statements over: the tangent lines of an ellipse cover the "
            "outside and miss the open inside.",
            scales=[2.0, 1.0], center=[0.0, 0.0], count=1 << 18, fiber=24.0)
def _ellipse(ctx: RunContext) -> Outcome:
    p = ctx.params
    L = np.diag(np.asarray(p["scales"], dtype=float))
    C = gallery.ellipsoid_pushforward((L, np.asarray(p["center"], dtype=float)),
                                      gallery.sphere_line_bundles(L.shape[0] - 1, "tangent_field"))
    spec = ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],)))
    cloud = sweep_bundle(C.builds, spec, ctx.threads)
    out = Outcome(clouds={"lines": cloud})
    out.add("excludes-interior", evaluate_claim(C.claim, cloud))
    # pulled back by the inverse map, every line is tangent to the unit sphere
    inv = np.linalg.inv(L)
    worst = 0.0
    for b in C.builds:
        B, U = bundle_lines(b, spec.replace(count=max(1, spec.count // len(C.builds))))
        B2 = (B - np.asarray(p["center"])) @ inv.T
        U2 = U @ inv.T
        U2 /= np.linalg.norm(U2, axis=1, keepdims=True)
        worst = max(worst, float(np.max(np.abs(line_distance(np.zeros(b.n), B2, U2) - 1.0))))
    out.add_value("pullback-tangency", "max-deviation", worst <= 1e-9, worst, 1e-9)
    return out


# ---------------------------------------------------------------------------
# dimension and measure


@experiment("tangent-developable-r4",
            "tangent planes of the one-sided developable of the twisted quartic are Lebesgue-null in R^4",
            "The tangent plane of a tangent developable is constant along each ruling, so the union "
            "of tangent planes is a 3-parameter family of points in R^4 and has 4-dimensional measure zero.",
            u_lo=0.2, u_hi=0.6, v=0.5, fiber=0.5, max_slope=3.3, max_samples=1 << 22)
def _developable(ctx: RunContext) -> Outcome:
    p = ctx.params
    S = gallery.tangent_developable(gallery.twisted_quartic(), True, 0.05, 5.0, u_range=(p["u_lo"], p["u_hi"]))
    # tangent planes do not depend on v, so one ruling-transverse slice sweeps them all
    spec = ctx.spec(base_box=((p["u_lo"], p["v"]), (p["u_hi"], p["v"] + 1e-9)),
                    fiber_box=((-p["fiber"],), (p["fiber"],)))

    def gen(count):
        return sweep_tangent(S, spec.replace(count=count), ctx.threads).points

    pilot = gen(1 << 16)
    lo, hi = pilot.min(axis=0), pilot.max(axis=0)
    c, half = (lo + hi) / 2, 0.51 * float(np.max(hi - lo))
    claim = Claim("measure-zero-in-R^n", {"box": [(c - half).tolist(), (c + half).tolist()],
                                          "max_slope": p["max_slope"], "max_samples": p["max_samples"]})
    out = Outcome(clouds={"tangent": PointCloud(4, pilot, spec, {"note": "first 2^16 sweep points"})})
    out.add("measure-zero", evaluate_claim(ctx.claim(claim), gen))
    # rulings lie in the tangent planes of the surface
    X = np.stack([np.linspace(p["u_lo"], p["u_hi"], 33)[1:-1], np.full(31, p["v"])], axis=1)
    T = S.tangent_vectors(X)
    g1 = gallery.twisted_quartic().tangent_vectors(X[:, :1])[:, :, 0]
    coef = np.linalg.lstsq(T[0], g1[0], rcond=None)[0]
    resid = max(float(np.linalg.norm(T[i] @ np.linalg.lstsq(T[i], g1[i], rcond=None)[0] - g1[i]))
                for i in range(X.shape[0]))
    out.add_value("ruling-in-tangent-plane", "max-residual", resid <= 1e-9, resid, 1e-9,
                  {"first_coefficients": coef.tolist()})
    return out


@experiment("product-circles-r4",
            "tangent sweep of the product of two glued-circle curves fills a 4-box",
            "The codiagonal of a product tangent bundle is the product of the codiagonals, so the "
            "tangent sweep of gamma x gamma is all of R^4.",
            count=1 << 22, fiber=15.0, half=8.0, cell=1.0, threshold=0.95, factor_count=1 << 18,
            product_count=1 << 21)
def _product(ctx: RunContext) -> Outcome:
    p = ctx.params
    gam = gallery.glued_circles()
    h = p["half"]
    claim = ctx.claim(Claim("fills-box", {"box": [[-h] * 4, [h] * 4], "cell": p["cell"], "threshold": p["threshold"]}))
    spec = ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],)))
    joint = sweep_tangent(product_manifold(gam, gam), spec, ctx.threads)
    out = Outcome(clouds={"joint": joint})
    out.add("joint-fills-box", evaluate_claim(claim, joint))
    # factor clouds and their product
    fspec = ctx.spec(count=p["factor_count"], fiber_box=((-2 * p["fiber"],), (2 * p["fiber"],)))
    A = sweep_tangent(gam, fspec, ctx.threads)
    B = sweep_tangent(gam, fspec.replace(seed=fspec.seed + 101), ctx.threads)
    fbox = [[-h, -h], [h, h]]
    keep = lambda P: P[np.all((P >= -h) & (P < h), axis=1)]
    prod = gallery.product_sweep(keep(A.points), keep(B.points), count=p["product_count"], seed=ctx.seed)
    out.add("product-fills-box", evaluate_claim(claim, prod))
    oa, ob = grid_occupancy(A, fbox, p["cell"]), grid_occupancy(B, fbox, p["cell"])
    tensor = coverage_fraction(product_occupancy(oa, ob))
    out.add_value("tensor-occupancy", "fills-box", tensor >= claim.params["threshold"], tensor,
                  claim.params["threshold"])
    return out


@experiment("cantor-hyperplanes",
            "lines over a Cantor set of slopes have union of dimension s",
            "Hyperplanes whose parameters run over E = C u {0}, C of dimension s - n, form a union of "
            "dimension n + min(dim E, 1) = s.",
            s=1.5, n=1, depth=8, tolerance=0.15)
def _cantor(ctx: RunContext) -> Outcome:
    p = ctx.params
    C = gallery.cantor_hyperplane_family(p["s"], int(p["n"]), int(p["depth"]), p["tolerance"])
    fam = gallery.HyperplaneFamily(C.builds.parameters, C.builds.window, ctx.seed)
    out = Outcome(clouds={"hyperplanes": PointCloud(fam.n + 1, fam.points(1 << 16))})
    res = evaluate_claim(ctx.claim(C.claim), fam)
    out.add("dimension", res)
    out.estimates = {"slope": res.value, "target": p["s"]}
    return out


# ---------------------------------------------------------------------------
# line families over the disk


@experiment("halfline-swirl",
            "half-lines with boundary-fixing alpha cover a far cone",
            "If alpha is the identity on the boundary sphere, the half-lines (t, t alpha + beta) cover "
            "every far point within pi/6 of the t axis.",
            n=2, swirl=2.0, t_lo=0.1, t_hi=12.0, r_min=4.0, r_max=10.0, count=1 << 20)
def _halfline(ctx: RunContext) -> Outcome:
    p = ctx.params
    C = gallery.swirl_halfline_family(int(p["n"]), p["swirl"], (p["t_lo"], p["t_hi"]), p["r_min"], p["r_max"])
    cloud = gallery.sweep_disk_family(C.builds, ctx.spec(count=p["count"]), ctx.threads)
    out = Outcome(clouds={"halflines": cloud})
    out.add("covers-cone", evaluate_claim(ctx.claim(C.claim), cloud))
    return out


@experiment("projective-paraboloid",
            "lines crossing a paraboloid cap transversally have interior",
            "Lines (t + f(x), t beta(x) + x) over the disk with f constant on the boundary and beta "
            "never tangent sweep a set with nonempty interior.",
            n=1, t_lo=-4.0, t_hi=4.0, count=1 << 18)
def _projective(ctx: RunContext) -> Outcome:
    p = ctx.params
    C = gallery.projective_paraboloid_family(int(p["n"]), (p["t_lo"], p["t_hi"]))
    cloud = gallery.sweep_disk_family(C.builds, ctx.spec(count=p["count"]), ctx.threads)
    out = Outcome(clouds={"lines": cloud})
    out.add("fills-box", evaluate_claim(ctx.claim(C.claim), cloud))
    return out


# ---------------------------------------------------------------------------
# certificate and deformation


@experiment("certificate-parabola",
            "interior ball in the lifted section map of y = x^2",
            "At a point where the lifted section map has full-rank differential, a ball around its "
            "image lies inside the union of tangent lines; found by the fixed-point map x - J^+(h(x) - y).",
            b=1.0, targets_per_axis=5, min_solved=0.95)
def _certificate(ctx: RunContext) -> Outcome:
    p = ctx.params
    chart = gallery.parabola()
    h = lambda z: lifted_section_map(chart, z[:1], z[1:])
    fields = set(CertificateConfig.__dataclass_fields__)
    cfg = CertificateConfig(**{"targets_per_axis": p["targets_per_axis"], "seed": ctx.seed,
                               **{k: v for k, v in ctx.estimator.items() if k in fields}})
    cert = interior_certificate(h, [0.0, p["b"]], cfg)
    out = Outcome(estimates={"certificate": cert.to_dict()})
    frac = cert.success_count / len(cert.tested_targets)
    out.add_value("nonempty", "certificate", cert.nonempty, cert.radius, 0.0)
    out.add_value("solved-fraction", "certificate", frac >= p["min_solved"], frac, p["min_solved"])
    ok = bool(np.all(cert.inequality_ok[cert.solved]))
    out.add_value("two-sided-inequality", "certificate", ok, int(np.count_nonzero(cert.inequality_ok)),
                  int(cert.success_count))
    return out


@experiment("deformation-saddle",
            "bump deformation along rulings keeps every line; curvature separates rulings from diagonals",
            "Moving a surface along a line field by a section keeps the union of its lines; on the "
            "saddle z = xy the rulings are straight while the diagonal field curves away from the surface.",
            t=0.15, radius=0.5, samples=1000, count=1 << 16, fiber=2.0)
def _deformation(ctx: RunContext) -> Outcome:
    p = ctx.params
    sd = gallery.saddle(domain=Box([-1.0, -1.0], [1.0, 1.0]))
    ruling = line_bundle(sd, lambda X: sd.tangent_vectors(X)[:, :, 1], label="ruling")
    diagonal = line_bundle(sd, lambda X: sd.tangent_vectors(X) @ np.array([1.0, 1.0]), label="diagonal")
    sec = bump_section(ruling, [0.0, 0.0], p["radius"], p["t"])
    D = deform(sd, sec)
    moved = D.deformed_bundle()
    rng = np.random.default_rng(ctx.seed)
    U = rng.uniform(-1.0, 1.0, (int(p["samples"]), 2)) * p["radius"] / math.sqrt(2.0)
    P0, A0 = sd.embed_batch(U), ruling.frame(U).reshape(-1, 3)
    P1, A1 = moved.base.embed_batch(U), moved.frame(U).reshape(-1, 3)
    dist = float(np.max(np.maximum(line_distance(P1, P0, A0), line_distance(P0, P1, A1))))
    ang = float(np.max(1.0 - np.abs(np.sum(A0 * A1, axis=1))))
    out = Outcome()
    out.add_value("deformation-valid", "jacobian", D.jacobian_ok, D.displacement, None)
    out.add_value("line-invariance", "max-distance", max(dist, ang) <= 1e-9, max(dist, ang), 1e-9)
    dd, dr = osculation_defect(diagonal, [0.0, 0.0]), osculation_defect(ruling, [0.0, 0.0])
    out.add_value("diagonal-osculation", "min-defect", dd > 0.1, dd, 0.1)
    out.add_value("ruling-osculation", "max-defect", abs(dr) <= 1e-6, dr, 1e-6)
    spec = ctx.spec(count=p["count"], fiber_box=((-p["fiber"],), (p["fiber"],)))
    out.clouds = {"original": sweep_bundle(ruling, spec, ctx.threads),
                  "deformed": sweep_bundle(moved, spec, ctx.threads)}
    return out
