"""Registry of named numerical checks run against gallery cases.

A check takes ``(case, ctx)`` and returns ``(residual, notes)``.  Positive
checks report the worst (largest) residual over their samples; negative
controls report the weakest failure (smallest residual) so that a verdict
``fail`` means the failure is reproduced everywhere it was sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .chart_calculus import (
    DEFAULT_STEP,
    asd_containment_residuals,
    exterior_derivative,
    form_norm,
    linear_field,
    nijenhuis_norm,
    pq_decompose,
)
from .connections import (
    ConnectionForm,
    bismut_pair,
    chern,
    chern_frame_residual,
    coefficient_distance,
    curvature_components,
    dbar_closedness,
    holonomy_square,
    is_one_one,
    metric_residual,
    parallel_residual,
    r02_components,
    torsion_residual,
    trivial_connection,
)
from .core_linalg import (
    anticommutator_space,
    random_acs,
    random_tangent,
    realify,
    skew_anticommutator_space,
    standard_acs,
)
from .grassmann_embed import (
    cohomology_intertwiner,
    holomorphic_frame_EC,
    holomorphicity_residual,
    horizontal_preservation_residual,
    maximal_isotropic_residual,
    metric_change_residuals,
    product_chart_residual,
    transport_matrix,
    twisted_dbar,
)
from .twistor_fiber import (
    acs_from_plane,
    fiber_embed,
    fiber_embed_pushforward,
    fiber_embed_pushforward_fd,
)
from .twistor_total import (
    TotalChart,
    TwistorSpace,
    bracket_projection_residual,
    holo_section_check,
    integrability_criterion,
    jtaut_section_check,
    phi_modified_connection,
    phi_section_check,
    relative_deviation,
    section_residuals,
    strata_dims,
    stratum_invariance_residual,
    _span_residual,
    stratum_curves,
    stratum_tangent_space,
)

PAIRS_PER_POINT = 2
FIBER_SCALE = 0.4


@dataclass
class CheckContext:
    """Per-check sampling state."""

    rng: np.random.Generator
    samples: int
    fd_step: float = DEFAULT_STEP

    def points(self, case, count: int | None = None) -> np.ndarray:
        return case.chart.sample_points(self.samples if count is None else count, self.rng)


@dataclass(frozen=True)
class CheckDef:
    name: str
    anchor: str
    fn: object


CHECKS: dict[str, CheckDef] = {}


def check(name: str, anchor: str):
    def deco(fn):
        CHECKS[name] = CheckDef(name, anchor, fn)
        return fn
    return deco


# ---------------------------------------------------------------------------
# sampling helpers


def _space(spec, ctx):
    return replace(spec.space, h=ctx.fd_step)


def _center(spec):
    if spec.center is not None:
        return np.asarray(spec.center, dtype=float)
    return standard_acs(spec.space.r // 2)


def _chart(spec, ctx, mode: str) -> TotalChart:
    """``mode`` is ``"T"`` (metric twistor space) or ``"C"``."""
    g = spec.fiber_metric_const if mode == "T" else None
    return TotalChart(_space(spec, ctx), _center(spec), g)


def _best_chart(spec, ctx) -> TotalChart:
    """The T chart when it has positive fiber dimension, else the C chart."""
    if spec.fiber_metric_const is not None:
        chart = _chart(spec, ctx, "T")
        if chart.fiber.dim > 0:
            return chart
    return _chart(spec, ctx, "C")


def _sample_y(chart: TotalChart, x, rng) -> np.ndarray:
    d = chart.fiber.dim
    s = FIBER_SCALE * rng.standard_normal(d) / np.sqrt(max(d, 1))
    return np.concatenate([np.asarray(x, dtype=float), s])


def _unit(v):
    return v / np.linalg.norm(v)


def _chart_samples(case, ctx, mode=None, tm_only=False):
    """Yield ``(spec, chart, y)`` over spaces and sample points.

    ``mode`` is ``"T"``, ``"C"``, ``"both"`` (every chart with a
    positive-dimensional fiber) or ``None`` (:func:`_best_chart`).
    """
    for spec in case.spaces:
        if tm_only and not spec.tm:
            continue
        if mode is None:
            charts = [_best_chart(spec, ctx)]
        elif mode == "T":
            charts = [] if spec.fiber_metric_const is None else [_chart(spec, ctx, "T")]
        elif mode == "C":
            charts = [_chart(spec, ctx, "C")]
        else:
            charts = [_chart(spec, ctx, "C")]
            if spec.fiber_metric_const is not None:
                charts.append(_chart(spec, ctx, "T"))
            charts = [c for c in charts if c.fiber.dim > 0]
        for chart in charts:
            for x in _points_for(case, ctx, spec):
                yield spec, chart, _sample_y(chart, x, ctx.rng)


def _points_for(case, ctx, spec, count=None):
    """Sample points restricted to the base coordinates of ``spec`` (leading block)."""
    return ctx.points(case, count)[:, : spec.space.m]


def _worst(values) -> float:
    vals = [float(v) for v in values]
    return max(vals) if vals else 0.0


def _weakest(values) -> float:
    vals = [float(v) for v in values]
    return min(vals) if vals else float("nan")


def _fiber_J(spec, x, rng):
    n = spec.space.r // 2
    if spec.fiber_metric_const is not None:
        return random_acs(n, rng, g=spec.fiber_metric_const, scale=1.0)
    return random_acs(n, rng)


def _metric_at(spec, x):
    if spec.space.metric is not None:
        return np.asarray(spec.space.metric(np.asarray(x, dtype=float)))
    return spec.fiber_metric_const


# ---------------------------------------------------------------------------
# fiber algebra


@check("fiber.dimensions", "dim C(V) = 2n^2 and dim T(V, g) = n(n-1)")
def _fiber_dimensions(case, ctx):
    worst = 0
    for n in (1, 2, 3):
        A = ctx.rng.standard_normal((2 * n, 2 * n))
        g = A @ A.T + 2 * n * np.eye(2 * n)
        J = random_acs(n, ctx.rng, g=g, scale=1.0)
        worst = max(worst, abs(len(anticommutator_space(J)) - 2 * n * n),
                    abs(len(skew_anticommutator_space(J, g)) - n * (n - 1)))
    return float(worst), {}


@check("fiber.embed_pushforward", "psi_*(J A0) = -A0/2 in the graph chart")
def _fiber_pushforward(case, ctx):
    vals = []
    for spec in case.spaces:
        for _ in range(max(ctx.samples, 1)):
            J = _fiber_J(spec, None, ctx.rng)
            A = random_tangent(J, ctx.rng)
            vals.append(relative_deviation([fiber_embed_pushforward_fd(J, A, ctx.fd_step)],
                                           [fiber_embed_pushforward(J, A)]))
    return _worst(vals), {}


@check("fiber.embed_roundtrip", "J -> V^{0,1}_J -> J is the identity")
def _fiber_roundtrip(case, ctx):
    vals = []
    for spec in case.spaces:
        for _ in range(max(ctx.samples, 1)):
            J = _fiber_J(spec, None, ctx.rng)
            vals.append(np.max(np.abs(acs_from_plane(fiber_embed(J)) - J)))
    return _worst(vals), {}


@check("fiber.isotropy", "V^{0,1}_J is maximal isotropic for g-orthogonal J")
def _fiber_isotropy(case, ctx):
    vals = []
    for spec in case.spaces:
        if spec.fiber_metric_const is None:
            continue
        for _ in range(max(ctx.samples, 1)):
            J = _fiber_J(spec, None, ctx.rng)
            vals.append(maximal_isotropic_residual(J, spec.fiber_metric_const))
    return _worst(vals), {}


# ---------------------------------------------------------------------------
# chart calculus


@check("calculus.nijenhuis_I", "base complex structure is integrable")
def _nij_I(case, ctx):
    I = case.fields["I"] if "I" in case.fields else case.fields["J_plus"]
    fields = [I] + ([case.fields["J_minus"]] if "J_minus" in case.fields else [])
    return _worst(nijenhuis_norm(f, x, ctx.fd_step) for f in fields for x in ctx.points(case)), {}


@check("calculus.dd_zero", "d(dw) = 0")
def _dd_zero(case, ctx):
    w = case.fields["w"]
    h = ctx.fd_step

    def dw(p):
        return exterior_derivative(w, p, h)

    return _worst(form_norm(exterior_derivative(dw, x, h)) for x in ctx.points(case)), {}


@check("calculus.h_type", "H = -d^c w has type (2,1) + (1,2)")
def _h_type(case, ctx):
    H, I = case.fields["H"], case.fields["I"]
    vals = []
    for x in ctx.points(case):
        parts = pq_decompose(H(x), I(x))
        vals.append(max(form_norm(parts[(3, 0)]), form_norm(parts[(0, 3)])))
    return _worst(vals), {}


@check("calculus.dH", "dH = 0 (strong KT)")
def _dH(case, ctx):
    H = case.fields["H"]
    return _worst(form_norm(exterior_derivative(H, x, ctx.fd_step)) for x in ctx.points(case)), {}


@check("calculus.asd_split", "Lambda^- = Lambda^{1,1}_0 and w in Lambda^+ for the orientation of I")
def _asd(case, ctx):
    g, I = case.fields["g"], case.fields["I"]
    vals = []
    for x in ctx.points(case):
        res = asd_containment_residuals(g(x), I(x))
        vals.append(max(res.values()))
    return _worst(vals), {}


# ---------------------------------------------------------------------------
# connections


def _conns(case):
    return [(spec, spec.space.conn, spec.space.I) for spec in case.spaces]


@check("connection.one_one", "curvature has type (1,1)")
def _one_one(case, ctx):
    vals = []
    for spec, conn, I in _conns(case):
        for x in _points_for(case, ctx, spec):
            vals.append(is_one_one(conn, I, x, ctx.fd_step))
    return _worst(vals), {}


@check("connection.r02_nonzero", "R^{0,2} does not vanish (negative control)")
def _r02_nonzero(case, ctx):
    vals = []
    for spec, conn, I in _conns(case):
        for x in _points_for(case, ctx, spec):
            vals.append(is_one_one(conn, I, x, ctx.fd_step))
    return _weakest(vals), {}


@check("connection.holonomy", "holonomy of a small square is 1 - eps^2 R_kl")
def _holonomy(case, ctx):
    eps = 0.02
    vals = []
    for spec, conn, _ in _conns(case):
        for x in _points_for(case, ctx, spec, max(1, ctx.samples // 2)):
            R = curvature_components(conn, x, ctx.fd_step)
            k, l = ctx.rng.choice(conn.dim, size=2, replace=False)
            f = [(np.eye(conn.rank) - holonomy_square(conn, x, k, l, e)) / e ** 2 for e in (eps, eps / 2, eps / 4)]
            # f(e) = R + a e + b e^2 + O(e^3): two Richardson levels
            r1 = [2 * f[1] - f[0], 2 * f[2] - f[1]]
            rich = (4 * r1[1] - r1[0]) / 3
            vals.append(np.max(np.abs(rich - R[k, l])) / max(1.0, np.max(np.abs(R[k, l]))))
    return _worst(vals), {"curvature_sign": "R_kl = d_k A_l - d_l A_k + [A_k, A_l]; transport s' = -A s"}


@check("connection.metric", "connection preserves the fiber metric")
def _metric(case, ctx):
    vals = []
    for spec in case.spaces:
        if spec.space.metric is None:
            continue
        for x in _points_for(case, ctx, spec):
            vals.append(metric_residual(spec.space.conn, spec.space.metric, x, ctx.fd_step))
    return _worst(vals), {}


@check("connection.torsion", "Levi-Civita connection is torsion free")
def _torsion(case, ctx):
    lc = case.fields["levi_civita"]
    return _worst(torsion_residual(lc, x) for x in ctx.points(case)), {}


@check("connection.levi_civita_equals_chern", "Kaehler: Levi-Civita = Chern")
def _lc_ch(case, ctx):
    f = case.fields
    return _worst(coefficient_distance(f["levi_civita"], f["chern"], x) for x in ctx.points(case)), {}


@check("connection.scalar_curvature", "Fubini-Study scalar curvature is 2")
def _scal(case, ctx):
    f = case.fields
    vals = []
    for x in ctx.points(case):
        g = f["g"](x)
        R = curvature_components(f["levi_civita"], x, ctx.fd_step)
        e1, e2 = np.eye(2)
        K = e1 @ g @ (R[0, 1] @ e2) / np.linalg.det(g)
        vals.append(abs(2 * K - 2.0))
    return _worst(vals), {}


@check("connection.chern_frame", "Chern connection kills holomorphic frames of E^{1,0} in the (0,1) directions")
def _chern_frame(case, ctx):
    f = case.fields
    return _worst(chern_frame_residual(f["chern"], f["g"], f["I"](x), x, ctx.fd_step) for x in ctx.points(case)), {}


@check("connection.bismut_plus_I", "Bismut connection nabla^+ = LC + g^{-1}H/2 preserves I")
def _bismut_plus(case, ctx):
    f = case.fields
    return _worst(parallel_residual(f["bismut_plus"], f["I"], x, ctx.fd_step) for x in ctx.points(case)), {}


@check("connection.bismut_metric", "both Bismut connections are metric")
def _bismut_metric(case, ctx):
    f = case.fields
    return _worst(metric_residual(f[k], f["g"], x, ctx.fd_step)
                  for k in ("bismut_plus", "bismut_minus") for x in ctx.points(case)), {}


@check("connection.h_twist_sign", "nabla^- = Ch + s (1/2) I[g^{-1}H, I] for exactly one sign s")
def _h_twist(case, ctx):
    f = case.fields
    pts = ctx.points(case)
    dist = {s: _worst(coefficient_distance(f[f"h_twisted_{s}"], f["bismut_minus"], x) for x in pts)
            for s in ("plus", "minus")}
    best = min(dist, key=dist.get)
    other = "plus" if best == "minus" else "minus"
    return dist[best], {"h_twist_sign": ("+1" if best == "plus" else "-1"),
                        "h_twist_other_sign_distance": dist[other]}


@check("connection.chern_one_one", "Chern curvature has type (1,1)")
def _chern_11(case, ctx):
    f = case.fields
    return _worst(is_one_one(f["chern"], f["I"], x, ctx.fd_step) for x in ctx.points(case)), {}


@check("connection.h_twisted_metric", "Ch +/- (1/2) I[g^{-1}H, I] is metric")
def _htw_metric(case, ctx):
    f = case.fields
    return _worst(metric_residual(f[k], f["g"], x, ctx.fd_step)
                  for k in ("h_twisted_plus", "h_twisted_minus") for x in ctx.points(case)), {}


@check("connection.section_modified_parallel", "nabla' = nabla^- + (1/2)(nabla^- I) I preserves I")
def _secmod_par(case, ctx):
    f = case.fields
    return _worst(parallel_residual(f["section_modified"], f["I"], x, ctx.fd_step) for x in ctx.points(case)), {}


@check("connection.section_modified_is_chern", "nabla' equals the Chern connection")
def _secmod_ch(case, ctx):
    f = case.fields
    return _worst(coefficient_distance(f["section_modified"], f["chern"], x) for x in ctx.points(case)), {}


@check("connection.section_modified_one_one", "nabla' has (1,1) curvature")
def _secmod_11(case, ctx):
    f = case.fields
    return _worst(is_one_one(f["section_modified"], f["I"], x, ctx.fd_step) for x in ctx.points(case)), {}


@check("connection.bihermitian_parallel", "nabla^+ J_+ = 0 and nabla^- J_- = 0")
def _bihermitian(case, ctx):
    f = case.fields
    g = f["g"]
    vals = []
    for spec in case.spaces:
        plus, minus = bismut_pair(g, f["H"], spec.space.m)
        for x in ctx.points(case):
            vals.append(parallel_residual(plus, f["J_plus"], x, ctx.fd_step))
            vals.append(parallel_residual(minus, f["J_minus"], x, ctx.fd_step))
    return _worst(vals), {}


@check("connection.phi_curvature", "nabla' = d + (1/2)(d phi) phi has curvature -(1/4)[d phi, d phi]")
def _phi_curv(case, ctx):
    base = case.fields["base_chart"]
    conn = case.spaces[0].space.conn
    vals = []
    for s in ctx.points(case):
        R = curvature_components(conn, s, ctx.fd_step)
        jac = base.jacobian(s)
        ref = -0.25 * (np.einsum("kab,lbc->klac", jac, jac) - np.einsum("lab,kbc->klac", jac, jac))
        vals.append(np.max(np.abs(R - ref)))
    return _worst(vals), {}


@check("connection.phi_parallel", "nabla' phi = 0")
def _phi_par(case, ctx):
    base = case.fields["base_chart"]
    conn = case.spaces[0].space.conn
    vals = []
    for s in ctx.points(case):
        A = conn(s)
        J = base(s)
        jac = base.jacobian(s)
        vals.append(np.max(np.abs(jac + np.einsum("kab,bc->kac", A, J) - np.einsum("ab,kbc->kac", J, A))))
    return _worst(vals), {}


def _family(case):
    return sorted(case.fields["family"].items())


@check("connection.d_twisted_one_one", "Ch + g^{-1}D + (g^{-1}D)^* has (1,1) curvature for dbar-closed D")
def _dtw_11(case, ctx):
    I = case.fields["I"]
    vals = []
    for _, f in _family(case):
        for key in ("twisted", "twisted_B"):
            for x in ctx.points(case):
                vals.append(is_one_one(f[key], I, x, ctx.fd_step))
    return _worst(vals), {}


@check("connection.d_twisted_metric", "D-twisted connection is metric")
def _dtw_metric(case, ctx):
    g = case.fields["g"]
    return _worst(metric_residual(f[key], g, x, ctx.fd_step)
                  for _, f in _family(case) for key in ("twisted", "twisted_B") for x in ctx.points(case)), {}


@check("connection.d_twisted_skew", "D and dbar B take values in Lambda^2 E^{*1,0}")
def _dtw_skew(case, ctx):
    vals = []
    for _, f in _family(case):
        for x in ctx.points(case):
            for key in ("D", "dbarB"):
                M = np.asarray(f[key](x))
                vals.append(np.max(np.abs(M + np.swapaxes(M, -1, -2))))
    return _worst(vals), {}


@check("connection.dbar_closed", "D and D + dbar B are dbar-closed")
def _dbar_closed(case, ctx):
    vals = []
    for _, f in _family(case):
        def Dp(y, f=f):
            return np.asarray(f["D"](y)) + np.asarray(f["dbarB"](y))
        for x in ctx.points(case):
            vals.append(dbar_closedness(f["D"], x, 2, ctx.fd_step))
            vals.append(dbar_closedness(Dp, x, 2, ctx.fd_step))
    return _worst(vals), {}


# ---------------------------------------------------------------------------
# twistor spaces


@check("twistor.j_squares", "J^(nabla, I) squares to -1 in chart coordinates")
def _j_squares(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx):
        K = chart.structure_matrix(y)
        vals.append(np.max(np.abs(K @ K + np.eye(len(K)))))
    return _worst(vals), {}


@check("twistor.projection_horizontal", "vertical projection kills horizontal lifts and fixes vertical vectors")
def _projection(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx):
        x, J = chart.point(y)
        sp = chart.space
        v = ctx.rng.standard_normal(sp.m)
        xd, Jd = sp.horizontal_lift(x, J, v)
        vals.append(np.max(np.abs(sp.vertical_projection(x, J, xd, Jd))))
        P = random_tangent(J, ctx.rng)
        vals.append(np.max(np.abs(sp.vertical_projection(x, J, np.zeros(sp.m), P) - P)))
    return _worst(vals), {}


def _random_pair(chart, y, rng):
    return _unit(rng.standard_normal(chart.dim)), _unit(rng.standard_normal(chart.dim))


@check("twistor.nijenhuis_oracle", "FD Nijenhuis tensor of J^(nabla, I) matches the curvature closed form")
def _nij_oracle(case, ctx):
    vals = []
    pairs = 0
    for spec, chart, y in _chart_samples(case, ctx, mode="both"):
        x, J = chart.point(y)
        for _ in range(PAIRS_PER_POINT):
            X, Y = _random_pair(chart, y, ctx.rng)
            fd = chart.nijenhuis_fd(y, X, Y, h=ctx.fd_step)
            v, w = X[: chart.space.m], Y[: chart.space.m]
            cf = chart.space.nijenhuis_closed_form(x, J, v, w)
            vals.append(relative_deviation(fd, cf))
            pairs += 1
    return _worst(vals), {"pairs": pairs}


def _nij_norm(chart, y, X, Y, kind="twistor", h=DEFAULT_STEP):
    base, vert = chart.nijenhuis_fd(y, X, Y, kind=kind, h=h)
    return max(np.max(np.abs(base)), np.max(np.abs(vert)))


def _nij_samples(case, ctx, mode, kind="twistor", tm_only=False):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx, mode=mode, tm_only=tm_only):
        X, Y = _random_pair(chart, y, ctx.rng)
        vals.append(_nij_norm(chart, y, X, Y, kind, ctx.fd_step))
    return vals


@check("twistor.nijenhuis_C", "J^(nabla, I) is integrable on C(E)")
def _nij_C(case, ctx):
    return _worst(_nij_samples(case, ctx, "C")), {}


@check("twistor.nijenhuis_T", "J^(nabla, I) is integrable on T(E, g)")
def _nij_T(case, ctx):
    return _worst(_nij_samples(case, ctx, "T")), {}


@check("twistor.jtaut_nijenhuis_tplus", "J_taut is integrable on T+ over flat R^4")
def _nij_taut(case, ctx):
    return _worst(_nij_samples(case, ctx, "T", kind="taut", tm_only=True)), {}


def _witness_chart(case, ctx):
    spec = case.spaces[0]
    chart = TotalChart(_space(spec, ctx), case.fields["witness_J"], spec.fiber_metric_const)
    y = np.concatenate([case.fields["witness_x"], np.zeros(chart.fiber.dim)])
    return chart, y


@check("twistor.nijenhuis_T_witness", "J^(nabla, I) is not integrable at the witness (negative control)")
def _nij_witness(case, ctx):
    chart, y = _witness_chart(case, ctx)
    m = chart.space.m
    E = np.eye(chart.dim)
    best = max(_nij_norm(chart, y, E[k], E[l], h=ctx.fd_step) for k, l in combinations(range(m), 2))
    return best, {}


@check("twistor.criterion_T_witness", "[R^{0,2}, J] P01(J) is nonzero at the witness (negative control)")
def _crit_witness(case, ctx):
    spec = case.spaces[0]
    x = case.fields["witness_x"]
    R = curvature_components(spec.space.conn, x, ctx.fd_step)
    R02 = r02_components(R, spec.space.I(x))
    return integrability_criterion(R02, case.fields["witness_J"]), {}


@check("twistor.criterion_C", "[R^{0,2}, J] P01(J) vanishes on all of C(E)")
def _crit_C(case, ctx):
    vals = []
    for spec in case.spaces:
        for x in _points_for(case, ctx, spec):
            R = curvature_components(spec.space.conn, x, ctx.fd_step)
            R02 = r02_components(R, spec.space.I(x))
            for _ in range(PAIRS_PER_POINT):
                vals.append(integrability_criterion(R02, random_acs(spec.space.r // 2, ctx.rng, scale=1.0)))
    return _worst(vals), {}


@check("twistor.central_twist_invariance", "connections differing by w (x) 1 give the same J^(nabla, I)")
def _central(case, ctx):
    ref = case.fields["reference"]
    vals = []
    for spec, chart, y in _chart_samples(case, ctx, mode="C"):
        other = TotalChart(replace(ref, h=ctx.fd_step), chart.center, None)
        vals.append(np.max(np.abs(chart.structure_matrix(y) - other.structure_matrix(y))))
    return _worst(vals), {}


@check("twistor.tensoriality", "FD Nijenhuis value does not depend on the vector field extension")
def _tensoriality(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx):
        X, Y = _random_pair(chart, y, ctx.rng)
        LX = ctx.rng.standard_normal((chart.dim, chart.dim))
        LY = ctx.rng.standard_normal((chart.dim, chart.dim))
        a = chart.nijenhuis_fd(y, X, Y, h=ctx.fd_step)
        b = chart.nijenhuis_fd(y, X, Y, h=ctx.fd_step, fields=(linear_field(X, LX, y), linear_field(Y, LY, y)))
        vals.append(relative_deviation(b, a))
    return _worst(vals), {}


@check("twistor.bracket_projection", "P[X,Y] = -[R(X,Y), phi] + nabla_X P(Y) - nabla_Y P(X)")
def _bracket(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx, mode="C"):
        d = chart.dim
        X0, Y0 = _random_pair(chart, y, ctx.rng)
        LX = ctx.rng.standard_normal((d, d))
        LY = ctx.rng.standard_normal((d, d))
        vals.append(bracket_projection_residual(chart, y, X0, Y0, LX, LY, ctx.fd_step))
    return _worst(vals), {}


@check("twistor.phi_section", "tautological section phi is holomorphic in C(pi^*E) over (C, J^(nabla, I))")
def _phi_sec(case, ctx):
    return _worst(max(phi_section_check(chart, y, "twistor")) for _, chart, y in _chart_samples(case, ctx)), {}


@check("twistor.phi_section_taut", "tautological section phi is holomorphic over (T+, J_taut)")
def _phi_sec_taut(case, ctx):
    return _worst(max(phi_section_check(chart, y, "taut"))
                  for _, chart, y in _chart_samples(case, ctx, mode="T", tm_only=True)), {}


@check("twistor.jtaut_section", "J_taut is a holomorphic section of C(TC) over (C, J^(nabla, I))")
def _jtaut_sec(case, ctx):
    return _worst(jtaut_section_check(chart, y, "twistor")
                  for _, chart, y in _chart_samples(case, ctx, tm_only=True)), {}


@check("twistor.jtaut_section_taut", "J_taut is a holomorphic section of C(TC) over (T+, J_taut)")
def _jtaut_sec_taut(case, ctx):
    return _worst(jtaut_section_check(chart, y, "taut")
                  for _, chart, y in _chart_samples(case, ctx, mode="T", tm_only=True)), {}


@check("twistor.phi_modified_one_one", "pi^*nabla + (1/2)(pi^*nabla phi) phi has (1,1) curvature over T+")
def _phi_mod(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx, mode="T", tm_only=True):
        conn = ConnectionForm(lambda p, c=chart: phi_modified_connection(c, p), chart.dim, chart.space.r)
        for kind in ("twistor", "taut"):
            vals.append(is_one_one(conn, lambda p, c=chart, k=kind: c.structure_matrix(p, k), y, ctx.fd_step))
    return _worst(vals), {}


@check("twistor.holo_section_I", "the base complex structure is a holomorphic section of C(TM)")
def _holo_I(case, ctx):
    vals = []
    for spec in case.spaces:
        if not spec.tm:
            continue
        for x in _points_for(case, ctx, spec):
            vals.append(max(holo_section_check(spec.space.conn, spec.space.I, spec.space.I, x, ctx.fd_step)))
    return _worst(vals), {}


@check("twistor.holo_section_minus_I", "-I is not a holomorphic section (negative control)")
def _holo_minus_I(case, ctx):
    vals = []
    for spec in case.spaces:
        if not spec.tm:
            continue
        I = spec.space.I
        for x in _points_for(case, ctx, spec):
            vals.append(holo_section_check(spec.space.conn, I, lambda p: -np.asarray(I(p)), x, ctx.fd_step)[0])
    return _weakest(vals), {}


@check("twistor.pseudoholo", "J nabla_v J = nabla_{Iv} J for the section J = I")
def _pseudoholo(case, ctx):
    vals = []
    for spec in case.spaces:
        if not spec.tm:
            continue
        for x in _points_for(case, ctx, spec):
            x = np.asarray(x)
            vals.append(section_residuals(spec.space.conn(x), np.asarray(spec.space.I(x)), spec.space.I, x,
                                          ctx.fd_step)[0])
    return _worst(vals), {}


def _stratum_K(rng, n: int = 6):
    """``K in T(R^{2n})`` on the non-generic strata ``dim ker(K + J) = 4 = dim ker(K - J)``.

    Two complex lines carry ``K = -J``, two carry ``K = J`` and the remaining
    ``C^2`` a generic structure; then everything is moved by a random element of
    ``U(n)``, which commutes with ``J = standard_acs(n)`` and is orthogonal.
    """
    J1 = standard_acs(1)
    K = np.zeros((2 * n, 2 * n))
    for j, sgn in enumerate((-1, -1, 1, 1)):
        K[np.ix_([j, n + j], [j, n + j])] = sgn * J1
    rest = [4, 5, n + 4, n + 5]
    K[np.ix_(rest, rest)] = random_acs(2, rng, g=np.eye(4), scale=1.0)
    Q = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))[0]
    O = realify(Q)
    return O @ K @ O.T


STRATA_SIGNS = ((1,), (-1,), (1, -1))


@check("twistor.strata", "strata dim ker(K +/- J) = const are J_C-invariant and preserved by U(J) and transport")
def _strata(case, ctx):
    n = 6
    J = standard_acs(n)
    g = np.eye(2 * n)
    vals = []
    for _ in range(max(ctx.samples, 1)):
        K = _stratum_K(ctx.rng, n)
        dims = strata_dims(K, J)
        if dims != (4, 4):
            raise AssertionError(f"stratum sample has kernel dimensions {dims}")
        for signs in STRATA_SIGNS:
            vals.append(stratum_invariance_residual(K, J, g, signs))
            T = stratum_tangent_space(K, J, g, signs)
            for B, flow in stratum_curves(K, J, g, signs, ctx.rng):
                vals.append(_span_residual(T, [B]))
                idx = [0 if sgn > 0 else 1 for sgn in signs]
                for t in (1e-2, -1e-2, 5e-3):
                    moved = strata_dims(flow(t), J)
                    vals.append(float(any(moved[i] != dims[i] for i in idx)))
    # transport by a connection keeping the reference structure parallel
    conn = case.fields.get("strata_connection")
    for spec in case.spaces:
        c = spec.space.conn if conn is None else conn
        if c.rank != 4 or not spec.tm:
            continue
        Jf = spec.space.I
        for x in _points_for(case, ctx, spec, max(1, ctx.samples // 2)):
            v = 0.2 * _unit(ctx.rng.standard_normal(spec.space.m))
            T = transport_matrix(c, x, v, 1.0)
            Ti = np.linalg.inv(T)
            J1 = np.asarray(Jf(x + v))
            vals.append(np.max(np.abs(T @ np.asarray(Jf(x)) @ Ti - J1)))
            J0 = np.asarray(Jf(x))
            for K2 in (-J0, random_acs(2, ctx.rng, g=np.eye(4), scale=1.0)):
                vals.append(float(strata_dims(T @ K2 @ Ti, J1) != strata_dims(K2, J0)))
    return _worst(vals), {}


@check("twistor.product_model", "for d, C(E) = C(V) x C(V) with I_C x I_C and phi is the diagonal")
def _product(case, ctx):
    flat = case.fields["flat_space"]
    IC = case.fields["I"]
    vals = []
    for x in ctx.points(case):
        chart = TotalChart(replace(flat, h=ctx.fd_step), case.fields["base_chart"].center)
        y = _sample_y(chart, x, ctx.rng)
        xb, s = chart.split(y)
        K = chart.structure_matrix(y)
        d = len(xb)
        ref = np.zeros_like(K)
        ref[:d, :d] = IC(xb)
        ref[d:, d:] = IC(s)
        vals.append(np.max(np.abs(K - ref)))
        # phi corresponds to the diagonal, a holomorphic section for d
        vals.append(max(holo_section_check(flat.conn, IC, case.fields["base_chart"], xb, ctx.fd_step)))
    return _worst(vals), {}


# ---------------------------------------------------------------------------
# Grassmann embedding


@check("grassmann.holomorphic", "psi: C(E) -> Gr(E_C) is holomorphic (FD pushforward)")
def _grass_holo(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx):
        x, J = chart.point(y)
        sp = chart.space
        v = ctx.rng.standard_normal(sp.m)
        P = random_tangent(J, ctx.rng, g=chart.fiber_metric)
        vals.append(holomorphicity_residual(sp, x, J, v, P, ctx.fd_step))
    return _worst(vals), {}


@check("grassmann.horizontal", "psi maps horizontal curves to parallel planes")
def _grass_horiz(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx):
        x, J = chart.point(y)
        v = 0.3 * _unit(ctx.rng.standard_normal(chart.space.m))
        vals.append(horizontal_preservation_residual(chart.space, x, J, v, t=0.5))
    return _worst(vals), {}


@check("grassmann.isotropy", "psi(T(E, g)) lies in the maximal isotropic Grassmannian")
def _grass_iso(case, ctx):
    vals = []
    for spec, chart, y in _chart_samples(case, ctx, mode="T"):
        x, J = chart.point(y)
        vals.append(maximal_isotropic_residual(J, _metric_at(spec, x)))
    return _worst(vals), {}


@check("grassmann.product_chart", "holomorphic frames of E_C give holomorphic product charts of Gr(E_C)")
def _product_chart(case, ctx):
    f = case.fields
    g = f["g"]
    I = f["I"]
    m = I(np.zeros(case.chart.dim)).shape[0]
    conn = f.get("chern")
    space = TwistorSpace(conn, I, g)
    frame = holomorphic_frame_EC(g, m // 2)
    vals = []
    for x in ctx.points(case):
        J = random_acs(m // 2, ctx.rng, g=np.eye(m), scale=1.0)
        P = fiber_embed(J)
        v = ctx.rng.standard_normal(m)
        B = ctx.rng.standard_normal((m // 2, m // 2)) + 1j * ctx.rng.standard_normal((m // 2, m // 2))
        vals.append(product_chart_residual(space, frame, x, P, v, B, ctx.fd_step))
    return _worst(vals), {}


def _twist_section(f, c):
    """Holomorphic section ``F (c, -sum_a zbar_a D_a^T c)`` of ``dbar + g^{-1}D`` (constant ``g``, ``D``)."""
    g = f["g"]
    frame = holomorphic_frame_EC(g, 2)

    def s(x):
        zbar = x[:2] - 1j * x[2:]
        D = np.asarray(f["D"](x))
        lower = -np.einsum("a,aji,j->i", zbar, D, c)
        return frame(x) @ np.concatenate([c, lower])

    return s


@check("grassmann.cohomology_intertwiner",
       "exp(-g^{-1}B) intertwines the D and D + dbar B twisted structures")
def _intertwiner(case, ctx):
    I = case.fields["I"]
    vals = []
    for _, f in _family(case):
        for x in ctx.points(case):
            c = ctx.rng.standard_normal(2) + 1j * ctx.rng.standard_normal(2)
            res = cohomology_intertwiner(f["chern"], f["g"], f["D"], f["B"], f["dbarB"],
                                         _twist_section(f, c), I(x), x, h=ctx.fd_step)
            vals.append(max(res.values()))
    return _worst(vals), {}


def _metric_change_pairs(case):
    f = case.fields
    if "family" in f:
        out = []
        for _, fam in _family(case):
            g = fam["g"]
            g2 = lambda x, g=g: 2.0 * np.asarray(g(x))
            ch2 = chern(g2, fam["I"](None), 4, 4)
            out.append((g, g2, twisted_dbar(fam["chern"], g, fam["D"], 2), twisted_dbar(ch2, g2, fam["D"], 2)))
        return out
    flat = lambda x: np.eye(4)
    flat_chern = trivial_connection(4, 4)
    return [(flat, f["g"], twisted_dbar(flat_chern, flat), twisted_dbar(f["chern"], f["g"]))]


@check("grassmann.metric_change", "metric change map is orthogonal, intertwines dbar and keeps isotropy")
def _metric_change(case, ctx):
    I = case.fields["I"]
    vals = []
    for g, g2, d1, d2 in _metric_change_pairs(case):
        for x in ctx.points(case):
            Jf = np.asarray(I(x))
            planes = [fiber_embed(random_acs(2, ctx.rng, g=np.asarray(g(x)), scale=1.0))]
            res = metric_change_residuals(g, g2, Jf, d1, d2, Jf, x, ctx.fd_step, planes)
            vals.append(max(res.values()))
    return _worst(vals), {}


__all__ = ["CHECKS", "CheckContext", "CheckDef", "check"]
