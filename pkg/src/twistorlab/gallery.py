"""Explicit example geometries with expected verdicts.

Each case bundles a coordinate box, named fields (metrics, complex
structures, connections, 3-forms) and one or more :class:`SpaceSpec`
entries describing twistor spaces to test.  ``expected`` lists the checks
that apply together with their verdict (``pass`` means residual <= tol,
``fail`` means residual >= tol, i.e. a reproduced negative control).

Case-internal randomness (random connections, witnesses) uses fixed seeds so
that a case is the same object on every run; the run seed only drives the
sample points used by the checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart_calculus import ChartSpec, fundamental_form, neg_dc
from .connections import (
    ConnectionForm,
    bismut_pair,
    chern,
    d_twisted,
    h_twisted_chern,
    levi_civita,
    section_modified,
    trivial_connection,
)
from .core_linalg import random_acs, standard_acs
from .twistor_fiber import FiberChart
from .twistor_total import TwistorSpace


@dataclass(frozen=True)
class Expectation:
    check: str
    verdict: str  # "pass" or "fail"
    tol: float

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValueError(f"bad verdict {self.verdict!r}")


@dataclass(frozen=True)
class SpaceSpec:
    """A twistor space to test.

    ``metric`` marks the metric twistor space.  ``fiber_metric_const`` is a
    constant metric with the same orthogonal complex structures as the
    fiber metric (the metric itself when constant, ``delta`` for a metric
    conformal to it); it defines the chart of ``T(E, g)``.
    """

    name: str
    space: TwistorSpace
    metric: bool = False
    fiber_metric_const: np.ndarray | None = None
    tm: bool = False
    center: np.ndarray | None = None


@dataclass(frozen=True)
class GalleryCase:
    key: str
    chart: ChartSpec
    fields: dict
    spaces: tuple
    expected: tuple
    description: str = ""
    notes: dict = field(default_factory=dict)

    def space(self, name: str) -> SpaceSpec:
        for s in self.spaces:
            if s.name == name:
                return s
        raise KeyError(name)

    def expectation(self, check: str) -> Expectation | None:
        for e in self.expected:
            if e.check == check:
                return e
        return None


def const(M):
    M = np.asarray(M, dtype=float)
    return lambda x: M


def _split_rotation(r: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((r, r))
    E[i, j] = -1.0
    E[j, i] = 1.0
    return E


def _P(check, tol=1e-6):
    return Expectation(check, "pass", tol)


def _F(check, tol):
    return Expectation(check, "fail", tol)


# ---------------------------------------------------------------------------
# cases


def _flat_cn(n: int = 2) -> GalleryCase:
    m = 2 * n
    I0 = standard_acs(n)
    g = np.eye(m)
    spaces = []
    for k in sorted({1, n}):
        Ik = standard_acs(k)
        sp = TwistorSpace(trivial_connection(2 * k, 2 * k), const(Ik), const(np.eye(2 * k)))
        spaces.append(SpaceSpec(f"c{k}", sp, metric=True, fiber_metric_const=np.eye(2 * k), tm=True))
    chart = ChartSpec(-np.ones(m), np.ones(m), complex_dim=n)
    return GalleryCase(
        "flat_cn", chart, {"g": const(g), "I": const(I0), "n": n}, tuple(spaces),
        (
            _P("fiber.dimensions", 0.5), _P("fiber.embed_pushforward", 1e-6),
            _P("fiber.embed_roundtrip", 1e-9), _P("fiber.isotropy", 1e-9),
            _P("calculus.nijenhuis_I", 1e-9), _P("connection.one_one", 1e-9),
            _P("connection.holonomy", 1e-4), _P("twistor.j_squares", 1e-10),
            _P("twistor.projection_horizontal", 1e-8), _P("twistor.nijenhuis_oracle", 1e-4),
            _P("twistor.nijenhuis_C", 1e-7), _P("twistor.nijenhuis_T", 1e-7),
            _P("twistor.bracket_projection", 1e-5), _P("twistor.phi_section", 1e-8),
            _P("twistor.jtaut_section", 1e-6), _P("grassmann.holomorphic", 1e-5),
            _P("grassmann.horizontal", 1e-7),
        ),
        "constant metric and complex structure, trivial connection",
    )


def _random_smooth_connection(m, r, rng, amp=0.4, skew=False):
    C0 = amp * rng.standard_normal((m, r, r))
    C1 = amp * rng.standard_normal((m, m, r, r))
    C2 = amp * rng.standard_normal((m, m, r, r))
    if skew:
        C0 = C0 - np.swapaxes(C0, -1, -2)
        C1 = C1 - np.swapaxes(C1, -1, -2)
        C2 = C2 - np.swapaxes(C2, -1, -2)

    def fn(x):
        return C0 + np.einsum("j,kjab->kab", np.sin(x), C1) + np.einsum("j,kjab->kab", np.cos(2 * x) * x, C2)

    return fn


def _complex_curve() -> GalleryCase:
    rng = np.random.default_rng(20240501)
    I0 = standard_acs(1)
    general = ConnectionForm(_random_smooth_connection(2, 4, rng), 2, 4, label="random_rank4")
    metric = ConnectionForm(_random_smooth_connection(2, 4, rng, skew=True), 2, 4, label="random_metric_rank4")
    tm = ConnectionForm(_random_smooth_connection(2, 2, rng), 2, 2, label="random_tm")
    spaces = (
        SpaceSpec("general", TwistorSpace(general, const(I0))),
        SpaceSpec("metric", TwistorSpace(metric, const(I0), const(np.eye(4))), metric=True,
                  fiber_metric_const=np.eye(4)),
        SpaceSpec("tm", TwistorSpace(tm, const(I0)), tm=True),
    )
    chart = ChartSpec(-np.ones(2), np.ones(2), complex_dim=1)
    return GalleryCase(
        "complex_curve_any_connection", chart, {"I": const(I0), "g": const(np.eye(2))}, spaces,
        (
            _P("connection.one_one", 1e-9), _P("connection.holonomy", 1e-4),
            _P("twistor.j_squares", 1e-10), _P("twistor.projection_horizontal", 1e-8),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_C", 1e-5),
            _P("twistor.nijenhuis_T", 1e-5), _P("twistor.tensoriality", 1e-5),
            _P("twistor.bracket_projection", 1e-5), _P("twistor.phi_section", 1e-5),
            _P("twistor.jtaut_section", 1e-5), _P("grassmann.holomorphic", 1e-5),
            _P("grassmann.horizontal", 1e-7), _P("grassmann.isotropy", 1e-9),
        ),
        "complex curve base: every connection has (1,1) curvature",
    )


def _torus_base():
    chart = ChartSpec(-np.ones(4), np.ones(4), complex_dim=2)
    return chart, standard_acs(2)


def _alpha_form(x):
    """``alpha = sin(x1) dx2`` in the layout ``(x1, x2, y1, y2)``."""
    a = np.zeros(4)
    a[1] = np.sin(x[0])
    return a


def _alpha_derivative(x):
    d = np.zeros((4, 4))
    d[0, 1] = np.cos(x[0])
    return d


def _torus_control() -> GalleryCase:
    chart, I0 = _torus_base()
    E = _split_rotation(4, 0, 1)

    def fn(x):
        return np.einsum("k,ab->kab", _alpha_form(x), E)

    def dfn(x):
        return np.einsum("kl,ab->klab", _alpha_derivative(x), E)

    conn = ConnectionForm(fn, 4, 4, dfn=dfn, label="alpha_x_E")
    sp = TwistorSpace(conn, const(I0), const(np.eye(4)))
    witness_x = np.array([0.2, -0.1, 0.3, 0.1])
    witness_J = random_acs(2, np.random.default_rng(11), g=np.eye(4), scale=1.0)
    return GalleryCase(
        "torus_02_control", chart, {"I": const(I0), "g": const(np.eye(4)), "E": E,
                                    "witness_x": witness_x, "witness_J": witness_J},
        (SpaceSpec("metric", sp, metric=True, fiber_metric_const=np.eye(4)),),
        (
            _F("connection.r02_nonzero", 1e-2), _P("connection.metric", 1e-9),
            _P("twistor.nijenhuis_oracle", 1e-4), _F("twistor.nijenhuis_T_witness", 1e-2),
            _F("twistor.criterion_T_witness", 1e-2), _P("twistor.j_squares", 1e-10),
            _P("connection.holonomy", 1e-4),
        ),
        "flat base, connection sin(x1) dx2 (x) E with E a traceless rotation: trace-free R^{0,2}",
    )


def _scalar_loophole() -> GalleryCase:
    chart, I0 = _torus_base()
    one = np.eye(4)

    def fn(x):
        return np.einsum("k,ab->kab", _alpha_form(x), one)

    def dfn(x):
        return np.einsum("kl,ab->klab", _alpha_derivative(x), one)

    conn = ConnectionForm(fn, 4, 4, dfn=dfn, label="alpha_x_1")
    sp = TwistorSpace(conn, const(I0))
    ref = TwistorSpace(trivial_connection(4, 4), const(I0))
    return GalleryCase(
        "scalar_02_loophole", chart, {"I": const(I0), "reference": ref},
        (SpaceSpec("general", sp),),
        (
            _F("connection.r02_nonzero", 1e-2), _P("twistor.criterion_C", 1e-10),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_C", 1e-6),
            _P("twistor.central_twist_invariance", 1e-10), _P("twistor.j_squares", 1e-10),
        ),
        "connection sin(x1) dx2 (x) 1: R^{0,2} is a nonzero multiple of the identity",
    )


def fubini_study_metric(x):
    r2 = x[0] ** 2 + x[1] ** 2
    return 4.0 / (1.0 + r2) ** 2 * np.eye(2)


def _cp1() -> GalleryCase:
    I0 = standard_acs(1)
    g = fubini_study_metric
    lc = levi_civita(g, 2)
    ch = chern(g, I0, 2, 2)
    chart = ChartSpec(-np.ones(2), np.ones(2), complex_dim=1)
    sp = TwistorSpace(lc, const(I0), g)
    return GalleryCase(
        "cp1_fubini_study", chart, {"g": g, "I": const(I0), "levi_civita": lc, "chern": ch},
        (SpaceSpec("tm", sp, metric=True, fiber_metric_const=np.eye(2), tm=True),),
        (
            _P("connection.levi_civita_equals_chern", 1e-7), _P("connection.scalar_curvature", 1e-6),
            _P("connection.one_one", 1e-7), _P("connection.metric", 1e-7),
            _P("connection.torsion", 1e-9), _P("connection.chern_frame", 1e-7),
            _P("connection.holonomy", 1e-4), _P("twistor.nijenhuis_oracle", 1e-4),
            _P("twistor.nijenhuis_C", 1e-5), _P("twistor.nijenhuis_T", 1e-5),
            _P("twistor.phi_section", 1e-5), _P("twistor.jtaut_section", 1e-5),
            _P("grassmann.holomorphic", 1e-5), _P("grassmann.product_chart", 1e-6),
            _P("grassmann.isotropy", 1e-9),
        ),
        "round metric 4|dz|^2/(1+|z|^2)^2 on a chart of CP^1 (Kaehler)",
    )


def hopf_metric(x):
    return np.eye(4) / float(np.dot(x, x))


def hopf_fields():
    I0 = standard_acs(2)
    g = hopf_metric
    I = const(I0)

    def w(x):
        return fundamental_form(g(x), I0)

    def H(x):
        return neg_dc(w, I, x)

    lc = levi_civita(g, 4)
    plus, minus = bismut_pair(g, H, 4)
    ch = chern(g, I0, 4, 4)
    return {
        "g": g, "I": I, "w": w, "H": H, "levi_civita": lc, "chern": ch,
        "bismut_plus": plus, "bismut_minus": minus,
        "h_twisted_plus": h_twisted_chern(ch, g, I, H, +1.0),
        "h_twisted_minus": h_twisted_chern(ch, g, I, H, -1.0),
        "section_modified": section_modified(minus, I, 0.0, 0.5),
        "strata_connection": ch,
    }


def _hopf() -> GalleryCase:
    f = hopf_fields()
    chart = ChartSpec(np.array([0.5, -0.5, -0.5, -0.5]), np.array([1.5, 0.5, 0.5, 0.5]), complex_dim=2)
    sp = TwistorSpace(f["bismut_minus"], f["I"], f["g"])
    return GalleryCase(
        "hopf_skt", chart, f, (SpaceSpec("minus", sp, metric=True, fiber_metric_const=np.eye(4), tm=True),),
        (
            _P("calculus.dH", 1e-7), _P("calculus.h_type", 1e-9), _P("calculus.dd_zero", 1e-7),
            _P("connection.bismut_plus_I", 1e-6), _P("connection.bismut_metric", 1e-7),
            _P("connection.h_twist_sign", 1e-7), _P("connection.one_one", 1e-6),
            _P("connection.chern_one_one", 1e-7), _P("connection.h_twisted_metric", 1e-7),
            _P("connection.section_modified_parallel", 1e-6),
            _P("connection.section_modified_is_chern", 1e-6),
            _P("connection.section_modified_one_one", 1e-6),
            _P("connection.chern_frame", 1e-7),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_C", 1e-5),
            _P("twistor.nijenhuis_T", 1e-5), _P("twistor.holo_section_I", 1e-6),
            _F("twistor.holo_section_minus_I", 1e-2), _P("twistor.pseudoholo", 1e-6),
            _P("twistor.phi_section", 1e-6), _P("twistor.jtaut_section", 1e-5),
            _P("grassmann.holomorphic", 1e-5), _P("grassmann.horizontal", 1e-7),
            _P("grassmann.metric_change", 1e-7), _P("grassmann.isotropy", 1e-9),
            _P("grassmann.product_chart", 1e-6), _P("twistor.strata", 1e-8),
        ),
        "Hopf-type SKT metric |x|^{-2} delta on a chart of C^2 minus 0, H = -d^c w",
    )


def quaternionic_partner() -> np.ndarray:
    """Orthogonal complex structure on R^4 anticommuting with the standard one."""
    S = standard_acs(1)
    Z = np.zeros((2, 2))
    K = np.block([[S, Z], [Z, -S]])
    # reorder from (x1, y1, x2, y2) blocks to the split layout (x1, x2, y1, y2)
    perm = [0, 2, 1, 3]
    return K[np.ix_(perm, perm)]


def _hyperkahler() -> GalleryCase:
    Jp = standard_acs(2)
    Jm = quaternionic_partner()
    flat = trivial_connection(4, 4)
    chart = ChartSpec(-np.ones(4), np.ones(4), complex_dim=2)
    spaces = (
        SpaceSpec("plus", TwistorSpace(flat, const(Jp), const(np.eye(4))), metric=True,
                  fiber_metric_const=np.eye(4), tm=True),
        SpaceSpec("minus", TwistorSpace(flat, const(Jm), const(np.eye(4))), metric=True,
                  fiber_metric_const=np.eye(4), tm=True, center=Jm),
    )
    return GalleryCase(
        "flat_hyperkahler_bihermitian", chart,
        {"g": const(np.eye(4)), "J_plus": const(Jp), "J_minus": const(Jm), "H": const(np.zeros((4, 4, 4)))},
        spaces,
        (
            _P("connection.bihermitian_parallel", 1e-12), _P("calculus.nijenhuis_I", 1e-9),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_C", 1e-7),
            _P("twistor.nijenhuis_T", 1e-7), _P("twistor.holo_section_I", 1e-9),
            _P("twistor.pseudoholo", 1e-10),
        ),
        "flat R^4 with two anticommuting constant complex structures, H = 0",
    )


def _flat_r4_asd() -> GalleryCase:
    I0 = standard_acs(2)
    flat = trivial_connection(4, 4)
    chart = ChartSpec(-np.ones(4), np.ones(4), complex_dim=2)
    sp = TwistorSpace(flat, const(I0), const(np.eye(4)))
    return GalleryCase(
        "flat_r4_asd", chart, {"g": const(np.eye(4)), "I": const(I0)},
        (SpaceSpec("tplus", sp, metric=True, fiber_metric_const=np.eye(4), tm=True, center=I0),),
        (
            _P("calculus.asd_split", 1e-10), _P("connection.one_one", 1e-9),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_T", 1e-7),
            _P("twistor.jtaut_nijenhuis_tplus", 1e-6), _P("twistor.phi_section", 1e-8),
            _P("twistor.phi_section_taut", 1e-6), _P("twistor.jtaut_section", 1e-6),
            _P("twistor.jtaut_section_taut", 1e-6),
            _P("twistor.phi_modified_one_one", 1e-6), _P("twistor.strata", 1e-8),
        ),
        "flat R^4 with orientation from I; T+ carries J^(nabla,I) and J_taut",
    )


def fiber_complex_structure_field(chart: FiberChart):
    """``I_C`` on the fiber chart coordinates: ``sdot -> pinv(jac) (J jac sdot)``."""

    def I(s):
        J = chart(s)
        jac = chart.jacobian(s)
        flat = jac.reshape(len(jac), -1).T
        rotated = np.array([np.ravel(J @ B) for B in jac]).T
        return np.linalg.pinv(flat) @ rotated

    return I


def _twistor_over_vectorspace(n: int = 2) -> GalleryCase:
    J0 = standard_acs(n)
    base = FiberChart(J0)
    d = base.dim
    r = 2 * n
    IC = fiber_complex_structure_field(base)

    def phi_conn(s):
        J = base(s)
        jac = base.jacobian(s)
        return 0.5 * jac @ J

    conn = ConnectionForm(phi_conn, d, r, label="d+(1/2)(dphi)phi")
    sp = TwistorSpace(conn, IC)
    flat = TwistorSpace(trivial_connection(d, r), IC)
    chart = ChartSpec(-0.3 * np.ones(d), 0.3 * np.ones(d), samples=4)
    return GalleryCase(
        "twistor_over_vectorspace", chart,
        {"base_chart": base, "I": IC, "phi": base, "flat_space": flat, "n": n},
        (SpaceSpec("phi_connection", sp),),
        (
            _P("calculus.nijenhuis_I", 1e-7), _P("connection.one_one", 1e-7),
            _P("connection.phi_curvature", 1e-7), _P("connection.phi_parallel", 1e-8),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_C", 1e-5),
            _P("twistor.product_model", 1e-9),
        ),
        "base C(R^4) with I_C, trivial bundle with d + (1/2)(dphi)phi",
    )


EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def d_twist_fields(tau: float, g0=None):
    """Flat C^2 base, rank-4 bundle, constant ``D = tau D0`` and a smooth ``B``."""
    I0 = standard_acs(2)
    g0 = np.diag([1.0, 2.0, 1.0, 2.0]) if g0 is None else g0
    g = const(g0)
    ch = chern(g, I0, 4, 4)
    d0 = np.array([1.0 + 0.5j, -0.3 + 0.2j])

    def D(x):
        return tau * np.einsum("a,ij->aij", d0, EPS2)

    def B(x):
        z2 = x[1] + 1j * x[3]
        zb1 = x[0] - 1j * x[2]
        return (zb1 * z2 + x[0] ** 2) * EPS2

    def dbarB(x):
        z2 = x[1] + 1j * x[3]
        out = np.zeros((2, 2, 2), dtype=complex)
        out[0] = (z2 + x[0]) * EPS2
        return out

    def D_plus(x):
        return D(x) + dbarB(x)

    return {
        "g": g, "I": const(I0), "chern": ch, "D": D, "B": B, "dbarB": dbarB, "tau": tau, "d0": d0,
        "twisted": d_twisted(ch, g, D=D), "twisted_B": d_twisted(ch, g, D=D_plus),
    }


TAUS = (0.0, 0.5, 1.0, 2.0)


def _d_twist_family() -> GalleryCase:
    fams = {tau: d_twist_fields(tau) for tau in TAUS}
    f = fams[1.0]
    chart = ChartSpec(-np.ones(4), np.ones(4), complex_dim=2)
    sp = TwistorSpace(f["twisted_B"], f["I"], f["g"])
    return GalleryCase(
        "d_twist_family", chart, {"family": fams, "I": f["I"], "g": f["g"]},
        (SpaceSpec("twisted", sp, metric=True, fiber_metric_const=f["g"](None)),),
        (
            _P("connection.d_twisted_one_one", 1e-6), _P("connection.d_twisted_metric", 1e-9),
            _P("connection.d_twisted_skew", 1e-10), _P("connection.dbar_closed", 1e-8),
            _P("grassmann.cohomology_intertwiner", 1e-7), _P("grassmann.metric_change", 1e-7),
            _P("twistor.nijenhuis_oracle", 1e-4), _P("twistor.nijenhuis_T", 1e-5),
        ),
        "flat C^2 Hermitian bundle twisted by D(tau) = tau D0, with D0 + dbar B as the shifted class representative",
    )


_BUILDERS = {
    "flat_cn": _flat_cn,
    "complex_curve_any_connection": _complex_curve,
    "torus_02_control": _torus_control,
    "scalar_02_loophole": _scalar_loophole,
    "cp1_fubini_study": _cp1,
    "hopf_skt": _hopf,
    "flat_hyperkahler_bihermitian": _hyperkahler,
    "flat_r4_asd": _flat_r4_asd,
    "twistor_over_vectorspace": _twistor_over_vectorspace,
    "d_twist_family": _d_twist_family,
}

CASE_KEYS = tuple(_BUILDERS)


def build(key: str, **options) -> GalleryCase:
    """Construct the gallery case ``key`` (see :data:`CASE_KEYS`)."""
    try:
        builder = _BUILDERS[key]
    except KeyError:
        raise KeyError(f"unknown gallery case {key!r}; known: {', '.join(CASE_KEYS)}") from None
    return builder(**options)
