import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistorlab.chart_calculus import pq_decompose, wedge_1forms
from twistorlab.connections import (
    ConnectionForm,
    chern,
    curvature_components,
    h_twisted_chern,
    r02_components,
    trivial_connection,
)
from twistorlab.core_linalg import (
    TangencyError,
    random_acs,
    random_tangent,
    realify,
    skew_anticommutator_space,
    standard_acs,
)
from twistorlab.gallery import build, const
from twistorlab.grassmann_embed import transport_matrix
from twistorlab.twistor_total import (
    TotalChart,
    TwistorSpace,
    _span_residual,
    holo_section_check,
    integrability_criterion,
    integrability_report,
    jtaut_section_check,
    phi_section_check,
    pseudoholo_pm_I,
    relative_deviation,
    strata_dims,
    stratum_curves,
    stratum_invariance_residual,
    stratum_tangent_space,
    total_chart,
    unitary_directions,
)

I2 = standard_acs(2)
HOPF_X = np.array([0.9, 0.2, -0.1, 0.3])


@pytest.fixture(scope="module")
def hopf():
    return build("hopf_skt")


@pytest.fixture(scope="module")
def curve_case():
    return build("complex_curve_any_connection")


def _random_connection(m, r, seed=3):
    c = np.random.default_rng(seed).standard_normal((m, m, r, r)) * 0.3
    return ConnectionForm(lambda x: np.einsum("k,klab->lab", np.sin(x) + 0.5 * x, c), m, r)


# -- splitting and the two structures ------------------------------------------------------------


def test_horizontal_lift_has_zero_projection(rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    x = rng.standard_normal(4) * 0.3
    J = random_acs(2, rng)
    v = rng.standard_normal(4)
    xdot, Jdot = sp.horizontal_lift(x, J, v)
    assert np.max(np.abs(sp.vertical_projection(x, J, xdot, Jdot))) < 1e-12


def test_horizontal_lift_is_the_transport_velocity(rng):
    conn = _random_connection(4, 4)
    sp = TwistorSpace(conn, const(I2))
    x = np.array([0.1, -0.2, 0.3, 0.0])
    J = random_acs(2, rng)
    v = rng.standard_normal(4)

    def Jt(t):
        T = transport_matrix(conn, x, v, t, steps=64)
        return T @ J @ np.linalg.inv(T)

    def central(h):
        return (Jt(h) - Jt(-h)) / (2 * h)

    fd = (4 * central(5e-4) - central(1e-3)) / 3
    assert np.max(np.abs(sp.vertical_projection(x, J, v, fd, check=False))) < 1e-7
    assert np.allclose(fd, sp.horizontal_lift(x, J, v)[1], atol=1e-7)


def test_vertical_velocity_projects_to_itself(rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    J = random_acs(2, rng)
    A = random_tangent(J, rng)
    assert np.allclose(sp.vertical_projection(np.zeros(4), J, np.zeros(4), A), A)


def test_flat_projection_is_identity(rng):
    sp = TwistorSpace(trivial_connection(4, 4), const(I2))
    J = random_acs(2, rng)
    A = random_tangent(J, rng)
    assert np.array_equal(sp.vertical_projection(np.ones(4) * 0.2, J, rng.standard_normal(4), A), A)


def test_projection_rejects_non_tangent(rng):
    sp = TwistorSpace(trivial_connection(4, 4), const(I2))
    with pytest.raises(TangencyError):
        sp.vertical_projection(np.zeros(4), random_acs(2, rng), np.zeros(4), np.eye(4))


def test_j_twistor_rules(rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    x = np.zeros(4)
    J = random_acs(2, rng)
    v = rng.standard_normal(4)
    A = random_tangent(J, rng)
    v2, P2 = sp.j_twistor(x, J, v, np.zeros((4, 4)))
    assert np.allclose(v2, I2 @ v) and np.allclose(P2, 0)
    v2, P2 = sp.j_twistor(x, J, np.zeros(4), A)
    assert np.allclose(v2, 0) and np.allclose(P2, J @ A)


@pytest.mark.parametrize("kind", ["twistor", "taut"])
def test_structures_square_to_minus_one(kind, rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    x = 0.2 * rng.standard_normal(4)
    J = random_acs(2, rng)
    v = rng.standard_normal(4)
    A = random_tangent(J, rng)
    f = sp.structure(kind)
    v2, A2 = f(*(x, J) + f(x, J, v, A))
    assert np.allclose(v2, -v, atol=1e-10) and np.allclose(A2, -A, atol=1e-10)


def test_j_taut_rules_and_difference(rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    J = random_acs(2, rng)
    v = rng.standard_normal(4)
    A = random_tangent(J, rng)
    assert np.allclose(sp.j_taut(np.zeros(4), J, np.zeros(4), A)[1], J @ A)
    v2, _ = sp.j_taut(np.zeros(4), J, v, np.zeros((4, 4)))
    assert np.allclose(v2, J @ v)
    assert np.max(np.abs(v2 - sp.j_twistor(np.zeros(4), J, v, np.zeros((4, 4)))[0])) > 1e-3


def test_j_taut_needs_tangent_bundle(rng):
    sp = TwistorSpace(trivial_connection(2, 4), const(standard_acs(1)))
    with pytest.raises(ValueError):
        sp.j_taut(np.zeros(2), random_acs(2, rng), np.ones(2), np.zeros((4, 4)))


def test_unknown_structure():
    with pytest.raises(ValueError):
        TwistorSpace(trivial_connection(2, 2), const(standard_acs(1))).structure("other")


@pytest.mark.parametrize("kind", ["twistor", "taut"])
def test_structure_matrix_squares_to_minus_one(kind, rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    chart = TotalChart(sp, random_acs(2, rng))
    y = np.concatenate([0.1 * rng.standard_normal(4), 0.2 * rng.standard_normal(chart.fiber.dim)])
    K = chart.structure_matrix(y, kind)
    assert np.allclose(K @ K, -np.eye(chart.dim), atol=1e-9)


def test_total_chart_metric_mode_needs_point():
    sp = TwistorSpace(trivial_connection(4, 4), const(I2), const(np.eye(4)))
    with pytest.raises(ValueError):
        total_chart(sp, I2)
    assert total_chart(sp, I2, np.zeros(4)).fiber.dim == 2


def test_chart_coordinates_roundtrip(rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    chart = TotalChart(sp, random_acs(2, rng))
    y = np.concatenate([0.1 * rng.standard_normal(4), 0.2 * rng.standard_normal(chart.fiber.dim)])
    x, J = chart.point(y)
    assert np.allclose(chart.coords(x, J), y, atol=1e-10)
    ydot = rng.standard_normal(chart.dim)
    v, P = chart.coords_to_tangent(y, ydot)
    assert np.allclose(chart.tangent_to_coords(y, v, P), ydot, atol=1e-9)


# -- Nijenhuis: closed form and FD oracle -------------------------------------------------------------


def test_closed_form_vanishes_for_one_one(curve_case, rng):
    spec = curve_case.space("general")
    sp = spec.space
    x = np.array([0.1, -0.2])
    J = random_acs(2, rng)
    base, vert = sp.nijenhuis_closed_form(x, J, rng.standard_normal(2), rng.standard_normal(2))
    assert max(np.max(np.abs(base)), np.max(np.abs(vert))) < 1e-6


def test_closed_form_torus_witness():
    case = build("torus_02_control")
    sp = case.spaces[0].space
    x, J = case.fields["witness_x"], case.fields["witness_J"]
    E = np.eye(4)
    best = max(np.max(np.abs(sp.nijenhuis_closed_form(x, J, E[k], E[l])[1]))
               for k in range(4) for l in range(k + 1, 4))
    assert best >= 1e-2
    assert best == pytest.approx(0.3357662837309148, rel=1e-6)  # frozen regression


def test_closed_form_vertical_pair_vanishes(rng):
    sp = TwistorSpace(_random_connection(4, 4), const(I2))
    base, vert = sp.nijenhuis_closed_form(np.zeros(4), random_acs(2, rng), np.zeros(4), np.zeros(4))
    assert np.max(np.abs(vert)) == 0.0


def test_fd_oracle_flat(rng):
    sp = TwistorSpace(trivial_connection(4, 4), const(I2))
    chart = TotalChart(sp, random_acs(2, rng))
    y = np.concatenate([np.zeros(4), 0.2 * rng.standard_normal(chart.fiber.dim)])
    X, Y = rng.standard_normal(chart.dim), rng.standard_normal(chart.dim)
    base, vert = chart.nijenhuis_fd(y, X, Y)
    assert max(np.max(np.abs(base)), np.max(np.abs(vert))) < 1e-7


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fd_oracle_matches_closed_form_on_hopf(hopf, seed):
    rng = np.random.default_rng(seed)
    spec = hopf.space("minus")
    chart = TotalChart(spec.space, I2)
    y = np.concatenate([HOPF_X, 0.3 * rng.standard_normal(chart.fiber.dim)])
    X, Y = rng.standard_normal(chart.dim), rng.standard_normal(chart.dim)
    x, J = chart.point(y)
    fd = chart.nijenhuis_fd(y, X, Y)
    cf = spec.space.nijenhuis_closed_form(x, J, X[:4], Y[:4])
    assert relative_deviation(fd, cf) < 1e-5


def test_fd_oracle_detects_torus_failure():
    case = build("torus_02_control")
    sp = case.spaces[0].space
    chart = TotalChart(sp, case.fields["witness_J"], np.eye(4))
    y = np.concatenate([case.fields["witness_x"], np.zeros(chart.fiber.dim)])
    E = np.eye(chart.dim)
    x, J = chart.point(y)
    fd = chart.nijenhuis_fd(y, E[0], E[1])
    cf = sp.nijenhuis_closed_form(x, J, E[0][:4], E[1][:4])
    assert relative_deviation(fd, cf) < 1e-6
    assert np.max(np.abs(fd[1])) > 1e-2


def test_jtaut_flat_r4_integrable(rng):
    case = build("flat_r4_asd")
    spec = case.space("tplus")
    chart = TotalChart(spec.space, I2, np.eye(4))
    for _ in range(3):
        y = np.concatenate([0.3 * rng.standard_normal(4), 0.3 * rng.standard_normal(chart.fiber.dim)])
        base, vert = chart.nijenhuis_fd(y, rng.standard_normal(chart.dim), rng.standard_normal(chart.dim), "taut")
        assert max(np.max(np.abs(base)), np.max(np.abs(vert))) < 1e-6


# -- integrability criterion -------------------------------------------------------------------------


def test_criterion_zero_curvature(rng):
    assert integrability_criterion(np.zeros((4, 4, 4, 4)), random_acs(2, rng)) == 0.0


def test_criterion_scalar_loophole(rng):
    case = build("scalar_02_loophole")
    sp = case.spaces[0].space
    x = np.array([0.2, -0.1, 0.3, 0.1])
    rep = integrability_report(sp, x, [random_acs(2, rng, scale=1.0) for _ in range(10)])
    assert rep["r02"] > 1e-2
    assert rep["r02_trace_free"] < 1e-10
    assert max(rep["criterion"]) < 1e-10


def test_criterion_trace_free_metric_witness(rng):
    case = build("torus_02_control")
    sp = case.spaces[0].space
    x = case.fields["witness_x"]
    Js = [random_acs(2, rng, g=np.eye(4), scale=1.0) for _ in range(20)]
    rep = integrability_report(sp, x, Js)
    assert rep["r02_trace_free"] > 1e-2
    assert max(rep["criterion"]) > 1e-2
    R02 = r02_components(curvature_components(sp.conn, x), I2)
    assert integrability_criterion(R02, case.fields["witness_J"]) > 1e-2


# -- holomorphic sections ---------------------------------------------------------------------------------


def test_parallel_section_is_holomorphic():
    conn = trivial_connection(4, 4)
    J = random_acs(2, np.random.default_rng(5))
    assert max(holo_section_check(conn, const(I2), const(J), np.zeros(4))) < 1e-12


def test_hopf_sections(hopf):
    sp = hopf.space("minus").space
    plus, minus = pseudoholo_pm_I(sp.conn, sp.I, HOPF_X)
    assert plus < 1e-6
    assert minus >= 1e-2
    assert minus == pytest.approx(3.7894736842087777, rel=1e-6)  # frozen regression
    assert max(holo_section_check(sp.conn, sp.I, sp.I, HOPF_X)) < 1e-6


def _flat_c3_H(kind):
    e = np.eye(6)
    dz = [e[j] + 1j * e[3 + j] for j in range(3)]
    if kind == "30":
        return wedge_1forms(dz[0], dz[1], dz[2]).real
    if kind == "21":
        return wedge_1forms(dz[0], dz[1], dz[2].conj()).real
    return np.zeros((6, 6, 6))


@pytest.mark.parametrize("kind,expected_plus,expected_minus", [
    ("21", 0.0, None),
    ("30", None, 0.0),
    ("0", 0.0, 0.0),
])
@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_pseudoholomorphic_pm_I(kind, expected_plus, expected_minus, sign):
    I3 = standard_acs(3)
    H = _flat_c3_H(kind)
    parts = pq_decompose(H, I3)
    if kind == "30":
        assert np.max(np.abs(parts[(2, 1)])) < 1e-12
    if kind == "21":
        assert np.max(np.abs(parts[(3, 0)])) < 1e-12
    g = const(np.eye(6))
    ch = chern(g, I3, 6, 6)
    conn = h_twisted_chern(ch, g, const(I3), const(H), sign)
    plus, minus = pseudoholo_pm_I(conn, const(I3), np.full(6, 0.1))
    tol = 1e-10 if kind == "0" else 1e-6
    if expected_plus is not None:
        assert plus < tol
    else:
        assert plus > 1e-2
    if expected_minus is not None:
        assert minus < tol
    else:
        assert minus > 1e-2


def test_phi_section_flat(rng):
    sp = TwistorSpace(trivial_connection(4, 4), const(I2))
    chart = TotalChart(sp, random_acs(2, rng))
    y = np.concatenate([np.zeros(4), 0.2 * rng.standard_normal(chart.fiber.dim)])
    assert max(phi_section_check(chart, y)) < 1e-8


def test_phi_section_hopf(hopf, rng):
    chart = TotalChart(hopf.space("minus").space, I2, np.eye(4))
    y = np.concatenate([HOPF_X, 0.3 * rng.standard_normal(chart.fiber.dim)])
    assert max(phi_section_check(chart, y)) < 1e-6


def test_tautological_connection_curvature():
    # d + (1/2)(d phi) phi over a fiber chart has curvature -(1/4) d phi ^ d phi and is (1,1)
    case = build("twistor_over_vectorspace")
    base = case.fields["base_chart"]
    conn = case.spaces[0].space.conn
    s = np.full(base.dim, 0.1)
    R = curvature_components(conn, s)
    jac = base.jacobian(s)
    ref = -0.25 * (np.einsum("kab,lbc->klac", jac, jac) - np.einsum("lab,kbc->klac", jac, jac))
    assert np.max(np.abs(R - ref)) < 1e-8
    from twistorlab.connections import is_one_one

    assert is_one_one(conn, case.fields["I"], s) < 1e-8


def test_jtaut_section_complex_curve(curve_case, rng):
    spec = curve_case.space("tm")
    chart = TotalChart(spec.space, random_acs(1, rng))
    y = np.concatenate([np.array([0.1, 0.2]), 0.2 * rng.standard_normal(chart.fiber.dim)])
    assert jtaut_section_check(chart, y) < 1e-6


@pytest.mark.parametrize("kind", ["twistor", "taut"])
def test_jtaut_section_flat_r4(kind, rng):
    chart = TotalChart(build("flat_r4_asd").space("tplus").space, I2, np.eye(4))
    y = np.concatenate([0.2 * rng.standard_normal(4), 0.3 * rng.standard_normal(chart.fiber.dim)])
    assert jtaut_section_check(chart, y, kind) < 1e-6


def test_jtaut_section_hopf(hopf, rng):
    chart = TotalChart(hopf.space("minus").space, I2, np.eye(4))
    y = np.concatenate([HOPF_X, 0.3 * rng.standard_normal(chart.fiber.dim)])
    assert jtaut_section_check(chart, y) < 1e-5


def test_jtaut_section_needs_tangent_bundle(curve_case, rng):
    chart = TotalChart(curve_case.space("general").space, random_acs(2, rng))
    with pytest.raises(ValueError):
        jtaut_section_check(chart, np.zeros(chart.dim))


# -- kernel-dimension strata -------------------------------------------------------------------------------


def _stratum_sample(rng, signs_layout=(-1, -1, 1, 1), n=6):
    J1 = standard_acs(1)
    K = np.zeros((2 * n, 2 * n))
    for j, sgn in enumerate(signs_layout):
        K[np.ix_([j, n + j], [j, n + j])] = sgn * J1
    k = len(signs_layout)
    rest = list(range(k, n)) + list(range(n + k, 2 * n))
    K[np.ix_(rest, rest)] = random_acs(n - k, rng, g=np.eye(2 * (n - k)), scale=1.0)
    Q = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))[0]
    return realify(Q) @ K @ realify(Q).T


def _first_order_tangent_dim(K, J, signs):
    """Oracle: rank of the kernel-perturbation conditions L^T B R = 0 on T_K T."""
    from twistorlab.core_linalg import rank_kernel

    basis = skew_anticommutator_space(K, np.eye(len(K)))
    rows = []
    for s in signs:
        M = K + s * J
        _, R = rank_kernel(M)
        _, L = rank_kernel(M.T)
        rows.append(np.array([np.ravel(L.T @ B @ R) for B in basis]).T)
    C = np.vstack(rows)
    sv = np.linalg.svd(C, compute_uv=False)
    return len(basis) - int(np.sum(sv > 1e-8))


@pytest.mark.parametrize("signs", [(1,), (-1,), (1, -1)])
def test_stratum_tangent_matches_first_order_oracle(signs, rng):
    J = standard_acs(6)
    K = _stratum_sample(rng)
    assert strata_dims(K, J) == (4, 4)
    T = stratum_tangent_space(K, J, np.eye(12), signs)
    assert len(T) == _first_order_tangent_dim(K, J, signs)
    assert len(T) == 30 - 2 * len(signs)


@pytest.mark.parametrize("signs", [(1,), (-1,), (1, -1)])
def test_stratum_is_almost_complex(signs, rng):
    J = standard_acs(6)
    K = _stratum_sample(rng)
    assert stratum_invariance_residual(K, J, np.eye(12), signs) < 1e-10


@pytest.mark.parametrize("signs", [(1,), (-1,), (1, -1)])
def test_stratum_curves_keep_kernel_dimensions(signs, rng):
    J = standard_acs(6)
    K = _stratum_sample(rng)
    dims = strata_dims(K, J)
    idx = [0 if s > 0 else 1 for s in signs]
    T = stratum_tangent_space(K, J, np.eye(12), signs)
    for B, flow in stratum_curves(K, J, np.eye(12), signs, rng):
        assert _span_residual(T, [B]) < 1e-10
        h = 1e-6
        assert np.allclose((flow(h) - flow(-h)) / (2 * h), B, atol=1e-6)
        for t in (1e-2, -1e-2, 5e-3):
            moved = strata_dims(flow(t), J)
            assert all(moved[i] == dims[i] for i in idx)


def test_generic_directions_leave_the_stratum(rng):
    J = standard_acs(6)
    K = _stratum_sample(rng)
    g = np.eye(12)
    B = random_tangent(K, rng, g=g)
    # a random tangent is not in the stratum's tangent space, and the rank drops
    assert _span_residual(stratum_tangent_space(K, J, g, (1,)), [B]) > 1e-3
    from scipy.linalg import expm

    Kt = expm(0.005 * K @ B) @ K @ expm(-0.005 * K @ B)
    assert strata_dims(Kt, J)[0] < 4


def test_unitary_directions_dimension():
    J = standard_acs(3)
    X = unitary_directions(J, np.eye(6))
    assert len(X) == 9
    for M in X:
        assert np.allclose(M @ J, J @ M) and np.allclose(M, -M.T)


def test_opposite_component_generic_stratum_is_open(rng):
    # with one line of K = -J the kernel dimension 2 is generic: nothing is cut out
    J = standard_acs(4)
    K = _stratum_sample(rng, (-1,), n=4)
    assert strata_dims(K, J)[0] == 2
    assert len(stratum_tangent_space(K, J, np.eye(8), (1,))) == 12


def test_transport_preserves_strata(hopf, rng):
    conn = hopf.fields["strata_connection"]
    I = hopf.fields["I"]
    T = transport_matrix(conn, HOPF_X, np.array([0.1, -0.2, 0.1, 0.05]), 1.0)
    J0 = np.asarray(I(HOPF_X))
    assert np.allclose(T @ J0 @ np.linalg.inv(T), J0, atol=1e-9)
    for K in (-J0, J0, random_acs(2, rng, g=np.eye(4), scale=1.0)):
        assert strata_dims(T @ K @ np.linalg.inv(T), J0) == strata_dims(K, J0)


@given(st.integers(0, 2 ** 32 - 1))
def test_strata_dims_are_even(seed):
    rng = np.random.default_rng(seed)
    J = standard_acs(3)
    K = random_acs(3, rng, g=np.eye(6), scale=2.0)
    a, b = strata_dims(K, J)
    assert a % 2 == 0 and b % 2 == 0
