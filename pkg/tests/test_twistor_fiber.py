import numpy as np
import pytest
from hypothesis import given, strategies as st

from twistorlab.core_linalg import (
    TangencyError,
    conjugation_flow,
    random_acs,
    random_tangent,
    standard_acs,
)
from twistorlab.twistor_fiber import (
    ChartDomainError,
    FiberChart,
    GrassPoint,
    GraphChart,
    acs_from_plane,
    fiber_embed,
    fiber_embed_pushforward,
    fiber_embed_pushforward_fd,
    holomorphicity_residual,
    is_transverse,
    isotropy_residual,
    map_in_chart,
    plane_distance,
    vertical_complex_structure,
)

J0 = standard_acs(1)


# -- fiber charts ---------------------------------------------------------------


@pytest.mark.parametrize("n,metric", [(1, False), (2, False), (2, True), (3, True)])
def test_fiber_chart_roundtrip(n, metric, rng):
    g = np.eye(2 * n) if metric else None
    chart = FiberChart(random_acs(n, rng, g=g), g)
    s = 0.3 * rng.standard_normal(chart.dim)
    J = chart(s)
    assert np.allclose(J @ J, -np.eye(2 * n), atol=1e-12)
    if metric:
        assert np.allclose(J.T @ J, np.eye(2 * n), atol=1e-12)
    assert np.allclose(chart.inverse(J), s, atol=1e-10)


def test_fiber_chart_jacobian_matches_fd(rng):
    chart = FiberChart(random_acs(2, rng))
    s = 0.2 * rng.standard_normal(chart.dim)
    jac = chart.jacobian(s)
    h = 1e-5
    for a in range(chart.dim):
        e = np.zeros(chart.dim)
        e[a] = h
        fd = (chart(s + e) - chart(s - e)) / (2 * h)
        assert np.allclose(jac[a], fd, atol=1e-8)


def test_fiber_chart_rejects_opposite_structure():
    chart = FiberChart(standard_acs(2))
    with pytest.raises(ChartDomainError):
        chart.inverse(-standard_acs(2))


def test_metric_fiber_n1_is_a_point():
    chart = FiberChart(J0, np.eye(2))
    assert chart.dim == 0
    assert np.array_equal(chart(np.zeros(0)), J0)


# -- vertical complex structure -------------------------------------------------------


def test_vertical_structure_n1():
    A = np.diag([1.0, -1.0])
    assert np.allclose(vertical_complex_structure(J0, A), [[0, 1], [1, 0]])


def test_vertical_structure_squares_to_minus_one(rng):
    for _ in range(100):
        J = random_acs(2, rng)
        A = random_tangent(J, rng)
        IA = vertical_complex_structure(J, A)
        assert np.allclose(vertical_complex_structure(J, IA), -A, atol=1e-10)


@given(st.integers(0, 2 ** 32 - 1))
def test_vertical_structure_preserves_metric_tangents(seed):
    rng = np.random.default_rng(seed)
    g = np.diag(rng.uniform(0.5, 2.0, 4))
    J = random_acs(2, rng, g=g)
    A = random_tangent(J, rng, g=g)
    IA = vertical_complex_structure(J, A)
    # g-skew: (JA)^T g + g (JA) = 0
    assert np.allclose(IA.T @ g + g @ IA, 0, atol=1e-10)


def test_vertical_structure_rejects_non_tangent():
    with pytest.raises(TangencyError):
        vertical_complex_structure(J0, np.eye(2))


# -- fiber embedding -------------------------------------------------------------------


def test_fiber_embed_n1_standard():
    # J0 v = -i v is solved by v = (1, i)
    assert plane_distance(fiber_embed(J0), np.array([[1.0], [1j]])) < 1e-12


def test_fiber_embed_n1_transposed_convention():
    assert plane_distance(fiber_embed(J0.T), np.array([[1.0], [-1j]])) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fiber_embed_is_transverse(n, rng):
    P = fiber_embed(random_acs(n, rng))
    assert np.linalg.matrix_rank(np.hstack([P.basis, P.basis.conj()])) == 2 * n
    assert is_transverse(P)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fiber_embed_metric_image_isotropic(n, rng):
    g = np.diag(rng.uniform(0.5, 2.0, 2 * n))
    P = fiber_embed(random_acs(n, rng, g=g))
    assert isotropy_residual(P, g) < 1e-12


def test_fiber_embed_general_not_isotropic(rng):
    P = fiber_embed(random_acs(2, rng, scale=1.0))
    assert isotropy_residual(P, np.eye(4)) > 1e-3


@pytest.mark.parametrize("n", [1, 2, 3])
def test_plane_to_structure_roundtrip(n, rng):
    J = random_acs(n, rng)
    assert np.allclose(acs_from_plane(fiber_embed(J)), J, atol=1e-9)


def test_every_transverse_plane_is_hit_once(rng):
    for _ in range(10):
        P = GrassPoint(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
        assert is_transverse(P)
        J = acs_from_plane(P)
        assert np.allclose(J @ J, -np.eye(4), atol=1e-9)
        assert fiber_embed(J).distance(P) < 1e-9


def test_real_plane_is_not_in_the_image():
    with pytest.raises(ChartDomainError):
        acs_from_plane(GrassPoint(np.eye(4)[:, :2].astype(complex)))


def test_fiber_embed_injective(rng):
    J = random_acs(2, rng)
    for _ in range(10):
        K = random_acs(2, rng)
        assert fiber_embed(J).distance(fiber_embed(K)) > 1e-6


def test_plane_distance_basis_independent(rng):
    P = fiber_embed(random_acs(2, rng))
    G = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    assert plane_distance(P, P.basis @ G) < 1e-7


# -- graph charts -------------------------------------------------------------------------


def test_graph_chart_zero_is_anchor(rng):
    J = random_acs(2, rng)
    chart = GraphChart.at(J)
    assert chart(np.zeros((2, 2))).distance(fiber_embed(J)) < 1e-12


def test_graph_chart_roundtrip(rng):
    chart = GraphChart.at(random_acs(2, rng))
    B = 0.2 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    assert np.allclose(chart.inverse(chart(B)), B, atol=1e-12)


def test_graph_chart_rejects_non_transverse_plane(rng):
    chart = GraphChart.at(random_acs(2, rng))
    with pytest.raises(ChartDomainError):
        chart.inverse(GrassPoint(chart.complement))


def test_graph_chart_rejects_degenerate_anchor():
    p = np.eye(4)[:, :2].astype(complex)
    with pytest.raises(ChartDomainError):
        GraphChart(p, p)


# -- pushforward ----------------------------------------------------------------------------


def test_pushforward_zero_velocity(rng):
    J = random_acs(2, rng)
    assert np.allclose(fiber_embed_pushforward(J, np.zeros((4, 4))), 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_pushforward_matches_fd(n, rng):
    J = random_acs(n, rng)
    A = random_tangent(J, rng)
    assert np.max(np.abs(fiber_embed_pushforward(J, A) - fiber_embed_pushforward_fd(J, A))) < 1e-8


def test_pushforward_minus_half_law_n1():
    A0 = np.diag([1.0, -1.0])
    closed = fiber_embed_pushforward(J0, J0 @ A0)
    assert np.allclose(closed, -0.5 * map_in_chart(J0, A0))
    # FD of t -> exp(-t A0/2) V^{0,1} exp(t A0/2), which has velocity J0 A0

    chart = GraphChart.at(J0)

    def coord(t):
        return chart.inverse(fiber_embed(conjugation_flow(J0, A0, t)))

    h = 1e-3
    c1 = (coord(h) - coord(-h)) / (2 * h)
    c2 = (coord(h / 2) - coord(-h / 2)) / h
    assert np.allclose((4 * c2 - c1) / 3, closed, atol=1e-9)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
def test_pushforward_is_holomorphic(seed, n):
    rng = np.random.default_rng(seed)
    J = random_acs(n, rng)
    A = random_tangent(J, rng)
    assert holomorphicity_residual(J, A) < 1e-8


def test_pushforward_fd_holomorphic(rng):
    J = random_acs(2, rng)
    A = random_tangent(J, rng)
    lhs = fiber_embed_pushforward_fd(J, J @ A)
    rhs = 1j * fiber_embed_pushforward_fd(J, A)
    assert np.max(np.abs(lhs - rhs)) < 1e-8
