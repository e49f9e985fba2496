"""The Grassmann bundle ``Gr_n(E_C)`` and the embedding ``(x, J) -> E^{0,1}_J``.

Tangents of ``Gr_n(E_C)`` are split by the connection into a base vector
``v`` and a vertical graph-chart velocity ``B`` (a ``n x n`` complex
matrix in the chart :meth:`GraphChart.at` of the base plane).  A plane
``p(t)`` over ``x(t)`` has vertical part ``chart.velocity(p' + A(x') p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .chart_calculus import DEFAULT_STEP, fd_jacobian
from .connections import (
    ConnectionForm,
    dual_frame_01,
    holomorphic_frame_10,
    parallel_transport,
    segment,
    twist_block,
)
from .core_linalg import check_acs, eigenprojectors
from .twistor_fiber import GrassPoint, GraphChart, fiber_embed, isotropy_residual, plane_distance
from .twistor_total import TwistorSpace


@dataclass(frozen=True)
class GrassBundlePoint:
    x: np.ndarray
    P: GrassPoint


@dataclass(frozen=True)
class GrassTangent:
    v: np.ndarray
    B: np.ndarray


def grass_complex_structure(I, x, tangent: GrassTangent) -> GrassTangent:
    """``(v, B) -> (Iv, iB)``."""
    Ix = np.asarray(I(np.asarray(x, dtype=float)))
    return GrassTangent(Ix @ tangent.v, 1j * np.asarray(tangent.B))


def grass_parallel_transport(conn: ConnectionForm, P: GrassPoint | np.ndarray, x0, v, t: float = 1.0,
                             steps: int = 32) -> GrassPoint:
    """Transport a plane along ``x0 + s v``, ``s in [0, t]``, by transporting a basis."""
    basis = P.basis if isinstance(P, GrassPoint) else np.asarray(P, dtype=complex)
    path, dpath = segment(x0, v)
    return GrassPoint(parallel_transport(conn, path, dpath, basis.astype(complex), steps, 0.0, t))


def transport_matrix(conn: ConnectionForm, x0, v, t: float, steps: int = 32) -> np.ndarray:
    path, dpath = segment(x0, v)
    return parallel_transport(conn, path, dpath, np.eye(conn.rank), steps, 0.0, t)


def embed_total(x, J) -> GrassBundlePoint:
    return GrassBundlePoint(np.asarray(x, dtype=float), fiber_embed(J))


def _fiber_curve(J, Jdot):
    """``t -> exp(2tS) J`` with ``2 S J = Jdot``."""
    S = -0.5 * np.asarray(Jdot) @ np.asarray(J)
    return lambda t: expm(2 * t * S) @ J


def pushforward_fd(space: TwistorSpace, x, J, v, P, h: float = DEFAULT_STEP) -> GrassTangent:
    """``psi_*(v, P)`` in the Grassmann splitting, by finite differences.

    The curve is ``(x + t v, exp(2tS) J)`` with coordinate velocity matching
    ``(v, P)``; the plane is followed in the fixed-frame graph chart at
    ``psi(J)`` and the vertical part is ``B' + chart(A(v) p)``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    J = check_acs(J, tol=1e-10)
    _, Jdot = space.to_coordinates(x, J, v, P)
    curve = _fiber_curve(J, Jdot)
    chart = GraphChart.at(J)

    def coord(t):
        return chart.inverse(fiber_embed(curve(t)))

    def central(step):
        return (coord(step) - coord(-step)) / (2 * step)

    Bdot = (4 * central(h / 2) - central(h)) / 3
    Av = space.conn.along(x, v)
    return GrassTangent(v, Bdot + chart.velocity(Av @ chart.anchor))


def pushforward_closed_form(space: TwistorSpace, x, J, v, P) -> GrassTangent:
    """Horizontal to horizontal, vertical ``P`` to ``chart((i/2) P p)``."""
    chart = GraphChart.at(J)
    return GrassTangent(np.asarray(v, dtype=float), chart.velocity(0.5j * np.asarray(P) @ chart.anchor))


def holomorphicity_residual(space: TwistorSpace, x, J, v, P, h: float = DEFAULT_STEP) -> float:
    """``|psi_*(J^(nabla,I) X) - J_Gr psi_*(X)|`` with FD pushforwards."""
    x = np.asarray(x, dtype=float)
    v2, P2 = space.j_twistor(x, J, v, P)
    lhs = pushforward_fd(space, x, J, v2, P2, h)
    rhs = grass_complex_structure(space.I, x, pushforward_fd(space, x, J, v, P, h))
    return float(max(np.max(np.abs(lhs.v - rhs.v)), np.max(np.abs(lhs.B - rhs.B))))


def horizontal_preservation_residual(space: TwistorSpace, x, J, v, t: float = 0.2, steps: int = 64) -> float:
    """Principal-angle distance between ``T psi(J)`` and ``psi(T J T^{-1})``."""
    T = transport_matrix(space.conn, x, v, t, steps)
    P_transported = grass_parallel_transport(space.conn, fiber_embed(J), x, v, t, steps)
    J_transported = T @ J @ np.linalg.inv(T)
    return plane_distance(P_transported, fiber_embed(J_transported))


def maximal_isotropic_residual(J, g) -> float:
    return isotropy_residual(fiber_embed(J), g)


def product_chart_residual(space: TwistorSpace, frame, x, P: GrassPoint, v, B,
                           h: float = DEFAULT_STEP, steps: int = 16) -> float:
    """Holomorphicity of the product chart defined by a holomorphic frame ``F(x)`` of ``E_C``.

    The chart sends ``(x, plane)`` to ``(x, graph coordinates of F(x)^{-1} plane)``.
    Along the Grassmann tangent ``X = (v, B)`` and along ``J_Gr X`` the chart
    velocities are computed by FD; holomorphicity means the second equals
    ``(I v, i * first)``.
    """
    x = np.asarray(x, dtype=float)
    p = P.basis
    q = p.conj()
    F0inv = np.linalg.inv(frame(x))
    target = GraphChart(F0inv @ p, F0inv @ q)

    def velocity(vv, BB):
        def coord(t):
            plane = p + t * (q @ BB)
            moved = grass_parallel_transport(space.conn, plane, x, vv, t, steps) if t != 0 else GrassPoint(plane)
            F = frame(x + t * vv)
            return target.inverse(np.linalg.solve(F, moved.basis))

        def central(step):
            return (coord(step) - coord(-step)) / (2 * step)

        return (4 * central(h / 2) - central(h)) / 3

    Ix = np.asarray(space.I(x))
    d1 = velocity(np.asarray(v, dtype=float), np.asarray(B))
    d2 = velocity(Ix @ v, 1j * np.asarray(B))
    return float(np.max(np.abs(d2 - 1j * d1)))


# ---------------------------------------------------------------------------
# intertwiners


def dbar_operator_residual(frame_conn, section, I_base, x, h: float = DEFAULT_STEP) -> float:
    """``max_k |D_{pi01 e_k} s + A^{0,1}(e_k) s|`` for a complex section ``s``.

    ``frame_conn(x, u)`` returns the complex connection matrix on ``E_C``
    evaluated on the complex vector ``u``.
    """
    x = np.asarray(x, dtype=float)
    _, P01 = eigenprojectors(check_acs(I_base))
    ds = fd_jacobian(section, x, h)
    s = section(x)
    worst = 0.0
    for k in range(x.size):
        u = P01[:, k]
        val = np.tensordot(u, ds, axes=1) + frame_conn(x, u) @ s
        worst = max(worst, float(np.max(np.abs(val))))
    return worst


def twisted_dbar(chern_conn: ConnectionForm, g, D=None, n: int | None = None):
    """``(x, u) -> A^Ch(u) + g^{-1} D(u)`` on ``E_C`` for complex ``u`` (``D`` as in :func:`d_twisted`)."""
    n = chern_conn.rank // 2 if n is None else n
    nb = chern_conn.dim // 2

    def op(x, u):
        A = np.tensordot(u, chern_conn(x), axes=1)
        if D is None:
            return A
        Dx = np.asarray(D(x))
        gx = np.asarray(g(x))
        c = u[:nb] - 1j * u[nb:]
        return A + sum(c[a] * twist_block(gx, n, D=Dx[a]) for a in range(nb))

    return op


def g_inverse_B(g, B, n: int) -> np.ndarray:
    """The endomorphism ``g^{-1}B`` of ``E_C`` for ``B in Lambda^2 E^{*1,0}``."""
    return twist_block(g, n, D=B)


def cohomology_intertwiner(chern_conn: ConnectionForm, g, D, B, dbarB, section, I_base, x,
                           n: int | None = None, h: float = DEFAULT_STEP) -> dict:
    """Residuals for ``exp(-g^{-1}B)`` intertwining two twisted dbar-operators.

    ``section`` must satisfy ``(nabla^{Ch(0,1)} + g^{-1}D) v = 0``; the
    returned ``intertwiner`` residual measures
    ``(nabla^{Ch(0,1)} + g^{-1}(D + dbar B)) (1 - g^{-1}B) v``.  Also
    reported: the holomorphicity of ``v`` itself, ``|(g^{-1}B)^2|`` and the
    ``g_C``-orthogonality of ``exp(-g^{-1}B) = 1 - g^{-1}B``.
    """
    n = chern_conn.rank // 2 if n is None else n
    x = np.asarray(x, dtype=float)
    op0 = twisted_dbar(chern_conn, g, D, n)

    def D_plus(y):
        return np.asarray(D(y)) + np.asarray(dbarB(y))

    op1 = twisted_dbar(chern_conn, g, D_plus, n)

    def gB(y):
        return g_inverse_B(g(y), B(y), n)

    def moved(y):
        return (np.eye(chern_conn.rank) - gB(y)) @ section(y)

    M = gB(x)
    gx = np.asarray(g(x))
    E = np.eye(chern_conn.rank) - M
    return {
        "section_holomorphic": dbar_operator_residual(op0, section, I_base, x, h),
        "intertwiner": dbar_operator_residual(op1, moved, I_base, x, h),
        "nilpotency": float(np.max(np.abs(M @ M))),
        "orthogonality": float(np.max(np.abs(E.T @ gx @ E - gx))),
    }


def metric_change_map(g, g2, J) -> np.ndarray:
    """``v10 + v01 -> v10 + g2^{-1} g v01`` on ``E_C``."""
    P10, P01 = eigenprojectors(check_acs(J))
    g = np.asarray(g)
    g2 = np.asarray(g2)
    for gg in (g, g2):
        if np.max(np.abs(J.T @ gg @ J - gg)) > 1e-10 * max(1.0, np.max(np.abs(gg))):
            raise ValueError("metric is not compatible with J")
    return P10 + np.linalg.solve(g2, g) @ P01


def metric_change_residuals(g, g2, J, dbar1=None, dbar2=None, I_base=None, x=None,
                            h: float = DEFAULT_STEP, planes=()) -> dict:
    """Orthogonality, dbar-intertwining and isotropy preservation of :func:`metric_change_map`.

    ``g`` and ``g2`` are metric fields; ``dbar1`` / ``dbar2`` are operators as
    returned by :func:`twisted_dbar` for the two metrics.
    """
    x = np.asarray(x, dtype=float)
    M = metric_change_map(g(x), g2(x), J)
    out = {"orthogonality": float(np.max(np.abs(M.T @ g2(x) @ M - g(x))))}
    if dbar1 is not None:
        _, P01 = eigenprojectors(check_acs(I_base))

        def Mf(y):
            return metric_change_map(g(y), g2(y), J)

        dM = fd_jacobian(Mf, x, h)
        worst = 0.0
        for k in range(x.size):
            u = P01[:, k]
            val = np.tensordot(u, dM, axes=1) + dbar2(x, u) @ M - M @ dbar1(x, u)
            worst = max(worst, float(np.max(np.abs(val))))
        out["intertwining"] = worst
    iso = 0.0
    for Pl in planes:
        iso = max(iso, isotropy_residual(GrassPoint(M @ Pl.basis), g2(x)))
    out["isotropy"] = iso
    return out


def holomorphic_frame_EC(g, n: int):
    """Holomorphic frame ``{e_i, g^{-1} e^i}`` of ``E_C`` for the Chern structure."""
    E = holomorphic_frame_10(n)
    return lambda x: np.hstack([E, dual_frame_01(g(x), n)])
