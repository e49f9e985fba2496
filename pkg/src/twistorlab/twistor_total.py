"""Total spaces C(E) and T(E, g) over a chart, their almost complex structures,
and the integrability / holomorphic-section machinery.

A point is ``(x, J)`` with ``J`` a complex structure on the fiber ``E_x``.
Tangents are written either in chart coordinates ``(xdot, Jdot)`` or in the
splitting ``V + H`` determined by the connection as ``(v, P)`` with

    P = Jdot + [A(xdot), J]          (covariant derivative of the tautological section)

so a horizontal lift of ``v`` has ``Jdot = -[A(v), J]``.  The two structures
are

    J^(nabla, I): (v, P) -> (I v, J P),
    J_taut:       (v, P) -> (J v, J P)          (E = TM only).

For the finite-difference Nijenhuis oracle the total space is covered by a
:class:`TotalChart` with coordinates ``y = (x, s)``, ``J = exp(2S(s)) J0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .chart_calculus import (
    DEFAULT_STEP,
    constant_field,
    fd_directional,
    fd_jacobian,
    nijenhuis,
    nijenhuis_I,
)
from .connections import (
    ConnectionForm,
    curvature_components,
    r02_components,
)
from .core_linalg import (
    AlgebraError,
    TangencyError,
    anticommutator,
    anticommutator_space,
    _matrix_space_kernel,
    check_acs,
    column_space,
    commutator,
    eigenprojectors,
    rank_kernel,
    skew_anticommutator_space,
)
from .twistor_fiber import FiberChart


# ---------------------------------------------------------------------------
# points, tangents and the two structures


@dataclass(frozen=True)
class TwistorPoint:
    x: np.ndarray
    J: np.ndarray
    metric: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        J = check_acs(self.J, tol=1e-10)
        object.__setattr__(self, "J", J)
        if self.metric is not None:
            g = np.asarray(self.metric, dtype=float)
            if np.max(np.abs(J.T @ g @ J - g)) > 1e-10 * max(1.0, np.max(np.abs(g))):
                raise AlgebraError("J is not orthogonal for the fiber metric")

    @property
    def mode(self) -> str:
        return "general" if self.metric is None else "metric"


@dataclass(frozen=True)
class TwistorTangent:
    """Tangent ``(v, P)`` in the ``H + V`` splitting at a :class:`TwistorPoint`."""

    v: np.ndarray
    P: np.ndarray

    def check(self, point: TwistorPoint, tol: float = 1e-10) -> "TwistorTangent":
        res = np.max(np.abs(anticommutator(self.P, point.J)))
        if res > tol * max(1.0, np.max(np.abs(self.P))) * max(1.0, np.max(np.abs(point.J))):
            raise TangencyError(f"vertical part does not anticommute with J ({res:.2e})")
        if point.metric is not None:
            g = point.metric
            res = np.max(np.abs(self.P.T @ g + g @ self.P))
            if res > tol * max(1.0, np.max(np.abs(self.P))) * max(1.0, np.max(np.abs(g))):
                raise TangencyError("vertical part is not g-skew")
        return self


@dataclass(frozen=True)
class TwistorSpace:
    """``C(E)`` (or ``T(E, g)`` when ``metric`` is given) with a connection and base structure.

    Parameters
    ----------
    conn : ConnectionForm
    I : callable
        Base almost complex structure field ``x -> (m, m)``.
    metric : callable, optional
        Fiber metric field ``x -> (r, r)``; selects the metric twistor space.
    """

    conn: ConnectionForm
    I: object
    metric: object = None
    h: float = DEFAULT_STEP

    @property
    def m(self) -> int:
        return self.conn.dim

    @property
    def r(self) -> int:
        return self.conn.rank

    def point(self, x, J) -> TwistorPoint:
        g = None if self.metric is None else self.metric(np.asarray(x, dtype=float))
        return TwistorPoint(x, J, g)

    def vertical_projection(self, x, J, xdot, Jdot, check: bool = True) -> np.ndarray:
        J = np.asarray(J)
        Jdot = np.asarray(Jdot)
        if check:
            res = np.max(np.abs(anticommutator(Jdot, J)))
            if res > 1e-8 * max(1.0, np.max(np.abs(Jdot))) * max(1.0, np.max(np.abs(J))):
                raise TangencyError(f"(xdot, Jdot) is not tangent to C(E) ({res:.2e})")
        return Jdot + commutator(self.conn.along(x, xdot), J)

    def horizontal_lift(self, x, J, v) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate velocity ``(v, -[A(v), J])`` of the horizontal lift of ``v``."""
        return np.asarray(v, dtype=float), -commutator(self.conn.along(x, v), np.asarray(J))

    def to_coordinates(self, x, J, v, P) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(v, dtype=float), np.asarray(P) - commutator(self.conn.along(x, v), np.asarray(J))

    def j_twistor(self, x, J, v, P) -> tuple[np.ndarray, np.ndarray]:
        """``J^(nabla, I)`` in the splitting."""
        return np.asarray(self.I(np.asarray(x, dtype=float))) @ v, np.asarray(J) @ P

    def j_taut(self, x, J, v, P) -> tuple[np.ndarray, np.ndarray]:
        """``J_taut`` in the splitting; needs ``E = TM`` in the coordinate frame."""
        if self.r != self.m:
            raise ValueError(f"J_taut needs fiber rank equal to base dimension ({self.r} != {self.m})")
        J = np.asarray(J)
        return J @ v, J @ P

    def structure(self, kind: str):
        if kind == "twistor":
            return self.j_twistor
        if kind == "taut":
            return self.j_taut
        raise ValueError(f"unknown structure {kind!r}")

    def apply_in_coordinates(self, kind: str, x, J, xdot, Jdot):
        """Apply a structure to a coordinate velocity and return a coordinate velocity."""
        P = self.vertical_projection(x, J, xdot, Jdot, check=False)
        v2, P2 = self.structure(kind)(x, J, xdot, P)
        return self.to_coordinates(x, J, v2, P2)

    # closed-form Nijenhuis tensor ------------------------------------------------

    def nijenhuis_closed_form(self, x, J, v, w, R=None):
        """``(N^I(v, w), [R(v,w) - R(Iv,Iw), J] + J [R(Iv,w) + R(v,Iw), J])``."""
        x = np.asarray(x, dtype=float)
        J = np.asarray(J)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        R = curvature_components(self.conn, x, self.h) if R is None else R
        Ix = np.asarray(self.I(x))

        def Rf(a, b):
            return np.einsum("k,l,klpq->pq", a, b, R)

        base = nijenhuis_I(self.I, x, v, w, self.h)
        vert = commutator(Rf(v, w) - Rf(Ix @ v, Ix @ w), J) + J @ commutator(Rf(Ix @ v, w) + Rf(v, Ix @ w), J)
        return base, vert


# ---------------------------------------------------------------------------
# total chart


@dataclass(frozen=True)
class TotalChart:
    """Coordinates ``y = (x, s)`` on ``C(E)`` (or ``T(E, g)`` for a constant metric).

    The fiber part is a :class:`FiberChart` around ``center``.
    """

    space: TwistorSpace
    center: np.ndarray
    fiber_metric: np.ndarray | None = None
    fiber: FiberChart = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fiber", FiberChart(self.center, self.fiber_metric))

    @property
    def dim(self) -> int:
        return self.space.m + self.fiber.dim

    def split(self, y):
        y = np.asarray(y, dtype=float)
        return y[: self.space.m], y[self.space.m:]

    def J(self, y) -> np.ndarray:
        _, s = self.split(y)
        return self.fiber(s)

    def point(self, y):
        x, s = self.split(y)
        return x, self.fiber(s)

    def coords(self, x, J) -> np.ndarray:
        return np.concatenate([np.asarray(x, dtype=float), self.fiber.inverse(J)])

    def _jac_flat(self, s):
        jac = self.fiber.jacobian(s)
        return jac.reshape(jac.shape[0], -1 if jac.shape[0] else self.center.size).T

    def push(self, y, ydot):
        """Coordinate velocity ``ydot -> (xdot, Jdot)``."""
        x, s = self.split(y)
        m = self.space.m
        jac = self.fiber.jacobian(s)
        return np.asarray(ydot[:m], dtype=float), np.tensordot(ydot[m:], jac, axes=1)

    def pull(self, y, xdot, Jdot) -> np.ndarray:
        """Inverse of :meth:`push` (least squares onto the chart tangent space)."""
        _, s = self.split(y)
        Jf = self._jac_flat(s)
        sdot, *_ = np.linalg.lstsq(Jf, np.ravel(Jdot), rcond=None)
        return np.concatenate([np.asarray(xdot, dtype=float), sdot])

    def structure_matrix(self, y, kind: str = "twistor") -> np.ndarray:
        """Matrix of the chosen almost complex structure in chart coordinates."""
        x, s = self.split(y)
        J = self.fiber(s)
        jac = self.fiber.jacobian(s)
        Jf = jac.reshape(jac.shape[0], -1 if jac.shape[0] else self.center.size).T
        m = self.space.m
        pinv = np.linalg.pinv(Jf)
        A = self.space.conn(x)
        if kind == "twistor":
            base = np.asarray(self.space.I(x))
        elif kind == "taut":
            if self.space.r != m:
                raise ValueError("J_taut needs fiber rank equal to base dimension")
            base = J
        else:
            raise ValueError(f"unknown structure {kind!r}")
        K = np.empty((self.dim, self.dim))
        for i in range(self.dim):
            if i < m:
                xdot = np.eye(m)[i]
                Jdot = np.zeros_like(J)
            else:
                xdot = np.zeros(m)
                Jdot = jac[i - m]
            P = Jdot + commutator(np.tensordot(xdot, A, axes=1), J)
            v2 = base @ xdot
            Jd2 = J @ P - commutator(np.tensordot(v2, A, axes=1), J)
            K[:m, i] = v2
            K[m:, i] = pinv @ np.ravel(Jd2)
        return K

    def tangent_to_coords(self, y, v, P) -> np.ndarray:
        x, J = self.point(y)
        xdot, Jdot = self.space.to_coordinates(x, J, v, P)
        return self.pull(y, xdot, Jdot)

    def coords_to_tangent(self, y, ydot):
        x, J = self.point(y)
        xdot, Jdot = self.push(y, ydot)
        return xdot, self.space.vertical_projection(x, J, xdot, Jdot, check=False)

    def nijenhuis_fd(self, y, X, Y, kind: str = "twistor", h: float | None = None, fields=None):
        """FD-bracket Nijenhuis tensor at ``y`` returned in the splitting ``(base, vertical)``.

        ``X`` and ``Y`` are chart coordinate vectors extended as constant
        fields unless ``fields`` supplies other extensions.
        """
        h = self.space.h if h is None else h
        y = np.asarray(y, dtype=float)
        Xf, Yf = fields if fields is not None else (constant_field(X), constant_field(Y))
        N = nijenhuis(lambda p: self.structure_matrix(p, kind), Xf, Yf, y, h)
        return self.coords_to_tangent(y, N)

    # pulled-back geometry ----------------------------------------------------------

    def pullback_connection(self, y) -> np.ndarray:
        """``(pi^* A)(e_i)`` for every chart direction: ``A(e_i)`` on base directions, 0 on fiber ones."""
        x, _ = self.split(y)
        A = self.space.conn(x)
        out = np.zeros((self.dim,) + A.shape[1:])
        out[: self.space.m] = A
        return out

    def projection_P(self, y) -> np.ndarray:
        """``P(e_i) = (pi^* nabla)_{e_i} phi`` for every chart direction."""
        x, s = self.split(y)
        J = self.fiber(s)
        jac = self.fiber.jacobian(s)
        A = self.pullback_connection(y)
        out = np.empty_like(A)
        m = self.space.m
        for i in range(self.dim):
            dphi = np.zeros_like(J) if i < m else jac[i - m]
            out[i] = dphi + commutator(A[i], J)
        return out

    def vertical_basis(self, y) -> np.ndarray:
        x, J = self.point(y)
        if self.fiber_metric is None:
            return anticommutator_space(J)
        return skew_anticommutator_space(J, self.fiber_metric)


def total_chart(space: TwistorSpace, J0, x0=None) -> TotalChart:
    """Chart of ``C(E)``, or of ``T(E, g)`` when ``space.metric`` is constant."""
    g = None
    if space.metric is not None:
        if x0 is None:
            raise ValueError("metric mode needs a reference point to read the fiber metric")
        g = np.asarray(space.metric(np.asarray(x0, dtype=float)))
    return TotalChart(space, J0, g)


# ---------------------------------------------------------------------------
# integrability


def relative_deviation(a, b) -> float:
    """``|a - b| / max(|b|, 1)`` in the max norm over concatenated parts."""
    a = np.concatenate([np.ravel(p) for p in a])
    b = np.concatenate([np.ravel(p) for p in b])
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0))


def integrability_criterion(R02, J) -> float:
    """``max_{a,b} |[R^{0,2}(e_a, e_b), J] P01(J)|``."""
    J = check_acs(J, tol=1e-10)
    _, P01 = eigenprojectors(J)
    C = np.einsum("abpq,qr->abpr", R02, J) - np.einsum("pq,abqr->abpr", J, R02)
    return float(np.max(np.abs(C @ P01)))


def integrability_report(space: TwistorSpace, x, Js) -> dict:
    """``R^{0,2}`` size and the criterion for each sampled ``J`` at ``x``."""
    x = np.asarray(x, dtype=float)
    R = curvature_components(space.conn, x, space.h)
    R02 = r02_components(R, space.I(x))
    trace = np.einsum("abpp->ab", R02)
    return {
        "r02": float(np.max(np.abs(R02))),
        "r02_trace_free": float(np.max(np.abs(R02 - trace[..., None, None] * np.eye(space.r) / space.r))),
        "criterion": [integrability_criterion(R02, J) for J in Js],
    }


# ---------------------------------------------------------------------------
# holomorphic sections


def section_residuals(A_dirs, K, J_fn, y, h: float = DEFAULT_STEP, dJ=None):
    """Holomorphic-section residuals for a section ``J`` of ``C(E)``.

    Parameters
    ----------
    A_dirs : ndarray ``(d, r, r)``
        Connection evaluated on the coordinate directions at ``y``.
    K : ndarray ``(d, d)``
        Base complex structure at ``y``.
    J_fn : callable
        The section in the frame.
    dJ : ndarray ``(d, r, r)``, optional
        Derivatives of ``J`` along coordinate directions (FD if absent).

    Returns
    -------
    (criterion, subbundle)
        ``max |J nabla_e J - nabla_{Ke} J|`` over coordinate directions and
        ``max |P10(J) nabla_{pi01 e} P01(J)|``.
    """
    y = np.asarray(y, dtype=float)
    J = np.asarray(J_fn(y))
    dJ = fd_jacobian(J_fn, y, h) if dJ is None else dJ
    nabla = dJ + np.einsum("kab,bc->kac", A_dirs, J) - np.einsum("ab,kbc->kac", J, A_dirs)
    P10, P01 = eigenprojectors(J)
    d = len(A_dirs)
    crit = 0.0
    sub = 0.0
    eye = np.eye(d)
    for k in range(d):
        lhs = J @ nabla[k]
        rhs = np.tensordot(K @ eye[k], nabla, axes=1)
        crit = max(crit, float(np.max(np.abs(lhs - rhs))))
        u = 0.5 * (eye[k] + 1j * K @ eye[k])
        nab_u = np.tensordot(u, nabla, axes=1)
        sub = max(sub, float(np.max(np.abs(P10 @ (0.5j * nab_u) @ P01))))
    return crit, sub


def holo_section_check(conn: ConnectionForm, I, J_fn, x, h: float = DEFAULT_STEP):
    """``(max_v |J nabla_v J - nabla_{Iv} J|, subbundle residual)`` at ``x``."""
    x = np.asarray(x, dtype=float)
    return section_residuals(conn(x), np.asarray(I(x)), J_fn, x, h)


def pseudoholo_pm_I(conn: ConnectionForm, I, x, h: float = DEFAULT_STEP):
    """Section residuals of ``+I`` and ``-I`` (as sections of ``C(TM)``)."""
    plus = holo_section_check(conn, I, I, x, h)[0]
    minus = holo_section_check(conn, I, lambda p: -np.asarray(I(p)), x, h)[0]
    return plus, minus


def phi_section_check(chart: TotalChart, y, kind: str = "twistor"):
    """Holomorphicity of the tautological section ``phi`` of ``C(pi^* E)`` over the total chart.

    The base structure is ``kind`` (``J^(nabla, I)`` or ``J_taut``) and the
    connection is ``pi^* nabla``.  Returns ``(criterion, subbundle)``.
    """
    y = np.asarray(y, dtype=float)
    K = chart.structure_matrix(y, kind)
    m = chart.space.m
    jac = chart.fiber.jacobian(chart.split(y)[1])
    dphi = np.zeros((chart.dim,) + jac.shape[1:])
    dphi[m:] = jac
    return section_residuals(chart.pullback_connection(y), K, chart.J, y, dJ=dphi)


def phi_modified_connection(chart: TotalChart, y) -> np.ndarray:
    """``pi^* nabla + (1/2)(pi^* nabla phi) phi`` on the chart directions at ``y``."""
    A = chart.pullback_connection(y)
    P = chart.projection_P(y)
    return A + 0.5 * P @ chart.J(y)


def _kron_left(M, r):
    return np.kron(M, np.eye(r))


def _kron_ad(B):
    r = B.shape[0]
    return np.kron(B, np.eye(r)) - np.kron(np.eye(r), B.T)


def jtaut_section_check(chart: TotalChart, y, kind: str = "twistor") -> float:
    """Holomorphicity of ``J_taut`` as a section of ``C(TC)`` over ``(C, kind)``.

    ``TC = V + H`` is realized inside ``W = pi^* End E + pi^* TM`` with the
    connection ``ad(pi^*A + (1/2) P phi) + pi^* A`` and the section
    ``L_phi + phi``; the residual is evaluated on a basis of ``V + H``.
    """
    space = chart.space
    if space.r != space.m:
        raise ValueError("J_taut needs E = TM")
    y = np.asarray(y, dtype=float)
    r = space.r
    m = space.m
    d = chart.dim
    K = chart.structure_matrix(y, kind)
    A = chart.pullback_connection(y)
    P = chart.projection_P(y)
    phi = chart.J(y)
    jac = chart.fiber.jacobian(chart.split(y)[1])
    dphi = np.zeros((d, r, r))
    dphi[m:] = jac

    def S_of(ph):
        out = np.zeros((r * r + r, r * r + r))
        out[: r * r, : r * r] = _kron_left(ph, r)
        out[r * r:, r * r:] = ph
        return out

    S = S_of(phi)
    Aw = np.zeros((d, r * r + r, r * r + r))
    dS = np.zeros_like(Aw)
    for i in range(d):
        Aw[i, : r * r, : r * r] = _kron_ad(A[i] + 0.5 * P[i] @ phi)
        Aw[i, r * r:, r * r:] = A[i]
        dS[i] = S_of(dphi[i])
    nabla = dS + Aw @ S - S @ Aw
    V = chart.vertical_basis(y).reshape(-1, r * r)
    basis = np.zeros((r * r + r, len(V) + r))
    basis[: r * r, : len(V)] = V.T
    basis[r * r:, len(V):] = np.eye(r)
    eye = np.eye(d)
    worst = 0.0
    for k in range(d):
        res = S @ nabla[k] - np.tensordot(K @ eye[k], nabla, axes=1)
        worst = max(worst, float(np.max(np.abs(res @ basis))))
    return worst


def bracket_projection_residual(chart: TotalChart, y, X0, Y0, LX, LY, h: float | None = None) -> float:
    """Check ``P[X,Y] = -[R(X,Y), phi] + nabla_X P(Y) - nabla_Y P(X)`` for linear fields.

    ``X = X0 + LX (p - y)`` and likewise ``Y``; ``P`` is the vertical
    projection of the total chart and ``R`` is the curvature of ``pi^* nabla``.
    """
    h = chart.space.h if h is None else h
    y = np.asarray(y, dtype=float)

    def Xf(p):
        return X0 + LX @ (np.asarray(p) - y)

    def Yf(p):
        return Y0 + LY @ (np.asarray(p) - y)

    def P_of(field_):
        def f(p):
            return np.tensordot(field_(p), chart.projection_P(p), axes=1)
        return f

    bracket = fd_directional(Yf, y, Xf(y), h) - fd_directional(Xf, y, Yf(y), h)
    lhs = np.tensordot(bracket, chart.projection_P(y), axes=1)
    m = chart.space.m
    x, J = chart.point(y)
    R = curvature_components(chart.space.conn, x, chart.space.h)
    Rxy = np.einsum("k,l,klpq->pq", Xf(y)[:m], Yf(y)[:m], R)
    A = chart.pullback_connection(y)

    def cov(field_a, field_b):
        Pb = P_of(field_b)
        a = field_a(y)
        return fd_directional(Pb, y, a, h) + commutator(np.tensordot(a, A, axes=1), Pb(y))

    rhs = -commutator(Rxy, J) + cov(Xf, Yf) - cov(Yf, Xf)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# fiberwise strata


def _scaled_kernel(M, scale: float, tol: float) -> np.ndarray:
    """Kernel of ``M`` with singular values below ``tol * scale`` treated as zero.

    ``K + sJ`` can vanish up to roundoff, so the threshold is tied to the size
    of ``K`` and ``J`` rather than to the largest singular value of the sum.
    """
    _, svals, vh = np.linalg.svd(M)
    rank = int(np.sum(svals > tol * scale))
    return vh[rank:].conj().T


def _pair_scale(K, J) -> float:
    return max(np.linalg.norm(K, 2), np.linalg.norm(J, 2))


def strata_dims(K, J, tol: float = 1e-9) -> tuple[int, int]:
    """``(dim ker(K + J), dim ker(K - J))``."""
    K = np.asarray(K, dtype=float)
    J = np.asarray(J, dtype=float)
    scale = _pair_scale(K, J)
    return _scaled_kernel(K + J, scale, tol).shape[1], _scaled_kernel(K - J, scale, tol).shape[1]


def _stratum_kernel(K, J, signs, tol):
    scale = _pair_scale(K, J)
    cols = [_scaled_kernel(K + s * J, scale, tol) for s in signs]
    return np.hstack(cols) if cols else np.zeros((K.shape[0], 0))


def unitary_directions(J, g) -> np.ndarray:
    """Basis of ``{X : [X, J] = 0, X^T g + g X = 0}`` (the Lie algebra of ``U(J) ∩ O(g)``)."""
    J = np.asarray(J, dtype=float)
    g = np.asarray(g, dtype=float)
    return _matrix_space_kernel([lambda X: commutator(X, J), lambda X: X.T @ g + g @ X], J.shape[0])


def stratum_tangent_space(K, J, g=None, signs=(1, -1), tol: float = 1e-9) -> np.ndarray:
    """Tangent space at ``K`` of ``{dim ker(K + s J) = const for s in signs}`` inside ``T(V, g)``.

    For ``K, J`` both g-orthogonal the kernels ``W = sum ker(K + sJ)`` are
    preserved by ``K`` and ``J``, so the stratum is locally the set of pairs
    (position of ``W``, structure on ``W^perp``).  The tangent space is therefore
    spanned by the orbit directions ``[X, K]``, ``X`` in ``u(J) ∩ o(g)``, together
    with the tangents of ``T(V, g)`` vanishing on ``W``.  The first-order
    kernel-perturbation condition is vacuous here, which is why the orbit
    description is used.  ``signs=(1,)`` gives ``T^(m1,*)``, ``(-1,)`` gives
    ``T^(*,m-1)``.
    """
    K = check_acs(K, tol=1e-10)
    J = np.asarray(J, dtype=float)
    g = np.eye(K.shape[0]) if g is None else np.asarray(g, dtype=float)
    W = _stratum_kernel(K, J, signs, tol)
    basis = skew_anticommutator_space(K, g)
    if W.shape[1]:
        coeff = rank_kernel(np.array([np.ravel(B @ W) for B in basis]).T, tol)[1]
        inner = np.tensordot(coeff.T, basis, axes=1)
    else:
        inner = basis
    orbit = np.array([commutator(X, K) for X in unitary_directions(J, g)])
    span = np.concatenate([orbit.reshape(len(orbit), -1), inner.reshape(len(inner), -1)])
    Q = column_space(span.T, tol)
    return Q.T.reshape(-1, *K.shape)


def _span_residual(T, vecs) -> float:
    """Largest distance of ``vecs`` from ``span(T)`` (matrices flattened)."""
    if len(T) == 0:
        return max((float(np.max(np.abs(v))) for v in vecs), default=0.0)
    Q, _ = np.linalg.qr(T.reshape(len(T), -1).T)
    worst = 0.0
    for B in vecs:
        v = np.ravel(B)
        worst = max(worst, float(np.max(np.abs(v - Q @ (Q.T @ v)))))
    return worst


def stratum_invariance_residual(K, J, g=None, signs=(1, -1)) -> float:
    """How far ``K T_K(stratum)`` leaves ``T_K(stratum)`` (zero for an almost complex stratum)."""
    T = stratum_tangent_space(K, J, g, signs)
    return _span_residual(T, [np.asarray(K) @ B for B in T])


def stratum_curves(K, J, g, signs, rng, count: int = 2):
    """Random tangent directions of the stratum, each with a curve that stays inside it.

    Yields ``(B, flow)`` where ``flow(t)`` is a g-orthogonal conjugate of ``K``
    with velocity ``B`` at ``t = 0``: either a ``U(J) ∩ O(g)`` orbit or a
    rotation supported on the complement of the kernels.
    """
    K = np.asarray(K, dtype=float)
    g = np.eye(K.shape[0]) if g is None else np.asarray(g, dtype=float)
    W = _stratum_kernel(K, J, signs, 1e-9)
    Xs = unitary_directions(J, g)
    basis = skew_anticommutator_space(K, g)
    coeff = rank_kernel(np.array([np.ravel(B @ W) for B in basis]).T, 1e-9)[1] if W.shape[1] else np.eye(len(basis))
    inner = np.tensordot(coeff.T, basis, axes=1)
    for _ in range(count):
        X = np.tensordot(rng.standard_normal(len(Xs)), Xs, axes=1)
        yield commutator(X, K), (lambda t, X=X: expm(t * X) @ K @ expm(-t * X))
        if len(inner):
            B = np.tensordot(rng.standard_normal(len(inner)), inner, axes=1)
            # exp(-tA/2) K exp(tA/2) with A = -K B has velocity B
            yield B, (lambda t, A=-K @ B: expm(-0.5 * t * A) @ K @ expm(0.5 * t * A))
