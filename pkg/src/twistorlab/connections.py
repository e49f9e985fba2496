"""Connections in a fixed frame, their curvature, and the derived connections.

A connection ``nabla = d + A`` on a rank-r real bundle over an m-dimensional
chart is stored as a callable ``x -> A(x)`` of shape ``(m, r, r)`` with
``A[k] = A(d/dx_k)``, so ``nabla_v s = D_v s + A(v) s``.  Curvature is

    R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y],
    R_kl = d_k A_l - d_l A_k + [A_k, A_l],

and parallel transport along ``gamma`` solves ``s' = -A(gamma') s``, so a
small counterclockwise square in the ``(k, l)`` plane has holonomy
``1 - eps^2 R_kl + O(eps^3)``.

Endomorphism-valued 3-form convention: ``(g^{-1} H)(v)`` is the endomorphism
``w -> g^{-1} H(v, w, .)``, i.e. ``(g^{-1}H)_k = g^{-1} @ H[k].T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart_calculus import DEFAULT_STEP, fd_directional, fd_jacobian
from .core_linalg import AlgebraError, check_acs, commutator, eigenprojectors, realify


@dataclass(frozen=True)
class ConnectionForm:
    """Coefficients ``A(x)`` of a connection in a fixed frame.

    Parameters
    ----------
    fn : callable
        ``x -> (m, r, r)`` array.
    dim, rank : int
        Base dimension ``m`` and real fiber rank ``r``.
    dfn : callable, optional
        Analytic derivative ``x -> (m, m, r, r)`` with ``[k, l] = d_k A_l``.
    holomorphic_frame : bool
        Set when the frame is known to be holomorphic for the bundle's
        complex structure (required by Chern-type constructions).
    """

    fn: object
    dim: int
    rank: int
    dfn: object = None
    holomorphic_frame: bool = False
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        A = np.asarray(self.fn(np.asarray(x, dtype=float)))
        if A.shape != (self.dim, self.rank, self.rank):
            raise ValueError(f"connection {self.label!r} returned shape {A.shape}")
        return A

    def along(self, x, v) -> np.ndarray:
        """``A(v)`` for a real or complex tangent vector ``v``."""
        return np.tensordot(np.asarray(v), self(x), axes=1)

    def derivative(self, x, h: float = DEFAULT_STEP) -> np.ndarray:
        if self.dfn is not None:
            return np.asarray(self.dfn(np.asarray(x, dtype=float)))
        return fd_jacobian(self, x, h)

    def __add__(self, other: "ConnectionForm") -> "ConnectionForm":
        return self.plus(other.fn, label=f"{self.label}+{other.label}")

    def plus(self, delta, label: str = "", holomorphic_frame: bool | None = None) -> "ConnectionForm":
        """``nabla + delta`` for an End-valued 1-form field ``delta``."""
        base = self.fn

        def fn(x):
            return np.asarray(base(x)) + np.asarray(delta(x))

        hf = self.holomorphic_frame if holomorphic_frame is None else holomorphic_frame
        return ConnectionForm(fn, self.dim, self.rank, holomorphic_frame=hf, label=label or self.label)


def trivial_connection(dim: int, rank: int) -> ConnectionForm:
    zero = np.zeros((dim, rank, rank))
    return ConnectionForm(lambda x: zero, dim, rank, dfn=lambda x: np.zeros((dim, dim, rank, rank)),
                          holomorphic_frame=True, label="trivial")


# ---------------------------------------------------------------------------
# curvature


def curvature_components(conn: ConnectionForm, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """``R[k, l]`` of shape ``(m, m, r, r)``; exactly antisymmetric in ``(k, l)``."""
    A = conn(x)
    dA = conn.derivative(x, h)
    R = dA - np.swapaxes(dA, 0, 1)
    R = R + np.einsum("kab,lbc->klac", A, A) - np.einsum("lab,kbc->klac", A, A)
    return 0.5 * (R - np.swapaxes(R, 0, 1))


def curvature(conn: ConnectionForm, x, v, w, h: float = DEFAULT_STEP, R=None) -> np.ndarray:
    R = curvature_components(conn, x, h) if R is None else R
    return np.einsum("k,l,klab->ab", np.asarray(v), np.asarray(w), R)


def r02_components(R, I) -> np.ndarray:
    """``R^{0,2}(e_a, e_b) = R(pi01 e_a, pi01 e_b)`` (complex bilinear)."""
    _, P01 = eigenprojectors(check_acs(I))
    return np.einsum("klpq,ka,lb->abpq", R, P01, P01)


def r11_components(R, I) -> np.ndarray:
    P10, P01 = eigenprojectors(check_acs(I))
    return (np.einsum("klpq,ka,lb->abpq", R, P10, P01)
            + np.einsum("klpq,ka,lb->abpq", R, P01, P10))


def is_one_one(conn: ConnectionForm, I, x, h: float = DEFAULT_STEP, R=None) -> float:
    """Largest entry of ``R^{0,2}``; zero iff ``R(I., I.) = R``."""
    R = curvature_components(conn, x, h) if R is None else R
    Ix = I(x) if callable(I) else I
    return float(np.max(np.abs(r02_components(R, Ix))))


def parallel_transport(conn: ConnectionForm, path, dpath, s0, steps: int = 64, t0=0.0, t1=1.0) -> np.ndarray:
    """RK4 for ``s' = -A(gamma'(t)) s`` (``s0`` may be a vector or a matrix of columns)."""
    s = np.array(s0, dtype=np.result_type(s0, float))
    dt = (t1 - t0) / steps

    def rhs(t, y):
        return -conn.along(path(t), dpath(t)) @ y

    t = t0
    for _ in range(steps):
        k1 = rhs(t, s)
        k2 = rhs(t + dt / 2, s + dt / 2 * k1)
        k3 = rhs(t + dt / 2, s + dt / 2 * k2)
        k4 = rhs(t + dt, s + dt * k3)
        s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return s


def segment(x0, v):
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    return (lambda t: x0 + t * v), (lambda t: v)


def holonomy_square(conn: ConnectionForm, x, k: int, l: int, eps: float, steps: int = 32) -> np.ndarray:
    """Transport around the square ``x -> x + eps e_k -> ... `` (counterclockwise in ``(k, l)``)."""
    x = np.asarray(x, dtype=float)
    m = x.size
    ek = np.zeros(m)
    el = np.zeros(m)
    ek[k] = eps
    el[l] = eps
    s = np.eye(conn.rank)
    corner = x
    for d in (ek, el, -ek, -el):
        p, dp = segment(corner, d)
        s = parallel_transport(conn, p, dp, s, steps)
        corner = corner + d
    return s


# ---------------------------------------------------------------------------
# metric and torsion predicates


def metric_residual(conn: ConnectionForm, g, x, h: float = DEFAULT_STEP) -> float:
    """``max_k |d_k g - A_k^T g - g A_k|`` for a fiber metric field ``g``."""
    A = conn(x)
    dg = fd_jacobian(g, x, h)
    gx = np.asarray(g(x))
    res = dg - np.transpose(A, (0, 2, 1)) @ gx - gx @ A
    return float(np.max(np.abs(res)))


def skew_curvature_residual(R, g) -> float:
    """``|R + g^{-1} R^T g|``: curvature of a metric connection is g-skew."""
    g = np.asarray(g)
    ginv = np.linalg.inv(g)
    res = R + ginv @ np.swapaxes(R, -1, -2) @ g
    return float(np.max(np.abs(res)))


def torsion_residual(conn: ConnectionForm, x) -> float:
    """Torsion of a connection on ``TM`` in the coordinate frame: ``A_k e_j - A_j e_k``."""
    A = conn(x)
    if conn.rank != conn.dim:
        raise ValueError("torsion needs E = TM")
    T = np.einsum("kij->kji", A) - np.einsum("jik->kji", A)
    return float(np.max(np.abs(T)))


def covariant_derivative_endo(conn: ConnectionForm, J, x, v, h: float = DEFAULT_STEP) -> np.ndarray:
    """``(nabla_v J) = D_v J + [A(v), J]`` for an endomorphism field ``J``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return (covariant_derivative_endo(conn, J, x, v.real, h)
                + 1j * covariant_derivative_endo(conn, J, x, v.imag, h))
    dJ = fd_directional(J, x, v, h)
    return dJ + commutator(conn.along(x, v), np.asarray(J(x)))


def parallel_residual(conn: ConnectionForm, J, x, h: float = DEFAULT_STEP) -> float:
    m = np.asarray(x).size
    return max(float(np.max(np.abs(covariant_derivative_endo(conn, J, x, e, h)))) for e in np.eye(m))


# ---------------------------------------------------------------------------
# Levi-Civita


def christoffel(g, x, h: float = DEFAULT_STEP, dg=None) -> np.ndarray:
    """``Gamma[i, k, j] = Gamma^i_{kj}`` from a metric field."""
    gx = np.asarray(g(x))
    try:
        ginv = np.linalg.inv(gx)
    except np.linalg.LinAlgError as exc:
        raise AlgebraError("singular metric") from exc
    if np.min(np.linalg.eigvalsh(0.5 * (gx + gx.T))) <= 0:
        raise AlgebraError("metric is not positive definite")
    dg = fd_jacobian(g, x, h) if dg is None else dg  # dg[k, l, j] = d_k g_lj
    low = 0.5 * (np.einsum("klj->lkj", dg) + np.einsum("jlk->lkj", dg) - np.einsum("lkj->lkj", dg))
    return np.einsum("il,lkj->ikj", ginv, low)


def levi_civita(g, dim: int, h: float = DEFAULT_STEP, dg=None) -> ConnectionForm:
    """Levi-Civita connection on ``TM`` in the coordinate frame: ``A[k][i, j] = Gamma^i_{kj}``."""

    def fn(x):
        dgx = None if dg is None else dg(x)
        G = christoffel(g, x, h, dgx)
        return np.transpose(G, (1, 0, 2))

    return ConnectionForm(fn, dim, dim, label="levi_civita")


# ---------------------------------------------------------------------------
# Chern connection


def hermitian_matrix_from_metric(g, J) -> np.ndarray:
    """``G[k, j] = h(f_j, f_k)`` with ``h(s, t) = g(s, t) + i g(s, Jt)`` and ``f_j = e_j``.

    ``J`` must be the split standard structure so ``e_{n+j} = J e_j``.
    """
    g = np.asarray(g)
    n = g.shape[0] // 2
    f = np.eye(2 * n)[:, :n]
    return f.T @ g @ f + 1j * (J @ f).T @ g @ f


def chern(g, I_base, dim: int, rank: int, holomorphic_frame: bool = True, h: float = DEFAULT_STEP,
          label: str = "chern") -> ConnectionForm:
    """Chern connection of ``(E, g, J_std)`` with a holomorphic real frame.

    The frame ``(f_1..f_n, J f_1..J f_n)`` is assumed holomorphic over a
    base with the constant complex structure ``I_base``.  On the Hermitian
    matrix ``G`` the connection 1-form is ``theta(v) = G^{-1} dG(pi10 v)``;
    it is returned realified.
    """
    if not holomorphic_frame:
        raise ValueError("the Chern construction needs a holomorphic frame")
    from .core_linalg import standard_acs

    n = rank // 2
    Jf = standard_acs(n)
    Ib = check_acs(I_base)

    def herm(x):
        return hermitian_matrix_from_metric(g(x), Jf)

    def fn(x):
        x = np.asarray(x, dtype=float)
        G = herm(x)
        Ginv = np.linalg.inv(G)
        dG = fd_jacobian(herm, x, h)
        out = np.empty((dim, rank, rank))
        for k in range(dim):
            v = np.zeros(dim)
            v[k] = 1.0
            d10 = 0.5 * (np.tensordot(v, dG, axes=1) - 1j * np.tensordot(Ib @ v, dG, axes=1))
            out[k] = realify(Ginv @ d10)
        return out

    return ConnectionForm(fn, dim, rank, holomorphic_frame=True, label=label)


def holomorphic_frame_10(n: int) -> np.ndarray:
    """``e_j = (eps_j - i eps_{n+j}) / 2``: the (1,0) parts of the real frame."""
    eye = np.eye(2 * n)
    return 0.5 * (eye[:, :n] - 1j * eye[:, n:])


def dual_frame_01(g, n: int) -> np.ndarray:
    """Frame ``u`` of ``E^{0,1}`` with ``g_C(u_k, e_j) = delta_kj``."""
    E = holomorphic_frame_10(n)
    Eb = E.conj()
    M = Eb.T @ np.asarray(g) @ E
    return Eb @ np.linalg.inv(M).T


def dbar_frame_residual(conn: ConnectionForm, frame, I_base, x, h: float = DEFAULT_STEP) -> float:
    """``max_v |dF(pi01 v) + A(pi01 v) F|`` for a frame field ``F`` of ``E_C``."""
    x = np.asarray(x, dtype=float)
    m = x.size
    _, P01 = eigenprojectors(check_acs(I_base))
    F = frame(x)
    dF = fd_jacobian(frame, x, h)
    A = conn(x)
    res = 0.0
    for k in range(m):
        u = P01[:, k]
        val = np.tensordot(u, dF, axes=1) + np.tensordot(u, A, axes=1) @ F
        res = max(res, float(np.max(np.abs(val))))
    return res


def chern_frame_residual(conn: ConnectionForm, g, I_base, x, h: float = DEFAULT_STEP) -> float:
    """Annihilation of the holomorphic frame ``{e_i, g^{-1} e^i}`` of ``E_C`` by ``nabla^{0,1}``."""
    n = conn.rank // 2
    E = holomorphic_frame_10(n)
    return dbar_frame_residual(conn, lambda y: np.hstack([E, dual_frame_01(g(y), n)]), I_base, x, h)


# ---------------------------------------------------------------------------
# three-form connections


def raise_three_form(H, g) -> np.ndarray:
    """``(g^{-1}H)[k] = g^{-1} @ H[k].T``, the endomorphism ``w -> g^{-1} H(e_k, w, .)``."""
    ginv = np.linalg.inv(np.asarray(g))
    return np.einsum("il,kjl->kij", ginv, np.asarray(H))


def bismut_pair(g, H, dim: int, h: float = DEFAULT_STEP):
    """``(nabla^+, nabla^-) = LC +/- (1/2) g^{-1} H`` for a 3-form field ``H``."""
    lc = levi_civita(g, dim, h)

    def make(sign, label):
        return lc.plus(lambda x: sign * 0.5 * raise_three_form(H(x), g(x)), label=label)

    return make(+1.0, "bismut_plus"), make(-1.0, "bismut_minus")


def i_commutator_term(g, I, H, x) -> np.ndarray:
    """``(1/2) I [g^{-1}H, I]`` at ``x`` as an ``(m, m, m)`` array."""
    Ix = np.asarray(I(x))
    gH = raise_three_form(H(x), g(x))
    return 0.5 * np.einsum("ab,kbc->kac", Ix, gH @ Ix - Ix @ gH)


def h_twisted_chern(chern_conn: ConnectionForm, g, I, H, sign: float = 1.0) -> ConnectionForm:
    """``nabla^Ch + sign * (1/2) I [g^{-1}H, I]``."""
    return chern_conn.plus(lambda x: sign * i_commutator_term(g, I, H, x),
                           label=f"h_twisted_chern({'+' if sign > 0 else '-'})")


def dzbar(v, n: int) -> np.ndarray:
    """``dzbar_a(v) = v_{x_a} - i v_{y_a}`` on a split chart."""
    v = np.asarray(v)
    return v[:n] - 1j * v[n:]


def dbar_closedness(D, x, n: int, h: float = DEFAULT_STEP) -> float:
    """Max of ``|d_{zbar_a} D_b - d_{zbar_b} D_a|`` for ``D = sum_a dzbar_a D_a``.

    ``D`` is a callable returning the stacked coefficients ``(n, ...)``;
    ``d_{zbar} = (d_x + i d_y)/2``.
    """
    x = np.asarray(x, dtype=float)
    dD = fd_jacobian(D, x, h)
    dzb = 0.5 * (dD[:n] + 1j * dD[n:])  # dzb[a] = d_{zbar_a} D
    worst = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            worst = max(worst, float(np.max(np.abs(dzb[a][b] - dzb[b][a]))))
    return worst


def twist_block(g, n: int, A=None, alpha=None, D=None) -> np.ndarray:
    """Complex endomorphism of ``E_C`` for ``[[A, alpha], [D, -A^t]]`` on ``E^{1,0} + E^{*1,0}``.

    Each block is an ``n x n`` complex matrix (``D`` and ``alpha``
    antisymmetric); they are transported to ``E_C`` through the frame
    ``(e, g^{-1} e^*)``.
    """
    zero = np.zeros((n, n), dtype=complex)
    A = zero if A is None else np.asarray(A, dtype=complex)
    alpha = zero if alpha is None else np.asarray(alpha, dtype=complex)
    D = zero if D is None else np.asarray(D, dtype=complex)
    N = np.block([[A, alpha.T], [D.T, -A.T]])
    F = np.hstack([holomorphic_frame_10(n), dual_frame_01(g, n)])
    return F @ N @ np.linalg.inv(F)


def d_twisted(chern_conn: ConnectionForm, g, D=None, alpha=None, A=None, n: int | None = None,
              closedness_tol: float | None = None, check_points=()) -> ConnectionForm:
    """``nabla^Ch + D_g^{0,1} + conj(D_g^{0,1})`` for (0,1)-form data.

    ``D``, ``alpha``, ``A`` are callables ``x -> (n_base, n, n)`` giving the
    coefficients of ``dzbar_a``.  With ``closedness_tol`` the data are
    checked for ``dbar``-closedness at ``check_points``.
    """
    n = chern_conn.rank // 2 if n is None else n
    nb = chern_conn.dim // 2
    if closedness_tol is not None:
        for field_ in (D, alpha):
            if field_ is None:
                continue
            for p in check_points:
                r = dbar_closedness(field_, p, nb)
                if r > closedness_tol:
                    raise AlgebraError(f"twist data is not dbar-closed (residual {r:.2e})")

    def get(field_, x):
        return None if field_ is None else np.asarray(field_(x))

    def delta(x):
        gx = np.asarray(g(x))
        Dx, ax, Ax = get(D, x), get(alpha, x), get(A, x)
        blocks = [
            twist_block(gx, n,
                        None if Ax is None else Ax[a],
                        None if ax is None else ax[a],
                        None if Dx is None else Dx[a])
            for a in range(nb)
        ]
        out = np.empty((chern_conn.dim, chern_conn.rank, chern_conn.rank))
        for k in range(chern_conn.dim):
            v = np.zeros(chern_conn.dim)
            v[k] = 1.0
            c = dzbar(v, nb)
            M = sum(c[a] * blocks[a] for a in range(nb))
            out[k] = 2.0 * M.real
        return out

    return chern_conn.plus(delta, label="d_twisted")


def section_modified(conn: ConnectionForm, J, a: float, b: float, h: float = DEFAULT_STEP) -> ConnectionForm:
    """``nabla + (nabla J)(a + b J)``; ``(a, b) = (0, 1/2)`` gives ``nabla' = nabla + (1/2)(nabla J) J``."""
    eye = np.eye(conn.rank)

    def delta(x):
        x = np.asarray(x, dtype=float)
        Jx = np.asarray(J(x))
        return np.stack([covariant_derivative_endo(conn, J, x, e, h) @ (a * eye + b * Jx)
                         for e in np.eye(conn.dim)])

    return conn.plus(delta, label=f"section_modified({a:g},{b:g})")


def coefficient_distance(c1: ConnectionForm, c2: ConnectionForm, x) -> float:
    return float(np.max(np.abs(c1(x) - c2(x))))
