"""Dense real/complex matrix kernel.

Everything downstream works with endomorphisms of a real 2n-dimensional
fiber stored as plain ``(2n, 2n)`` arrays.  Complex structures on a fiber
are matrices with ``J @ J == -1``; their tangent spaces are the
anticommutants ``{A : AJ + JA = 0}``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, subspace_angles

ALG_TOL = 1e-12
RANK_RTOL = 1e-9


class AlgebraError(ValueError):
    """An algebraic precondition (J^2 = -1, tangency, orthogonality) failed."""


class TangencyError(AlgebraError):
    """A matrix that should anticommute with J does not."""


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def acs_residual(J) -> float:
    J = np.asarray(J)
    return float(np.max(np.abs(J @ J + np.eye(J.shape[0]))))


def check_acs(J, tol: float = ALG_TOL, scale_tol: bool = True) -> np.ndarray:
    """Return ``J`` as an array after checking ``J^2 = -1``.

    With ``scale_tol`` the tolerance is multiplied by ``max(1, |J|^2)`` so
    that well-conditioned but large-entry structures are not rejected for
    roundoff alone.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] % 2:
        raise AlgebraError(f"complex structure must be square of even size, got {J.shape}")
    if not np.all(np.isfinite(J)):
        raise AlgebraError("complex structure has non-finite entries")
    bound = tol * max(1.0, float(np.max(np.abs(J))) ** 2) if scale_tol else tol
    res = acs_residual(J)
    if res > bound:
        raise AlgebraError(f"J^2 + 1 residual {res:.3e} exceeds {bound:.1e}")
    return J


def standard_acs(n: int) -> np.ndarray:
    """``[[0, -1], [1, 0]]`` in the split layout ``(x_1..x_n, y_1..y_n)``.

    For ``n = 1`` this is the usual rotation ``J0``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def rank_kernel(mat, tol: float = RANK_RTOL):
    """Numerical rank and an orthonormal kernel basis of ``mat``.

    Singular values below ``tol * sigma_max`` count as zero.  The kernel
    basis is returned as the columns of a ``(ncols, k)`` array.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mat = np.atleast_2d(np.asarray(mat))
    ncols = mat.shape[1]
    if mat.size == 0:
        return 0, np.eye(ncols, dtype=mat.dtype)
    _, svals, vh = np.linalg.svd(mat)
    smax = svals[0] if svals.size else 0.0
    if smax == 0.0:
        return 0, np.eye(ncols, dtype=vh.dtype)
    rank = int(np.sum(svals > tol * smax))
    kernel = vh[rank:].conj().T
    return rank, kernel


def _matrix_space_kernel(constraints, size):
    """Orthonormal basis (as matrices) of the common kernel of linear maps on matrices.

    ``constraints`` is a list of callables ``A -> matrix``.  Each is turned into
    a dense operator on ``vec(A)`` by probing the elementary matrices.
    """
    dim = size * size
    rows = []
    for op in constraints:
        cols = []
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = 1.0
            cols.append(np.ravel(op(e.reshape(size, size))))
        rows.append(np.array(cols).T)
    big = np.vstack(rows)
    # absolute threshold: the constraint maps have O(1) singular values
    _, svals, vh = np.linalg.svd(big)
    rank = int(np.sum(svals > 1e-9 * max(1.0, svals[0])))
    kernel = vh[rank:]
    return kernel.reshape(-1, size, size)


def anticommutator_space(J) -> np.ndarray:
    """Frobenius-orthonormal basis of ``{A : AJ + JA = 0}``, shape ``(2n^2, 2n, 2n)``."""
    J = check_acs(J)
    return _matrix_space_kernel([lambda A: anticommutator(A, J)], J.shape[0])


def check_metric_compatible(J, g, tol: float = ALG_TOL) -> None:
    J = np.asarray(J, dtype=float)
    g = np.asarray(g, dtype=float)
    scale = max(1.0, float(np.max(np.abs(g))) * max(1.0, float(np.max(np.abs(J)))) ** 2)
    res = float(np.max(np.abs(J.T @ g @ J - g)))
    if res > tol * scale * 10:
        raise AlgebraError(f"J is not g-orthogonal (residual {res:.3e})")


def skew_anticommutator_space(J, g) -> np.ndarray:
    """Basis of ``{A in o(V, g) : AJ + JA = 0}``, shape ``(n(n-1), 2n, 2n)``."""
    J = check_acs(J)
    g = np.asarray(g, dtype=float)
    if not np.allclose(g, g.T, atol=1e-13) or np.min(np.linalg.eigvalsh(g)) <= 0:
        raise AlgebraError("metric must be symmetric positive definite")
    check_metric_compatible(J, g)
    return _matrix_space_kernel(
        [lambda A: anticommutator(A, J), lambda A: A.T @ g + g @ A], J.shape[0]
    )


def eigenprojectors(J):
    """Projectors onto the ``+i`` and ``-i`` eigenspaces of ``J`` acting on ``V_C``.

    Returns ``(P10, P01)`` with ``P10 = (1 - iJ)/2`` and ``P01 = (1 + iJ)/2``.
    """
    J = np.asarray(J)
    eye = np.eye(J.shape[0])
    return 0.5 * (eye - 1j * J), 0.5 * (eye + 1j * J)


def check_tangent(J, A, tol: float = 1e-10) -> None:
    res = float(np.max(np.abs(anticommutator(A, J))))
    scale = max(1.0, float(np.max(np.abs(A)))) * max(1.0, float(np.max(np.abs(J))))
    if res > tol * scale:
        raise TangencyError(f"{{A, J}} residual {res:.3e} exceeds tolerance")


def conjugation_flow(J, A, t: float, tol: float = 1e-10) -> np.ndarray:
    """``exp(-tA/2) J exp(tA/2)``; its t-derivative at 0 is ``J A``."""
    J = np.asarray(J, dtype=float)
    A = np.asarray(A, dtype=float)
    check_tangent(J, A, tol)
    return expm(-0.5 * t * A) @ J @ expm(0.5 * t * A)


def orthonormal_frame(g) -> np.ndarray:
    """``L`` with ``L.T @ g @ L = 1`` (symmetric inverse square root)."""
    w, v = np.linalg.eigh(np.asarray(g, dtype=float))
    return (v / np.sqrt(w)) @ v.T


def random_acs(n: int, rng: np.random.Generator, g=None, scale: float = 0.5) -> np.ndarray:
    """Random complex structure on ``R^{2n}`` by conjugating the standard one.

    With a metric ``g`` the conjugation is by a g-orthogonal matrix so the
    result lies in ``T(V, g)`` (same component as ``L J0 L^{-1}``).
    """
    J0 = standard_acs(n)
    X = scale * rng.standard_normal((2 * n, 2 * n)) / np.sqrt(2 * n)
    if g is None:
        return expm(X) @ J0 @ expm(-X)
    X = X - X.T
    L = orthonormal_frame(g)
    Q = expm(X)
    return L @ Q @ J0 @ Q.T @ np.linalg.inv(L)


def random_tangent(J, rng: np.random.Generator, g=None) -> np.ndarray:
    basis = anticommutator_space(J) if g is None else skew_anticommutator_space(J, g)
    if len(basis) == 0:
        return np.zeros_like(np.asarray(J, dtype=float))
    return np.tensordot(rng.standard_normal(len(basis)), basis, axes=1)


def column_space(mat, tol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the column space of ``mat``."""
    u, svals, _ = np.linalg.svd(np.atleast_2d(mat), full_matrices=False)
    if svals.size == 0 or svals[0] == 0:
        return u[:, :0]
    rank = int(np.sum(svals > tol * svals[0]))
    return u[:, :rank]


def principal_angles(a, b) -> np.ndarray:
    return subspace_angles(np.asarray(a), np.asarray(b))


def realify(c) -> np.ndarray:
    """Real ``2n x 2n`` form of a complex ``n x n`` matrix in the layout ``(Re, Im)``."""
    c = np.asarray(c)
    return np.block([[c.real, -c.imag], [c.imag, c.real]])
