"""A single twistor fiber: charts on C(V) and T(V, g), the vertical complex
structure, and the embedding ``J -> V^{0,1}_J`` into the Grassmannian of
complex n-planes of ``V_C``.

Planes are stored with orthonormal bases and compared by principal angles,
so every residual here is invariant under a change of basis of the plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, expm_frechet, logm

from .core_linalg import (
    AlgebraError,
    anticommutator_space,
    check_acs,
    check_tangent,
    column_space,
    conjugation_flow,
    eigenprojectors,
    principal_angles,
    skew_anticommutator_space,
)


class ChartDomainError(ValueError):
    """A point lies outside the domain of a chart."""


# ---------------------------------------------------------------------------
# fiber charts


@dataclass(frozen=True)
class FiberChart:
    """Exponential chart ``s -> exp(S) J0 exp(-S)`` around ``J0``.

    ``S = sum_a s_a B_a`` over a Frobenius-orthonormal basis of the
    anticommutant of ``J0`` (or of its ``g``-skew part in metric mode).
    Because ``S`` anticommutes with ``J0`` the chart map equals
    ``exp(2S) J0``, which is what is evaluated.
    """

    center: np.ndarray
    metric: np.ndarray | None = None
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        J0 = check_acs(self.center)
        object.__setattr__(self, "center", J0)
        if self.metric is None:
            basis = anticommutator_space(J0)
        else:
            basis = skew_anticommutator_space(J0, self.metric)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def mode(self) -> str:
        return "general" if self.metric is None else "metric"

    def generator(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} fiber coordinates, got shape {s.shape}")
        if self.dim == 0:
            return np.zeros_like(self.center)
        return np.tensordot(s, self.basis, axes=1)

    def __call__(self, s) -> np.ndarray:
        return expm(2.0 * self.generator(s)) @ self.center

    def jacobian(self, s) -> np.ndarray:
        """``dJ/ds_a`` stacked along axis 0, shape ``(dim, 2n, 2n)``."""
        S2 = 2.0 * self.generator(s)
        out = np.empty((self.dim,) + self.center.shape)
        for a, B in enumerate(self.basis):
            out[a] = expm_frechet(S2, 2.0 * B, compute_expm=False) @ self.center
        return out

    def inverse(self, J, tol: float = 1e-9) -> np.ndarray:
        """Coordinates of ``J``; raises ``ChartDomainError`` off the chart domain.

        ``J J0^{-1} = -J J0 = exp(2S)`` so ``S`` is half the principal
        logarithm, which is real and anticommutes with ``J0`` as long as
        ``-J J0`` has no eigenvalues on the closed negative real axis.
        """
        J = check_acs(J)
        M = -J @ self.center
        evals = np.linalg.eigvals(M)
        if np.any((np.abs(evals.imag) < 1e-8) & (evals.real <= 0)):
            raise ChartDomainError("J is outside the exponential chart around the center")
        S = 0.5 * logm(M)
        if np.max(np.abs(np.imag(S))) > 1e-8:
            raise ChartDomainError("logarithm is not real")
        S = np.real(S)
        s = np.array([np.sum(S * B) for B in self.basis])
        resid = np.max(np.abs(S - self.generator(s))) if self.dim else np.max(np.abs(S))
        if resid > tol * max(1.0, np.max(np.abs(S))):
            raise ChartDomainError(f"J does not lie on this chart's orbit (residual {resid:.2e})")
        return s

    def tangent_basis(self, s) -> np.ndarray:
        return self.jacobian(s)


def vertical_complex_structure(J, A, tol: float = 1e-10) -> np.ndarray:
    """``I_C(A) = J A`` on the tangent space ``{A : AJ + JA = 0}``."""
    J = np.asarray(J, dtype=float)
    A = np.asarray(A, dtype=float)
    check_tangent(J, A, tol)
    return J @ A


# ---------------------------------------------------------------------------
# Grassmannian points and graph charts


def _orthonormalize(basis) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    q, r = np.linalg.qr(basis)
    d = np.abs(np.diag(r))
    if d.size == 0 or np.min(d) <= 1e-12 * max(1.0, np.max(d)):
        raise AlgebraError("plane basis is rank deficient")
    return q


@dataclass(frozen=True)
class GrassPoint:
    """A complex k-plane in ``C^N`` stored by an orthonormal basis (``N x k``)."""

    basis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", _orthonormalize(self.basis))

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def conj(self) -> "GrassPoint":
        return GrassPoint(self.basis.conj())

    def distance(self, other: "GrassPoint") -> float:
        """Largest principal angle between the two planes."""
        ang = principal_angles(self.basis, other.basis)
        return float(np.max(ang)) if ang.size else 0.0


def plane_distance(a, b) -> float:
    a = a.basis if isinstance(a, GrassPoint) else a
    b = b.basis if isinstance(b, GrassPoint) else b
    return GrassPoint(a).distance(GrassPoint(b))


def fiber_embed(J) -> GrassPoint:
    """``psi(J) = V^{0,1}_J``, the ``-i`` eigenspace of ``J`` on ``V_C``."""
    J = check_acs(J)
    _, P01 = eigenprojectors(J)
    basis = column_space(P01)
    n = J.shape[0] // 2
    if basis.shape[1] != n:
        raise AlgebraError(f"P01 has rank {basis.shape[1]}, expected {n}")
    return GrassPoint(basis)


def is_transverse(P: GrassPoint, tol: float = 1e-9) -> bool:
    """``P + conj(P) = C^{2n}`` for an n-plane."""
    W = np.hstack([P.basis, P.basis.conj()])
    s = np.linalg.svd(W, compute_uv=False)
    return W.shape[0] == W.shape[1] and s[-1] > tol * s[0]


def acs_from_plane(P: GrassPoint, tol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`fiber_embed` on its open image.

    ``J = i (Pi_Pbar - Pi_P)`` with the oblique projectors of the splitting
    ``C^{2n} = P + conj(P)``; ``J`` is then ``-i`` on ``P``, ``+i`` on the
    conjugate plane and real.
    """
    p = P.basis
    N, k = p.shape
    if 2 * k != N or not is_transverse(P, tol):
        raise ChartDomainError("plane is not transverse to its conjugate")
    W = np.hstack([p, p.conj()])
    Winv = np.linalg.inv(W)
    pi_p = p @ Winv[:k]
    pi_pbar = p.conj() @ Winv[k:]
    J = 1j * (pi_pbar - pi_p)
    if np.max(np.abs(J.imag)) > 1e-8 * max(1.0, np.max(np.abs(J.real))):
        raise AlgebraError("reconstructed structure is not real")
    return J.real


def isotropy_residual(P: GrassPoint, g) -> float:
    """``max |g_C(v_i, v_j)|`` over an orthonormal basis (bilinear pairing)."""
    p = P.basis
    return float(np.max(np.abs(p.T @ np.asarray(g) @ p)))


@dataclass(frozen=True)
class GraphChart:
    """Graph chart ``B -> span(p + q B)`` anchored at the plane ``p`` with complement ``q``.

    ``B`` is the ``k x k`` matrix of a map from the anchor to its complement
    written in the bases ``p`` and ``q``.
    """

    anchor: np.ndarray
    complement: np.ndarray
    _frame_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.anchor, dtype=complex)
        q = np.asarray(self.complement, dtype=complex)
        if p.shape != q.shape or p.shape[0] != 2 * p.shape[1]:
            raise ValueError("anchor and complement must both be 2k x k")
        W = np.hstack([p, q])
        s = np.linalg.svd(W, compute_uv=False)
        if s[-1] <= 1e-10 * s[0]:
            raise ChartDomainError("anchor and complement are not transverse")
        object.__setattr__(self, "anchor", p)
        object.__setattr__(self, "complement", q)
        object.__setattr__(self, "_frame_inv", np.linalg.inv(W))

    @classmethod
    def at(cls, J) -> "GraphChart":
        """Chart anchored at ``(V^{0,1}_J, V^{1,0}_J)`` with conjugate bases."""
        p = fiber_embed(J).basis
        return cls(p, p.conj())

    @property
    def k(self) -> int:
        return self.anchor.shape[1]

    def __call__(self, B) -> GrassPoint:
        B = np.asarray(B, dtype=complex)
        return GrassPoint(self.anchor + self.complement @ B)

    def split(self, vecs) -> tuple[np.ndarray, np.ndarray]:
        c = self._frame_inv @ np.asarray(vecs, dtype=complex)
        return c[: self.k], c[self.k :]

    def inverse(self, P, cond_max: float = 1e8) -> np.ndarray:
        basis = P.basis if isinstance(P, GrassPoint) else np.asarray(P, dtype=complex)
        X, Y = self.split(basis)
        # relative to the whole coordinate block: cond(X) alone is blind to X ~ 0
        smin = np.linalg.svd(X, compute_uv=False)[-1]
        if smin * cond_max <= np.linalg.norm(np.vstack([X, Y]), 2):
            raise ChartDomainError("plane is not transverse to the chart complement")
        return np.linalg.solve(X.T, Y.T).T

    def velocity(self, tangent_vectors) -> np.ndarray:
        """Chart velocity at ``B = 0`` of a plane moving as ``p + t W``."""
        _, Y = self.split(tangent_vectors)
        return Y


def fiber_embed_pushforward(J, A, tol: float = 1e-10) -> np.ndarray:
    """Closed-form graph-chart velocity of ``psi`` along the fiber tangent ``A``.

    The chart is :meth:`GraphChart.at` ``(J)``.  Along any curve with
    ``J' = A`` the projector ``P01 = (1 + iJ)/2`` moves by ``(i/2) A``, so the
    plane moves by ``(i/2) A p``.  For ``A = J A0`` this is ``-A0/2``.
    """
    J = check_acs(J)
    A = np.asarray(A, dtype=float)
    check_tangent(J, A, tol)
    chart = GraphChart.at(J)
    return chart.velocity(0.5j * A @ chart.anchor)


def map_in_chart(J, A) -> np.ndarray:
    """Matrix of ``A`` restricted to ``V^{0,1}_J -> V^{1,0}_J`` in the bases of :meth:`GraphChart.at`."""
    chart = GraphChart.at(J)
    return chart.velocity(np.asarray(A) @ chart.anchor)


def grass_vertical_structure(B) -> np.ndarray:
    """Complex structure of the Grassmannian in a graph chart: multiplication by ``i``."""
    return 1j * np.asarray(B)


def fiber_embed_pushforward_fd(J, A, h: float = 1e-3) -> np.ndarray:
    """FD oracle for :func:`fiber_embed_pushforward`.

    Differentiates the chart coordinates of ``psi`` along
    ``exp(-tA0/2) J exp(tA0/2)`` with ``A0 = -J A``, whose velocity at 0 is
    ``A``; one Richardson level.
    """
    J = check_acs(J)
    A = np.asarray(A, dtype=float)
    check_tangent(J, A)
    A0 = -J @ A
    chart = GraphChart.at(J)

    def coord(t):
        return chart.inverse(fiber_embed(conjugation_flow(J, A0, t)))

    def central(step):
        return (coord(step) - coord(-step)) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


def holomorphicity_residual(J, A) -> float:
    """``|psi_*(JA) - i psi_*(A)|`` using the closed form."""
    J = np.asarray(J, dtype=float)
    lhs = fiber_embed_pushforward(J, J @ A)
    rhs = grass_vertical_structure(fiber_embed_pushforward(J, A))
    return float(np.max(np.abs(lhs - rhs)))
