"""Calculus on a coordinate box: finite differences, forms, types, Nijenhuis.

Conventions
-----------
* A k-form at a point is a totally antisymmetric array of shape ``(m,)*k``
  with ``omega[i, j] = omega(e_i, e_j)``; ``dx1 ^ dx2`` has ``[0, 1] = 1``.
* Fields are plain callables ``x -> ndarray``.  Derivative arrays put the
  differentiation index first: ``D[k] = d/dx_k f``.
* ``pi10 = (1 - iI)/2`` and ``pi01 = (1 + iI)/2``; complexified pairings are
  complex bilinear.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .core_linalg import AlgebraError, check_acs, eigenprojectors

DEFAULT_STEP = 1e-3


class DomainError(ValueError):
    """A finite-difference stencil leaves the chart domain."""


@dataclass(frozen=True)
class ChartSpec:
    """A coordinate box with sampling and FD defaults."""

    lo: np.ndarray
    hi: np.ndarray
    samples: int = 8
    seed: int = 0
    fd_step: float = DEFAULT_STEP
    tol: float = 1e-6
    complex_dim: int | None = field(default=None)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("chart domain must be a nonempty box")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        if self.samples < 0:
            raise ValueError("samples must be nonnegative")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.complex_dim is not None and 2 * self.complex_dim != lo.size:
            raise ValueError("a complex chart needs even real dimension")

    @property
    def dim(self) -> int:
        return self.lo.size

    def check_interior(self, x, h: float | None = None) -> None:
        h = self.fd_step if h is None else h
        x = np.asarray(x, dtype=float)
        if np.any(x - 2 * h < self.lo) or np.any(x + 2 * h > self.hi):
            raise DomainError(f"point {x} is within 2h={2 * h:g} of the chart boundary")

    def sample_points(self, count: int | None = None, rng=None) -> np.ndarray:
        count = self.samples if count is None else count
        rng = np.random.default_rng(self.seed) if rng is None else rng
        margin = 5 * self.fd_step
        lo, hi = self.lo + margin, self.hi - margin
        return lo + (hi - lo) * rng.random((count, self.dim))

    def replace(self, **kw) -> "ChartSpec":
        vals = dict(lo=self.lo, hi=self.hi, samples=self.samples, seed=self.seed,
                    fd_step=self.fd_step, tol=self.tol, complex_dim=self.complex_dim)
        vals.update(kw)
        return ChartSpec(**vals)


# ---------------------------------------------------------------------------
# finite differences


def _richardson(f, x, d, h):
    def central(step):
        return (np.asarray(f(x + step * d)) - np.asarray(f(x - step * d))) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


def fd_directional(f, x, v, h: float = DEFAULT_STEP, spec: ChartSpec | None = None):
    """Derivative of ``f`` at ``x`` along ``v`` (central, one Richardson level)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if spec is not None:
        spec.check_interior(x, h * max(1.0, float(np.max(np.abs(v)))))
    return _richardson(f, x, v, h)


def fd_derivative(f, x, k: int, h: float = DEFAULT_STEP, spec: ChartSpec | None = None):
    """``d f / d x_k`` at ``x``; error ``O(h^4)`` for smooth ``f``."""
    x = np.asarray(x, dtype=float)
    e = np.zeros_like(x)
    e[k] = 1.0
    return fd_directional(f, x, e, h, spec)


def fd_jacobian(f, x, h: float = DEFAULT_STEP, spec: ChartSpec | None = None) -> np.ndarray:
    """All partial derivatives stacked along a new leading axis."""
    x = np.asarray(x, dtype=float)
    return np.stack([fd_derivative(f, x, k, h, spec) for k in range(x.size)])


# ---------------------------------------------------------------------------
# forms


def antisymmetrize(T) -> np.ndarray:
    T = np.asarray(T)
    k = T.ndim
    out = np.zeros_like(T)
    for perm in itertools.permutations(range(k)):
        sign = _perm_sign(perm)
        out = out + sign * np.transpose(T, perm)
    return out / factorial(k)


def _perm_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def wedge_1forms(*alphas) -> np.ndarray:
    """``a1 ^ ... ^ ak`` as a determinant-normalized antisymmetric array."""
    T = alphas[0]
    for a in alphas[1:]:
        T = np.multiply.outer(T, a)
    return antisymmetrize(T) * factorial(len(alphas))


def exterior_derivative(omega, x, h: float = DEFAULT_STEP, spec: ChartSpec | None = None) -> np.ndarray:
    """``d omega`` at ``x`` for a k-form field ``omega`` (``k >= 0``).

    ``(d omega)_{i0..ik} = sum_j (-1)^j d_{ij} omega_{i0..^ij..ik}``.
    """
    D = fd_jacobian(omega, x, h, spec)
    out = np.zeros_like(D)
    for j in range(D.ndim):
        out = out + (-1) ** j * np.moveaxis(D, 0, j)
    return out


def form_norm(T) -> float:
    T = np.asarray(T)
    return float(np.max(np.abs(T))) if T.size else 0.0


def pq_decompose(omega, I) -> dict[tuple[int, int], np.ndarray]:
    """Split a k-form into ``(p, q)`` parts with respect to ``I``.

    ``omega^{p,q}`` is the sum of ``omega(pi_1 ., ..., pi_k .)`` over all
    slot assignments with ``p`` copies of ``pi10`` and ``q`` of ``pi01``.
    The parts are complex arrays summing to ``omega``.
    """
    omega = np.asarray(omega)
    I = check_acs(I)
    k = omega.ndim
    P10, P01 = eigenprojectors(I)
    letters = "abcdefgh"[:k]
    idx = "ijklmnop"[:k]
    spec = idx + "," + ",".join(f"{i}{a}" for i, a in zip(idx, letters)) + "->" + letters
    parts = {(p, k - p): np.zeros(omega.shape, dtype=complex) for p in range(k + 1)}
    for assign in itertools.product((0, 1), repeat=k):
        projs = [P10 if a == 0 else P01 for a in assign]
        p = assign.count(0)
        parts[(p, k - p)] += np.einsum(spec, omega, *projs)
    return parts


def form_type_part(omega, I, p: int, q: int) -> np.ndarray:
    return pq_decompose(omega, I)[(p, q)]


def fundamental_form(g, I) -> np.ndarray:
    """``w(u, v) = g(Iu, v)`` as a matrix, i.e. ``I.T @ g``."""
    return np.asarray(I).T @ np.asarray(g)


# ---------------------------------------------------------------------------
# Nijenhuis tensors


def lie_bracket(X, Y, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """``[X, Y] = D_X Y - D_Y X`` for vector fields given as callables."""
    x = np.asarray(x, dtype=float)
    return fd_directional(Y, x, X(x), h) - fd_directional(X, x, Y(x), h)


def nijenhuis(K, X, Y, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """``N(X,Y) = [KX,KY] - K[KX,Y] - K[X,KY] - [X,Y]`` by finite differences.

    ``K`` is an endomorphism field and ``X``, ``Y`` are vector fields, all
    callables on the chart.
    """
    x = np.asarray(x, dtype=float)

    def KX(y):
        return K(y) @ X(y)

    def KY(y):
        return K(y) @ Y(y)

    Kx = K(x)
    return (
        lie_bracket(KX, KY, x, h)
        - Kx @ lie_bracket(KX, Y, x, h)
        - Kx @ lie_bracket(X, KY, x, h)
        - lie_bracket(X, Y, x, h)
    )


def constant_field(v):
    v = np.asarray(v, dtype=float)
    return lambda y: v


def linear_field(v, L, x0):
    """``y -> v + L (y - x0)``; equals ``v`` at ``x0`` with arbitrary first jet."""
    v = np.asarray(v, dtype=float)
    L = np.asarray(L, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    return lambda y: v + L @ (np.asarray(y) - x0)


def nijenhuis_I(I, x, v, w, h: float = DEFAULT_STEP, spec: ChartSpec | None = None) -> np.ndarray:
    """Nijenhuis tensor of the endomorphism field ``I`` on the vectors ``v, w``.

    With constant extensions the brackets reduce to derivatives of ``I``:
    ``N = (D_{Iv} I) w - (D_{Iw} I) v + I (D_w I) v - I (D_v I) w``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    Ix = check_acs(I(x), tol=1e-9)
    if spec is not None:
        spec.check_interior(x, h)
    dI = fd_jacobian(I, x, h)

    def D(u):
        return np.tensordot(u, dI, axes=1)

    return D(Ix @ v) @ w - D(Ix @ w) @ v + Ix @ D(w) @ v - Ix @ D(v) @ w


def nijenhuis_norm(I, x, h: float = DEFAULT_STEP) -> float:
    """Max of ``|N^I(e_a, e_b)|`` over coordinate pairs."""
    m = np.asarray(x).size
    eye = np.eye(m)
    return max(
        float(np.max(np.abs(nijenhuis_I(I, x, eye[a], eye[b], h))))
        for a in range(m) for b in range(a + 1, m)
    )


# ---------------------------------------------------------------------------
# d^c and Hodge theory


def neg_dc(w, I, x, h: float = DEFAULT_STEP, integrability_tol: float = 1e-6) -> np.ndarray:
    """``-d^c w = i(d - dbar) w = i((dw)^{2,1} - (dw)^{1,2})`` at ``x``.

    ``w`` is a (1,1)-form field and ``I`` must be integrable near ``x``
    (checked through its Nijenhuis tensor).  The result is real.
    """
    x = np.asarray(x, dtype=float)
    res = nijenhuis_norm(I, x, h)
    if res > integrability_tol:
        raise AlgebraError(f"I is not integrable at x (Nijenhuis residual {res:.2e})")
    dw = exterior_derivative(w, x, h)
    parts = pq_decompose(dw, I(x))
    H = 1j * (parts[(2, 1)] - parts[(1, 2)])
    return H.real


def pfaffian4(W) -> float:
    W = np.asarray(W)
    return float(W[0, 1] * W[2, 3] - W[0, 2] * W[1, 3] + W[0, 3] * W[1, 2])


def orientation_from_complex_structure(g, I) -> int:
    """Sign of ``w ^ w`` against the coordinate volume form (4d)."""
    pf = pfaffian4(fundamental_form(g, I))
    if pf == 0:
        raise AlgebraError("degenerate fundamental form")
    return 1 if pf > 0 else -1


def _levi_civita_symbol4() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        eps[perm] = _perm_sign(perm)
    return eps


_EPS4 = _levi_civita_symbol4()


def hodge_star_2form(omega, g, orientation: int = 1) -> np.ndarray:
    """Hodge star of a 2-form on a 4-dimensional inner-product space."""
    omega = np.asarray(omega)
    g = np.asarray(g, dtype=float)
    if omega.shape != (4, 4) or g.shape != (4, 4):
        raise ValueError("hodge_star_2form is defined for m = 4 only")
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    ginv = np.linalg.inv(g)
    raised = ginv @ omega @ ginv.T
    vol = orientation * np.sqrt(np.linalg.det(g))
    return 0.5 * vol * np.einsum("abcd,ab->cd", _EPS4, raised)


def hodge_split_4d(omega, g, orientation: int = 1):
    """``(omega+, omega-)`` with ``*omega(+/-) = +/- omega(+/-)``."""
    star = hodge_star_2form(omega, g, orientation)
    return 0.5 * (omega + star), 0.5 * (omega - star)


def form_inner(a, b, g) -> complex:
    """Bilinear pairing of 2-forms, normalized so that ``<e1^e2, e1^e2> = 1`` for ``g = 1``."""
    ginv = np.linalg.inv(np.asarray(g))
    return 0.5 * np.einsum("ab,cd,ac,bd->", a, b, ginv, ginv)


def two_form_basis(m: int) -> np.ndarray:
    out = []
    for i, j in itertools.combinations(range(m), 2):
        e = np.zeros((m, m))
        e[i, j], e[j, i] = 1.0, -1.0
        out.append(e)
    return np.array(out)


def eigenforms_of_star(g, orientation: int, sign: int) -> np.ndarray:
    """Basis of the ``sign``-eigenspace of the Hodge star on 2-forms."""
    basis = two_form_basis(4)
    M = np.array([hodge_star_2form(b, g, orientation)[np.triu_indices(4, 1)] for b in basis]).T
    evals, evecs = np.linalg.eig(M)
    sel = np.abs(evals - sign) < 1e-8
    vecs = np.real_if_close(evecs[:, sel])
    return np.tensordot(np.real(vecs).T, basis, axes=1)


def asd_containment_residuals(g, I, orientation: int | None = None) -> dict[str, float]:
    """Residuals of ``Lambda^- = Lambda^{1,1}_0`` and ``w in Lambda^+`` (4d).

    Returns the largest (2,0)+(0,2) component of an antiselfdual basis, the
    largest pairing of antiselfdual forms with ``w``, the dimension defect
    against ``dim Lambda^{1,1}_0 = 3`` and the antiselfdual part of ``w``.
    """
    g = np.asarray(g, dtype=float)
    orientation = orientation_from_complex_structure(g, I) if orientation is None else orientation
    w = fundamental_form(g, I)
    minus = eigenforms_of_star(g, orientation, -1)
    type_res = 0.0
    trace_res = 0.0
    for b in minus:
        parts = pq_decompose(b, I)
        type_res = max(type_res, form_norm(parts[(2, 0)]), form_norm(parts[(0, 2)]))
        trace_res = max(trace_res, abs(form_inner(b, w, g)))
    # independent count of trace-free (1,1) forms
    basis = two_form_basis(4)
    cols = []
    for b in basis:
        parts = pq_decompose(b, I)
        cols.append(np.concatenate([parts[(2, 0)].ravel(), parts[(0, 2)].ravel(),
                                    [form_inner(b, w, g)]]))
    C = np.array(cols).T
    s = np.linalg.svd(C, compute_uv=False)
    dim11_0 = 6 - int(np.sum(s > 1e-9 * s[0]))
    _, w_minus = hodge_split_4d(w, g, orientation)
    return {
        "asd_type_residual": type_res,
        "asd_trace_residual": float(trace_res),
        "dimension_defect": float(abs(len(minus) - dim11_0)),
        "w_antiselfdual_part": form_norm(w_minus),
    }
