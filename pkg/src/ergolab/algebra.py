"""Finite-dimensional tracial matrix algebra: M_n(C) with tau = Tr/n.

Everything downstream trades in three currencies defined here: operators
(square complex matrices tied to an ambient context), the L^p norm scale
computed from singular values, and the projection lattice used for
convergence witnesses.  The trace is normalized so tau(identity) = 1,
which makes every trace defect tau(e_perp) directly comparable to an
epsilon budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AlgebraCtx",
    "Operator",
    "Projection",
    "trace",
    "inner",
    "lp_norm",
    "absval",
    "spectral_projection",
    "meet",
    "measure_nbhd",
    "operator_to_json",
    "operator_from_json",
]


@dataclass(frozen=True)
class AlgebraCtx:
    """Ambient algebra: matrix size and the global numerical tolerance."""

    dim: int
    tol: float = 1e-10

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.tol < 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")

    def identity(self) -> "Operator":
        return Operator(self, np.eye(self.dim, dtype=complex))

    def zero(self) -> "Operator":
        return Operator(self, np.zeros((self.dim, self.dim), dtype=complex))

    def matrix_unit(self, i: int, j: int) -> "Operator":
        m = np.zeros((self.dim, self.dim), dtype=complex)
        m[i, j] = 1.0
        return Operator(self, m)

    def diag(self, entries) -> "Operator":
        return Operator(self, np.diag(np.asarray(entries, dtype=complex)))

    def from_array(self, a) -> "Operator":
        return Operator(self, np.asarray(a, dtype=complex))


@dataclass(frozen=True, eq=False)
class Operator:
    """An element of M_n(C), immutable after construction.

    Arithmetic (+, -, scalar *, @) stays inside the ambient context; the
    adjoint is the entrywise conjugate transpose, available as ``.h``.
    """

    ctx: AlgebraCtx
    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=complex, copy=True)
        if m.shape != (self.ctx.dim, self.ctx.dim):
            raise ValueError(
                f"operator shape {m.shape} does not match context dim {self.ctx.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def h(self) -> "Operator":
        """Adjoint (conjugate transpose)."""
        return Operator(self.ctx, self.mat.conj().T)

    def _check_same_ctx(self, other: "Operator"):
        if self.ctx != other.ctx:
            raise ValueError("operators live in different algebra contexts")

    def __add__(self, other):
        self._check_same_ctx(other)
        return Operator(self.ctx, self.mat + other.mat)

    def __sub__(self, other):
        self._check_same_ctx(other)
        return Operator(self.ctx, self.mat - other.mat)

    def __neg__(self):
        return Operator(self.ctx, -self.mat)

    def __mul__(self, scalar):
        return Operator(self.ctx, self.mat * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.ctx, self.mat / complex(scalar))

    def __matmul__(self, other):
        self._check_same_ctx(other)
        return Operator(self.ctx, self.mat @ other.mat)

    def is_hermitian(self, tol=None) -> bool:
        t = self.ctx.tol if tol is None else tol
        return _opnorm(self.mat - self.mat.conj().T) <= max(t, 64 * np.finfo(float).eps * _opnorm(self.mat))

    def norm2(self) -> float:
        return math.sqrt(max(float(np.vdot(self.mat, self.mat).real) / self.ctx.dim, 0.0))

    def norm_inf(self) -> float:
        return _opnorm(self.mat)

    def allclose(self, other: "Operator", atol=1e-12) -> bool:
        return bool(np.allclose(self.mat, other.mat, atol=atol))


def _opnorm(m: np.ndarray) -> float:
    if not np.any(m):
        return 0.0
    return float(np.linalg.norm(m, ord=2))


def trace(x: Operator) -> complex:
    """Normalized trace tau(x) = Tr(x)/n; a tracial state on the algebra."""
    return complex(np.trace(x.mat)) / x.ctx.dim


def inner(x: Operator, y: Operator) -> complex:
    """L^2 inner product (x, y) = tau(x* y); conjugate-linear in x."""
    x._check_same_ctx(y)
    return complex(np.vdot(x.mat, y.mat)) / x.ctx.dim


def lp_norm(x: Operator, p) -> float:
    """L^p norm ||x||_p = (tau(|x|^p))^(1/p), computed from singular values.

    With the normalized trace this reads ((1/n) sum_i s_i^p)^(1/p); the
    p = inf case is the operator (uniform) norm max_i s_i.  Singular values
    are used instead of powers of |x| for stability near p = 1 and p = inf.
    """
    if p != math.inf and p < 1:
        raise ValueError(f"lp_norm requires p >= 1 or p = inf, got {p}")
    s = np.linalg.svd(x.mat, compute_uv=False)
    if p == math.inf:
        return float(s[0]) if s.size else 0.0
    if not np.any(s):
        return 0.0
    smax = float(s[0])
    # factor out the top singular value so large p does not overflow
    return smax * float(np.mean((s / smax) ** p)) ** (1.0 / p)


def absval(x: Operator) -> Operator:
    """Absolute value |x| = (x* x)^(1/2), via the SVD x = U s V*."""
    u, s, vh = np.linalg.svd(x.mat)
    return Operator(x.ctx, vh.conj().T @ (s[:, None] * vh))


@dataclass(frozen=True, eq=False)
class Projection:
    """Hermitian idempotent; the currency of the measure topology.

    Construction validates p = p* and p^2 = p to within ctx.tol in the
    operator 2-norm of the defect (basis-independent and cheap); both
    defects small forces the eigenvalues to sit near {0, 1}.
    """

    base: Operator

    def __post_init__(self):
        p = self.base.mat
        tol = self.base.ctx.tol
        d_adj = _opnorm(p - p.conj().T)
        d_idem = _opnorm(p @ p - p)
        if d_adj > tol or d_idem > tol:
            raise ValueError(
                f"not a projection within tol={tol:g}: "
                f"adjoint defect {d_adj:.3e}, idempotent defect {d_idem:.3e}"
            )

    @property
    def ctx(self) -> AlgebraCtx:
        return self.base.ctx

    @property
    def mat(self) -> np.ndarray:
        return self.base.mat

    def trace_value(self) -> float:
        return float(np.trace(self.mat).real) / self.ctx.dim

    def trace_defect(self) -> float:
        """tau of the complement, tau(identity - p)."""
        return 1.0 - self.trace_value()

    def rank(self) -> int:
        return int(round(np.trace(self.mat).real))

    @property
    def perp(self) -> "Projection":
        return Projection(self.ctx.identity() - self.base)

    def range_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of the range."""
        w, v = np.linalg.eigh(self.mat)
        return v[:, w > 0.5]

    @classmethod
    def from_range(cls, ctx: AlgebraCtx, basis: np.ndarray) -> "Projection":
        """Orthogonal projection onto the column span of ``basis``."""
        if basis.size == 0:
            return cls(ctx.zero())
        q, _ = np.linalg.qr(np.asarray(basis, dtype=complex))
        return cls(Operator(ctx, q @ q.conj().T))

    @classmethod
    def identity(cls, ctx: AlgebraCtx) -> "Projection":
        return cls(ctx.identity())

    @classmethod
    def zero(cls, ctx: AlgebraCtx) -> "Projection":
        return cls(ctx.zero())


def spectral_projection(x: Operator, interval) -> Projection:
    """Projection onto the span of eigenvectors of Hermitian x with
    eigenvalue in the closed interval [a, b].

    Realizes the spectral cuts e_lambda of the functional calculus; the
    result commutes with x up to rounding.
    """
    a, b = interval
    if not x.is_hermitian():
        raise ValueError("spectral_projection requires a Hermitian operator")
    w, v = np.linalg.eigh((x.mat + x.mat.conj().T) / 2.0)
    sel = (w >= a) & (w <= b)
    vs = v[:, sel]
    return Projection(Operator(x.ctx, vs @ vs.conj().T))


def meet(e: Projection, f: Projection) -> Projection:
    """Lattice meet e ^ f: projection onto the intersection of ranges.

    Computed from the null space of (1-e) + (1-f) at threshold ctx.tol:
    one Hermitian eigenproblem, no iteration.  Satisfies the subadditivity
    tau((e^f)_perp) <= tau(e_perp) + tau(f_perp).
    """
    if e.ctx != f.ctx:
        raise ValueError("projections live in different algebra contexts")
    ctx = e.ctx
    h = (np.eye(ctx.dim) - e.mat) + (np.eye(ctx.dim) - f.mat)
    w, v = np.linalg.eigh((h + h.conj().T) / 2.0)
    null = v[:, w <= max(ctx.tol, 1e-12)]
    if null.shape[1] == 0:
        return Projection.zero(ctx)
    return Projection(Operator(ctx, null @ null.conj().T))


def meet_all(projections) -> Projection:
    """Iterated meet of a nonempty list of projections."""
    ps = list(projections)
    out = ps[0]
    for p in ps[1:]:
        out = meet(out, p)
    return out


def measure_nbhd(x: Operator, eps: float, delta: float):
    """Membership of x in the measure-topology neighbourhood V(eps, delta).

    x belongs to V(eps, delta) when some projection e satisfies
    ||x e||_inf <= delta and tau(e_perp) <= eps.  In finite dimension the
    optimal witness is a spectral cut: e projects onto the right-singular
    subspace of singular values <= delta, so membership holds exactly when
    the fraction of singular values exceeding delta is at most eps.

    Returns ``(member, witness)`` where the witness is that projection
    (or None when membership fails).
    """
    if eps < 0 or delta < 0:
        raise ValueError("eps and delta must be non-negative")
    n = x.ctx.dim
    _, s, vh = np.linalg.svd(x.mat)
    exceed = int(np.count_nonzero(s > delta))
    member = (exceed / n) <= eps + 1e-15
    if not member:
        return False, None
    keep = vh[s <= delta, :].conj().T
    if keep.shape[1] == n:
        return True, Projection.identity(x.ctx)
    return True, Projection(Operator(x.ctx, keep @ keep.conj().T))


def operator_to_json(x: Operator) -> dict:
    """Serialize to the matrix exchange format {"n", "re", "im"}."""
    return {
        "n": x.ctx.dim,
        "re": x.mat.real.tolist(),
        "im": x.mat.imag.tolist(),
    }


def operator_from_json(data: dict, ctx: AlgebraCtx | None = None) -> Operator:
    n = int(data["n"])
    if ctx is None:
        ctx = AlgebraCtx(n)
    elif ctx.dim != n:
        raise ValueError(f"matrix dim {n} does not match context dim {ctx.dim}")
    m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return Operator(ctx, m)
