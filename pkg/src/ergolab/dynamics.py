"""Constructive trace-preserving dynamics on the matrix algebra.

Each kind is positive, unital and trace-preserving by construction:

  UnitaryConjugation(u):      x -> u x u*            (*-automorphism)
  PermutationConjugation(pi): x -> P x P*             (*-automorphism)
  KrausChannel(w_i, u_i):     x -> sum w_i u_i* x u_i (mixed-unitary channel)
  Composition(parts):         left-to-right composition
  Power(base, k):             k-fold iteration

The superoperator is the matrix of the map on the Hilbert space L^2 with
inner product tau(x* y), expressed in the orthonormal basis sqrt(n)*e_ij;
with row-major vectorization that is exactly the matrix sending vec(x) to
vec(alpha(x)).  A trace-preserving *-homomorphism of the full matrix
algebra is an inner automorphism, hence never ergodic for n >= 2; ergodic
homomorphism scenarios therefore live on the diagonal subalgebra via
permutations, while ergodic non-homomorphism scenarios use channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraCtx, Operator, operator_from_json, operator_to_json, _opnorm
from .sampling import random_hermitian, random_operator

UNIMODULAR_TOL = 1e-8  # clustering tolerance on | |mu| - 1 | and on angles

__all__ = [
    "Dynamics",
    "UnitaryConjugation",
    "PermutationConjugation",
    "KrausChannel",
    "Composition",
    "Power",
    "DynamicsReport",
    "apply",
    "iterate",
    "superoperator",
    "validate",
    "vec",
    "unvec",
    "dynamics_to_json",
    "dynamics_from_json",
]


def vec(m: np.ndarray) -> np.ndarray:
    """Row-major vectorization of a square matrix."""
    return np.ravel(m)


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.reshape(v, (n, n))


class Dynamics:
    """Base class; subclasses implement apply_mat on raw arrays."""

    ctx: AlgebraCtx

    def apply_mat(self, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: Operator) -> Operator:
        if x.ctx.dim != self.ctx.dim:
            raise ValueError("operator dimension does not match the dynamics")
        return Operator(x.ctx, self.apply_mat(x.mat))

    @property
    def is_homomorphism(self) -> bool:
        """Structural flag: true for the kinds that are *-homomorphisms
        by construction (conjugations, and compositions/powers thereof)."""
        raise NotImplementedError

    def superoperator_mat(self) -> np.ndarray:
        """Default: build columns by applying to matrix units."""
        n = self.ctx.dim
        s = np.empty((n * n, n * n), dtype=complex)
        unit = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                unit[i, j] = 1.0
                s[:, i * n + j] = vec(self.apply_mat(unit))
                unit[i, j] = 0.0
        return s


@dataclass(frozen=True, eq=False)
class UnitaryConjugation(Dynamics):
    ctx: AlgebraCtx
    u: Operator

    def __post_init__(self):
        defect = _opnorm(self.u.mat.conj().T @ self.u.mat - np.eye(self.ctx.dim))
        if defect > self.ctx.tol:
            raise ValueError(f"u is not unitary within tol: defect {defect:.3e}")

    def apply_mat(self, m):
        return self.u.mat @ m @ self.u.mat.conj().T

    @property
    def is_homomorphism(self):
        return True

    def superoperator_mat(self):
        return np.kron(self.u.mat, self.u.mat.conj())


@dataclass(frozen=True, eq=False)
class PermutationConjugation(Dynamics):
    ctx: AlgebraCtx
    perm: tuple

    def __post_init__(self):
        p = tuple(int(i) for i in self.perm)
        if sorted(p) != list(range(self.ctx.dim)):
            raise ValueError(f"not a permutation of 0..{self.ctx.dim - 1}: {p}")
        object.__setattr__(self, "perm", p)
        inv = np.empty(self.ctx.dim, dtype=int)
        inv[list(p)] = np.arange(self.ctx.dim)
        object.__setattr__(self, "_inv", inv)

    def apply_mat(self, m):
        # (P x P*)[a, b] = x[perm^-1(a), perm^-1(b)]; exact, no rounding
        inv = self._inv
        return m[np.ix_(inv, inv)]

    @property
    def is_homomorphism(self):
        return True

    def permutation_matrix(self) -> np.ndarray:
        p = np.zeros((self.ctx.dim, self.ctx.dim), dtype=complex)
        for j, pj in enumerate(self.perm):
            p[pj, j] = 1.0
        return p


@dataclass(frozen=True, eq=False)
class KrausChannel(Dynamics):
    """Convex mixture of unitary conjugations x -> sum_i w_i u_i* x u_i.

    Positive, unital and trace-preserving for any positive weights summing
    to one; a *-homomorphism only in the degenerate single-term case.
    """

    ctx: AlgebraCtx
    weights: tuple
    unitaries: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != len(self.unitaries) or not w:
            raise ValueError("weights and unitaries must be nonempty and match")
        if any(v <= 0 for v in w):
            raise ValueError("weights must be positive")
        if abs(sum(w) - 1.0) > self.ctx.tol:
            raise ValueError(f"weights must sum to 1, got {sum(w)!r}")
        for u in self.unitaries:
            defect = _opnorm(u.mat.conj().T @ u.mat - np.eye(self.ctx.dim))
            if defect > self.ctx.tol:
                raise ValueError(f"Kraus unitary defect {defect:.3e} exceeds tol")
        object.__setattr__(self, "weights", w)

    def apply_mat(self, m):
        out = np.zeros_like(m, dtype=complex)
        for w, u in zip(self.weights, self.unitaries):
            out += w * (u.mat.conj().T @ m @ u.mat)
        return out

    @property
    def is_homomorphism(self):
        return len(self.weights) == 1

    def superoperator_mat(self):
        n = self.ctx.dim
        s = np.zeros((n * n, n * n), dtype=complex)
        for w, u in zip(self.weights, self.unitaries):
            s += w * np.kron(u.mat.conj().T, u.mat.T)
        return s


@dataclass(frozen=True, eq=False)
class Composition(Dynamics):
    """Apply parts left to right: parts[0] first."""

    ctx: AlgebraCtx
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composition needs at least one part")
        for p in self.parts:
            if p.ctx.dim != self.ctx.dim:
                raise ValueError("composition parts live in different dimensions")

    def apply_mat(self, m):
        for p in self.parts:
            m = p.apply_mat(m)
        return m

    @property
    def is_homomorphism(self):
        return all(p.is_homomorphism for p in self.parts)

    def superoperator_mat(self):
        s = np.eye(self.ctx.dim ** 2, dtype=complex)
        for p in self.parts:
            s = p.superoperator_mat() @ s
        return s


@dataclass(frozen=True, eq=False)
class Power(Dynamics):
    ctx: AlgebraCtx
    base: Dynamics
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("power exponent must be non-negative")

    def apply_mat(self, m):
        for _ in range(self.k):
            m = self.base.apply_mat(m)
        return m

    @property
    def is_homomorphism(self):
        return self.base.is_homomorphism

    def superoperator_mat(self):
        return np.linalg.matrix_power(self.base.superoperator_mat(), self.k)


def apply(d: Dynamics, x: Operator) -> Operator:
    return d(x)


def iterate(d: Dynamics, x: Operator, k: int):
    """Orbit [x, alpha(x), ..., alpha^k(x)] by repeated application."""
    if k < 0:
        raise ValueError("k must be non-negative")
    out = [x]
    m = x.mat
    for _ in range(k):
        m = d.apply_mat(m)
        out.append(Operator(x.ctx, m))
    return out


def superoperator(d: Dynamics) -> np.ndarray:
    """Matrix of the dynamics on L^2 in the orthonormal basis sqrt(n)*e_ij."""
    return d.superoperator_mat()


@dataclass
class DynamicsReport:
    """Validation summary; failures are carried here, never raised."""

    trace_preserving: bool
    positive_on_samples: bool
    contraction_inf: bool
    homomorphism: bool
    ergodic: bool
    weakly_mixing: bool
    fixed_space_dim: int
    unimodular_spectrum: list
    spectral_gap: float | None = None
    lp_double_bound: bool = True
    fixed_contains_identity: bool = True
    max_trace_defect: float = 0.0
    max_contraction_excess: float = 0.0
    homomorphism_defect: float = 0.0

    def to_json(self) -> dict:
        return {
            "trace_preserving": self.trace_preserving,
            "positive_on_samples": self.positive_on_samples,
            "contraction_inf": self.contraction_inf,
            "homomorphism": self.homomorphism,
            "ergodic": self.ergodic,
            "weakly_mixing": self.weakly_mixing,
            "fixed_space_dim": self.fixed_space_dim,
            "unimodular_spectrum": list(self.unimodular_spectrum),
            "spectral_gap": self.spectral_gap,
            "lp_double_bound": self.lp_double_bound,
            "fixed_contains_identity": self.fixed_contains_identity,
            "max_trace_defect": self.max_trace_defect,
            "max_contraction_excess": self.max_contraction_excess,
            "homomorphism_defect": self.homomorphism_defect,
        }


def _homomorphism_defect(d: Dynamics) -> float:
    """Exact multiplicativity check on all matrix-unit pairs.

    Bilinearity makes the basis verification complete: the map is a
    homomorphism iff alpha(e_ij e_kl) = alpha(e_ij) alpha(e_kl) for all
    i,j,k,l, and e_ij e_kl = delta_jk e_il.
    """
    n = d.ctx.dim
    a = np.empty((n, n, n, n), dtype=complex)
    unit = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            unit[i, j] = 1.0
            a[i, j] = d.apply_mat(unit)
            unit[i, j] = 0.0
    worst = 0.0
    for i in range(n):
        for j in range(n):
            prod = np.einsum("ab,klbc->klac", a[i, j], a)
            target = np.zeros_like(prod)
            target[j] = a[i]  # delta_{jk} alpha(e_il)
            worst = max(worst, float(np.abs(prod - target).max()))
    return worst


def spectral_profile(d: Dynamics, s: np.ndarray | None = None):
    """(fixed_space_dim, unimodular angles, spectral gap, identity-in-fixed).

    fixed_space_dim is the null-space dimension of S - I (rank-revealing
    SVD, robust for the non-normal channel case); unimodular eigenvalues
    are clustered at tolerance 1e-8 on modulus and angle.
    """
    if s is None:
        s = superoperator(d)
    n2 = s.shape[0]
    scale = max(1.0, float(np.linalg.norm(s, ord=2)))
    sv = np.linalg.svd(s - np.eye(n2), compute_uv=False)
    fixed_dim = int(np.count_nonzero(sv <= UNIMODULAR_TOL * scale))
    eigvals = np.linalg.eigvals(s)
    mods = np.abs(eigvals)
    uni = eigvals[mods >= 1.0 - UNIMODULAR_TOL]
    angles = np.sort(np.mod(np.angle(uni) / (2 * np.pi), 1.0))
    clustered = []
    for t in angles:
        if not clustered or min(abs(t - clustered[-1]), 1 - abs(t - clustered[-1])) > UNIMODULAR_TOL:
            clustered.append(float(t))
    if clustered and clustered[0] <= UNIMODULAR_TOL and clustered[-1] >= 1 - UNIMODULAR_TOL:
        clustered.pop()  # wrap-around duplicate of angle 0
    sub = mods[mods < 1.0 - UNIMODULAR_TOL]
    gap = float(1.0 - sub.max()) if sub.size else None
    # does the fixed space contain the identity direction?
    v_id = vec(np.eye(d.ctx.dim, dtype=complex))
    v_id = v_id / np.linalg.norm(v_id)
    contains_id = bool(np.linalg.norm(s @ v_id - v_id) <= 1e-7 * scale)
    return fixed_dim, clustered, gap, contains_id


def validate(d: Dynamics, samples: int = 16, seed: int = 0) -> DynamicsReport:
    """Check the standing hypotheses and classify the dynamics.

    Trace preservation, positivity and the uniform-norm contraction are
    checked on deterministic pseudo-random samples from the seed; the
    homomorphism property is checked exactly on all matrix-unit pairs;
    ergodicity and weak mixing are read off the superoperator spectrum
    (ergodic iff the fixed space is one-dimensional; weakly mixing iff 1
    is the only unimodular eigenvalue and its eigenspace is the scalars).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    gen = np.random.default_rng(seed)
    ctx = d.ctx
    tol = ctx.tol

    max_tr, max_contr = 0.0, 0.0
    positive_ok = True
    lp_double_ok = True
    for _ in range(samples):
        x = random_operator(ctx, gen)
        y = d(x)
        max_tr = max(max_tr, abs(complex(np.trace(y.mat) - np.trace(x.mat))) / ctx.dim)
        max_contr = max(max_contr, y.norm_inf() - x.norm_inf())
        h = random_hermitian(ctx, gen)
        lp_double_ok &= d(h).norm2() <= 2.0 * h.norm2() + tol
        z = random_operator(ctx, gen)
        pos = d(z.h @ z)
        w = np.linalg.eigvalsh((pos.mat + pos.mat.conj().T) / 2.0)
        positive_ok &= bool(w.min() >= -tol * max(1.0, abs(w.max())))

    hom_defect = _homomorphism_defect(d)
    homomorphism = hom_defect <= max(tol, 1e-9)

    fixed_dim, uni_angles, gap, contains_id = spectral_profile(d)
    ergodic = fixed_dim == 1 and contains_id
    weakly_mixing = ergodic and all(a <= UNIMODULAR_TOL or 1 - a <= UNIMODULAR_TOL for a in uni_angles)

    return DynamicsReport(
        trace_preserving=max_tr <= tol * 10,
        positive_on_samples=positive_ok,
        contraction_inf=max_contr <= tol * 10,
        homomorphism=homomorphism,
        ergodic=ergodic,
        weakly_mixing=weakly_mixing,
        fixed_space_dim=fixed_dim,
        unimodular_spectrum=uni_angles,
        spectral_gap=gap,
        lp_double_bound=lp_double_ok,
        fixed_contains_identity=contains_id,
        max_trace_defect=max_tr,
        max_contraction_excess=max(max_contr, 0.0),
        homomorphism_defect=hom_defect,
    )


def dynamics_to_json(d: Dynamics) -> dict:
    if isinstance(d, UnitaryConjugation):
        return {"kind": "unitary", "u": operator_to_json(d.u)}
    if isinstance(d, PermutationConjugation):
        return {"kind": "permutation", "perm": list(d.perm)}
    if isinstance(d, KrausChannel):
        return {
            "kind": "kraus",
            "terms": [
                {"weight": w, "u": operator_to_json(u)}
                for w, u in zip(d.weights, d.unitaries)
            ],
        }
    if isinstance(d, Composition):
        return {"kind": "composition", "parts": [dynamics_to_json(p) for p in d.parts]}
    if isinstance(d, Power):
        return {"kind": "power", "base": dynamics_to_json(d.base), "k": d.k}
    raise ValueError(f"unknown dynamics type {type(d)!r}")


def dynamics_from_json(data: dict, ctx: AlgebraCtx) -> Dynamics:
    kind = data.get("kind")
    if kind == "unitary":
        return UnitaryConjugation(ctx, operator_from_json(data["u"], ctx))
    if kind == "permutation":
        return PermutationConjugation(ctx, tuple(data["perm"]))
    if kind == "kraus":
        weights = tuple(t["weight"] for t in data["terms"])
        unitaries = tuple(operator_from_json(t["u"], ctx) for t in data["terms"])
        return KrausChannel(ctx, weights, unitaries)
    if kind == "composition":
        return Composition(ctx, tuple(dynamics_from_json(p, ctx) for p in data["parts"]))
    if kind == "power":
        return Power(ctx, dynamics_from_json(data["base"], ctx), int(data["k"]))
    raise ValueError(f"unknown dynamics kind {kind!r}")
