"""Spectral layer on L^2: eigenoperators, the Kronecker factor, correlation
sequences and their atomic spectral measures.

For a trace-preserving *-homomorphism the superoperator is unitary, so the
whole of L^2 is spanned by unimodular eigenoperators and the Kronecker
factor K (closed span of those eigenoperators) is everything; the
orthocomplement K_perp is {0}.  "x in K_perp" behaviour is therefore
emulated in two documented ways: commutative permutation dynamics whose
spectrum consists of many atoms, and mixed-unitary channels whose traceless
sector has spectrum strictly inside the disc, where gamma_x decays
geometrically and the continuous part of the measure is shadowed by that
decay.  Every report built on top of this module carries that caveat.

Sign convention (fixed by the reconstruction identity): the measure with
atoms (theta_b, mass_b) reproduces the correlation sequence via
gamma(l) = sum_b mass_b * exp(+2 pi i l theta_b); consequently the Cesaro
atom estimator evaluated at t recovers the mass at angle (-t mod 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import AlgebraCtx, Operator, inner
from .dynamics import Dynamics, superoperator, vec, unvec, UNIMODULAR_TOL
from .errors import HypothesisViolation

ANGLE_CLUSTER_TOL = 1e-8  # eigenvalue angles closer than this pool their mass

__all__ = [
    "EigenOperator",
    "EigenBasis",
    "KroneckerSplit",
    "CorrelationSequence",
    "SpectralMeasure",
    "correlation",
    "check_positive_definite",
    "eigen_split",
    "kronecker_split",
    "atom_estimate",
    "spectral_measure",
    "wiener_criterion",
]


@dataclass(frozen=True)
class EigenOperator:
    """Unit-L^2-norm operator with alpha(op) = exp(2 pi i angle) * op."""

    op: Operator
    angle: float


@dataclass
class EigenBasis:
    """Orthonormal (in tau) unimodular eigenoperators of the dynamics.

    ``vectors`` holds the unit-Euclidean-norm eigenvectors of the
    superoperator as columns; ``projector`` is the orthogonal projection
    of L^2 onto their span.  ``complete`` is true when the basis spans all
    of L^2 (always the case for *-automorphisms).
    """

    ctx: AlgebraCtx
    basis: list            # list[EigenOperator]
    angles: np.ndarray
    vectors: np.ndarray    # (n^2, r), orthonormal columns
    projector: np.ndarray  # (n^2, n^2)
    residual: float
    complete: bool
    warning: str | None = None


@dataclass
class KroneckerSplit:
    """x = x_K + x_perp with x_K in the span of the eigen basis."""

    x_K: Operator
    x_perp: Operator
    basis_K: list


@dataclass
class CorrelationSequence:
    """gamma_x(l) = tau(x* alpha^l(x)) for l >= 0, with gamma(-l) the
    conjugate by construction; gamma(0) = ||x||_2^2."""

    lags: np.ndarray  # values at l = 0..L

    @property
    def horizon(self) -> int:
        return len(self.lags) - 1

    def value(self, l: int) -> complex:
        if abs(l) > self.horizon:
            raise IndexError(f"lag {l} beyond horizon {self.horizon}")
        return complex(self.lags[l]) if l >= 0 else complex(np.conj(self.lags[-l]))

    def values(self, lmin: int, lmax: int) -> np.ndarray:
        return np.array([self.value(l) for l in range(lmin, lmax + 1)])


@dataclass
class SpectralMeasure:
    """Atomic measure on the circle attached to (dynamics, x): atoms are
    (angle in [0,1), mass >= 0) with sum of masses = ||x||_2^2 when the
    eigen basis is complete."""

    atoms: list  # [(angle, mass)] sorted by angle
    total: float
    gamma_check_error: float = 0.0

    def mass_at(self, angle: float, tol: float = ANGLE_CLUSTER_TOL) -> float:
        for a, m in self.atoms:
            if min(abs(a - angle), 1 - abs(a - angle)) <= tol:
                return m
        return 0.0

    def to_json(self) -> dict:
        return {
            "atoms": [{"angle": a, "mass": m} for a, m in self.atoms],
            "gamma_check_error": self.gamma_check_error,
        }


def correlation(d: Dynamics, x: Operator, L: int | None = None) -> CorrelationSequence:
    """Correlation sequence from one orbit pass.

    The default horizon L = 4 * dim^2 is long enough to resolve every
    superoperator angle at the clustering tolerance for desk-scale sizes.
    """
    if L is None:
        L = 4 * x.ctx.dim ** 2
    if L < 0:
        raise ValueError("L must be >= 0")
    vals = np.empty(L + 1, dtype=complex)
    xstar = x.mat.conj().T
    m = np.array(x.mat)
    n = x.ctx.dim
    for l in range(L + 1):
        if l:
            m = d.apply_mat(m)
        vals[l] = np.trace(xstar @ m) / n
    return CorrelationSequence(vals)


def check_positive_definite(c: CorrelationSequence, m: int) -> float:
    """Smallest eigenvalue of the (m+1) x (m+1) Toeplitz matrix [gamma(i-j)].

    For trace-preserving homomorphism dynamics the sequence is positive
    definite, so the value must be >= -tol; channels can and do go
    negative, which is reported rather than raised.
    """
    if m > c.horizon:
        raise ValueError(f"m = {m} exceeds correlation horizon {c.horizon}")
    col = c.values(0, m)
    row = np.conj(col)
    t = scipy.linalg.toeplitz(col, row)
    return float(np.linalg.eigvalsh(t).min())


def _phase_fix(v: np.ndarray) -> np.ndarray:
    """Make the first significantly nonzero component real positive."""
    idx = np.argmax(np.abs(v) > 1e-8)
    c = v[idx]
    if abs(c) == 0:
        return v
    return v * (np.conj(c) / abs(c))


def eigen_split(d: Dynamics) -> EigenBasis:
    """Unimodular eigenoperators of the dynamics and the projector onto
    their closed span (the Kronecker factor).

    Homomorphism kinds have a unitary superoperator: a complex Schur
    decomposition then yields a complete orthonormal eigenbasis.  For
    other kinds the superoperator need not be normal; unimodular
    eigenvectors are extracted where they exist, orthonormalized, and a
    warning is attached.  The identity direction always belongs to the
    basis (eigenvalue 1).  Eigenpairs are sorted by angle and the phase of
    each vector is fixed deterministically.
    """
    s = superoperator(d)
    n = d.ctx.dim
    warning = None

    if d.is_homomorphism:
        t, q = scipy.linalg.schur(s, output="complex")
        off = float(np.abs(np.triu(t, 1)).max()) if t.shape[0] > 1 else 0.0
        if off > 1e-8:
            warning = f"superoperator not numerically normal (off-diagonal {off:.2e})"
        eigvals = np.diagonal(t)
        vectors = q
        keep = np.abs(np.abs(eigvals) - 1.0) <= UNIMODULAR_TOL
        eigvals, vectors = eigvals[keep], vectors[:, keep]
        residual = float(np.linalg.norm(s @ vectors - vectors * eigvals, ord=2)) if vectors.size else 0.0
    else:
        warning = "dynamics is not a homomorphism: unimodular eigenvectors extracted where they exist"
        w, v = np.linalg.eig(s)
        keep = np.abs(np.abs(w) - 1.0) <= UNIMODULAR_TOL
        eigvals, vectors = w[keep], v[:, keep]
        if vectors.size:
            q, _ = np.linalg.qr(vectors)
            vectors = q
            # re-derive eigenvalues on the orthonormalized columns
            eigvals = np.einsum("ij,ij->j", vectors.conj(), s @ vectors)
            residual = float(np.linalg.norm(s @ vectors - vectors * eigvals, ord=2))
        else:
            residual = 0.0

    angles = np.mod(np.angle(eigvals) / (2 * np.pi), 1.0)
    angles[angles >= 1.0 - ANGLE_CLUSTER_TOL] -= 1.0  # wrap to [0, 1) with 1-eps -> -eps ~ 0
    angles = np.mod(angles, 1.0)
    cols = [_phase_fix(vectors[:, i]) for i in range(vectors.shape[1])]
    order = sorted(
        range(len(cols)),
        key=lambda i: (round(angles[i] / ANGLE_CLUSTER_TOL), tuple(np.round(cols[i], 9).view(float))),
    )
    vectors = np.column_stack([cols[i] for i in order]) if cols else np.zeros((n * n, 0), dtype=complex)
    angles = angles[order] if len(order) else np.zeros(0)

    basis = [
        EigenOperator(Operator(d.ctx, unvec(vectors[:, i], n) * np.sqrt(n)), float(angles[i]))
        for i in range(vectors.shape[1])
    ]
    projector = vectors @ vectors.conj().T
    return EigenBasis(
        ctx=d.ctx,
        basis=basis,
        angles=angles,
        vectors=vectors,
        projector=projector,
        residual=residual,
        complete=vectors.shape[1] == n * n,
        warning=warning,
    )


def kronecker_split(d: Dynamics, x: Operator, basis: EigenBasis | None = None) -> KroneckerSplit:
    """Orthogonal decomposition x = x_K + x_perp against the eigen span.

    The invariance alpha(K_perp) <= K_perp makes the complement dynamics-
    stable: projector_K applied to alpha(x_perp) vanishes to tolerance.
    """
    if basis is None:
        basis = eigen_split(d)
    vx = vec(x.mat)
    vk = basis.projector @ vx
    x_k = Operator(x.ctx, unvec(vk, x.ctx.dim))
    return KroneckerSplit(x_K=x_k, x_perp=x - x_k, basis_K=basis.basis)


def atom_estimate(d: Dynamics, x: Operator, t: float, n: int,
                  corr: CorrelationSequence | None = None) -> complex:
    """Cesaro estimator (1/n) sum_{l=1}^{n} exp(2 pi i l t) gamma_x(l).

    Under the reconstruction convention gamma(l) = sum mass*e^{2 pi i l
    theta}, the estimator converges to the mass of the atom at angle
    (-t mod 1) and decays like a geometric average elsewhere.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if corr is None or corr.horizon < n:
        corr = correlation(d, x, L=n)
    ls = np.arange(1, n + 1)
    phases = np.exp(2j * np.pi * np.mod(ls * float(t), 1.0))
    return complex(np.sum(phases * corr.lags[1:n + 1]) / n)


def _cluster_angles(angles: np.ndarray, masses: np.ndarray):
    """Pool masses whose angles agree to the clustering tolerance
    (circularly)."""
    if len(angles) == 0:
        return []
    order = np.argsort(angles)
    out = []
    for i in order:
        a, m = float(angles[i]), float(masses[i])
        if out and min(abs(a - out[-1][0]), 1 - abs(a - out[-1][0])) <= ANGLE_CLUSTER_TOL:
            prev_a, prev_m = out[-1]
            tot = prev_m + m
            merged = prev_a if prev_m >= m else a
            out[-1] = (merged, tot)
        else:
            out.append((a, m))
    if len(out) > 1 and (1 - out[-1][0]) + out[0][0] <= ANGLE_CLUSTER_TOL:
        a0, m0 = out.pop(0)
        al, ml = out.pop()
        out.insert(0, (a0 if m0 >= ml else al, m0 + ml))
    return out


def spectral_measure(d: Dynamics, x: Operator, basis: EigenBasis | None = None,
                     check_lags: int = 64) -> SpectralMeasure:
    """Atomic spectral measure of (d, x) from the eigen decomposition.

    mass(theta) = sum over basis elements at angle theta of |(b, x)|^2.
    Requires a homomorphism (unitary superoperator); the reconstruction
    identity against the directly computed correlation sequence is
    evaluated and its error recorded.
    """
    if not d.is_homomorphism:
        raise HypothesisViolation(
            "spectral_measure needs homomorphism dynamics (atomic formula requires a unitary superoperator)"
        )
    if basis is None:
        basis = eigen_split(d)
    n = d.ctx.dim
    coeffs = basis.vectors.conj().T @ vec(x.mat)
    masses = np.abs(coeffs) ** 2 / n
    atoms = [(a, m) for a, m in _cluster_angles(basis.angles, masses) if m > 1e-16]
    total = float(sum(m for _, m in atoms))

    check_lags = min(check_lags, 4 * n * n)
    corr = correlation(d, x, L=check_lags)
    err = 0.0
    if atoms:
        thetas = np.array([a for a, _ in atoms])
        ms = np.array([m for _, m in atoms])
        for l in range(-check_lags, check_lags + 1):
            recon = complex(np.sum(ms * np.exp(2j * np.pi * l * thetas)))
            err = max(err, abs(recon - corr.value(l)))
    else:
        err = float(np.abs(corr.lags).max()) if corr.lags.size else 0.0
    return SpectralMeasure(atoms=atoms, total=total, gamma_check_error=err)


def wiener_criterion(c: CorrelationSequence, m: int) -> float:
    """Cesaro average of squared correlation moduli,
    W_m = (1/m) sum_{l=1}^{m} |gamma(l)|^2, with W_0 = 0.

    For an atomic measure W_m converges to the sum of squared atom masses;
    the measure is continuous exactly when the limit vanishes.
    """
    if m > c.horizon:
        raise ValueError(f"m = {m} exceeds correlation horizon {c.horizon}")
    if m == 0:
        return 0.0
    return float(np.sum(np.abs(c.lags[1:m + 1]) ** 2) / m)
