"""Operator Van der Corput inequality and the uniform bound chain.

For elements a_0, ..., a_{n-1} of the matrix *-algebra and 0 <= m <= n-1:

    (sum a_k)* (sum a_k)
        <= (n+m)/(m+1) * sum_k a_k* a_k
         + 2 (n+m)/(m+1) * sum_{l=1}^{m} (m-l+1)/(m+1) * Re sum_k a_k* a_{k+l}

with Re z = (z + z*)/2 and the shifted sums truncated at the top index
(a_{k+l} = 0 for k+l >= n; the certificate records this zero-padding
convention).  The leading constant is n+m: it counts the shifted copies
of the sum in the averaging-window proof, and the all-ones example
(sum = n * identity) shows n+m-1 would already fail at m = 0.  The
C*-norm corollary weakens the constants to the n-free form

    ||(1/n) sum a_k||^2 < 2/(m+1) ||(1/n) sum a_k* a_k||
                         + 4/(m+1) sum_{l=1}^m ||(1/n) sum_k a_k* a_{k+l}||

which is the shape used by the uniform bound chain: with a_k =
lambda^k alpha^k(x) p and a homomorphism alpha, the compression identity
(a e)* b e = e a* b e turns each shifted sum into a compressed ergodic
average of the fixed operator x* alpha^l(x), uniformly in lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import Operator, Projection, _opnorm
from .averages import WeightedSums, compressed_norms
from .errors import HypothesisViolation

__all__ = [
    "VdcCertificate",
    "vdc_gap",
    "vdc_norm_bound",
    "ww_bound_chain",
    "ChainPoint",
    "lemma2_identity_check",
    "random_vdc_suite",
]


@dataclass
class VdcCertificate:
    """Numerical certificate for one (a_0..a_{n-1}, m) instance.

    gap_min_eig >= -tol (relative to gap_norm) certifies the operator
    inequality; lhs_norm <= rhs_norm_bound + tol certifies the norm form.
    """

    n: int
    m: int
    dim: int
    gap_min_eig: float
    gap_norm: float
    lhs_norm: float
    rhs_norm_bound: float
    convention: str = "zero-pad"
    seed: int | None = None

    def csv_row(self):
        return (self.n, self.m, self.dim, repr(self.gap_min_eig),
                repr(self.lhs_norm), repr(self.rhs_norm_bound),
                "" if self.seed is None else self.seed)


def _check_instance(a, m):
    if not a:
        raise ValueError("need at least one operator")
    n = len(a)
    if not (0 <= m <= n - 1):
        raise ValueError(f"m must satisfy 0 <= m <= n-1 = {n - 1}, got {m}")
    ctx = a[0].ctx
    for op in a:
        if op.ctx != ctx:
            raise ValueError("operators live in different algebra contexts")
    return n, ctx


def _shifted_sum(mats, l):
    """sum_k a_k* a_{k+l}, zero-padded: terms with k+l >= n are dropped."""
    n = len(mats)
    out = np.zeros_like(mats[0])
    for k in range(n - l):
        out += mats[k].conj().T @ mats[k + l]
    return out


def vdc_gap(a, m: int) -> VdcCertificate:
    """Certificate for the operator inequality: assemble RHS - LHS as a
    Hermitian operator and return its minimal eigenvalue (plus the norm
    data of the corollary, computed on the same instance)."""
    n, ctx = _check_instance(a, m)
    mats = [op.mat for op in a]
    total = np.sum(mats, axis=0)
    lhs = total.conj().T @ total

    c = (n + m) / (m + 1)
    rhs = c * _shifted_sum(mats, 0)
    for l in range(1, m + 1):
        s = _shifted_sum(mats, l)
        rhs = rhs + (2 * c * (m - l + 1) / (m + 1)) * ((s + s.conj().T) / 2.0)

    gap = rhs - lhs
    gap = (gap + gap.conj().T) / 2.0
    gap_min = float(np.linalg.eigvalsh(gap).min())
    gap_norm = _opnorm(gap)

    lhs_norm, rhs_bound = _norm_form(mats, n, m)
    return VdcCertificate(n=n, m=m, dim=ctx.dim, gap_min_eig=gap_min,
                          gap_norm=gap_norm, lhs_norm=lhs_norm,
                          rhs_norm_bound=rhs_bound)


def _norm_form(mats, n, m):
    avg = np.sum(mats, axis=0) / n
    lhs_norm = _opnorm(avg) ** 2
    rhs = (2.0 / (m + 1)) * _opnorm(_shifted_sum(mats, 0) / n)
    for l in range(1, m + 1):
        rhs += (4.0 / (m + 1)) * _opnorm(_shifted_sum(mats, l) / n)
    return lhs_norm, rhs


def vdc_norm_bound(a, m: int) -> VdcCertificate:
    """Certificate for the n-free norm inequality (same fields; the gap
    data is filled in as well since it is cheap on the same instance)."""
    return vdc_gap(a, m)


def lemma2_identity_check(a: Operator, b: Operator, e: Projection) -> float:
    """Deviation ||(a e)*(b e) - e a* b e||_inf; identically zero in the
    bounded finite-dimensional setting, up to rounding."""
    ae = a.mat @ e.mat
    be = b.mat @ e.mat
    lhs = ae.conj().T @ be
    rhs = e.mat @ a.mat.conj().T @ b.mat @ e.mat
    return _opnorm(lhs - rhs)


@dataclass
class ChainPoint:
    """One evaluation of the uniform bound chain at (n, m)."""

    n: int
    m: int
    uniform_sup_sq: float
    bound: float
    term0: float                 # ||p a_n(x* x) p||_inf
    corr_terms: list             # ||p a_n(x* alpha^l(x)) p||_inf, l = 1..m
    bound_predicted: float = 0.0  # gamma-based asymptotic form of the bound
    tau_p_perp: float = 0.0

    def to_json(self):
        return {
            "n": self.n, "m": self.m,
            "uniform_sup_sq": self.uniform_sup_sq,
            "bound": self.bound,
            "bound_predicted": self.bound_predicted,
            "term0": self.term0,
            "corr_terms": list(self.corr_terms),
            "tau_p_perp": self.tau_p_perp,
        }


def ww_bound_chain(d, x: Operator, p: Projection | None, n: int, m: int,
                   angles, corr=None) -> ChainPoint:
    """Uniform bound chain at horizon n and window m:

        sup_grid ||a_n(x, lambda) p||_inf^2
            <= 2/(m+1) ||p a_n(x* x) p||_inf
             + 4/(m+1) sum_{l=1}^m ||p a_n(x* alpha^l(x)) p||_inf

    Requires homomorphism dynamics (the compression identity and
    multiplicativity power the reduction).  The compressed averages
    converge to |gamma(l)| scalars, so the gamma-based asymptotic form of
    the bound is reported alongside for rate diagnostics.
    """
    if not d.is_homomorphism:
        raise HypothesisViolation("ww_bound_chain requires homomorphism dynamics")
    if not (0 <= m <= n - 1):
        raise ValueError(f"m must satisfy 0 <= m <= n-1, got m={m}, n={n}")
    angles = np.asarray(angles, dtype=float)

    # grid sup of the one-sided compressed weighted averages
    sums = WeightedSums(angles, x.ctx.dim)
    mat = np.array(x.mat)
    for k in range(n):
        if k:
            mat = d.apply_mat(mat)
        sums.add(mat)
    avgs = sums.averages()
    sup = float(compressed_norms(avgs, p, bilateral=False).max())

    # correlation terms: alpha^k(x* alpha^l(x)) = alpha^k(x)* alpha^{k+l}(x)
    xsums = _correlation_averages(d, x, n, m, p)
    term0, corr_terms = xsums[0], list(xsums[1:])
    bound = (2.0 / (m + 1)) * term0 + (4.0 / (m + 1)) * sum(corr_terms)

    if corr is None:
        from .spectral import correlation
        corr = correlation(d, x, L=m)
    predicted = (2.0 / (m + 1)) * abs(corr.value(0))
    for l in range(1, m + 1):
        predicted += (4.0 / (m + 1)) * abs(corr.value(l))

    return ChainPoint(
        n=n, m=m, uniform_sup_sq=sup * sup, bound=float(bound),
        term0=float(term0), corr_terms=[float(t) for t in corr_terms],
        bound_predicted=float(predicted),
        tau_p_perp=0.0 if p is None else p.trace_defect(),
    )


def _correlation_averages(d, x, n, m, p):
    """||p a_n(x* alpha^l(x)) p||_inf for l = 0..m, from one orbit pass."""
    dim = x.ctx.dim
    sums = np.zeros((m + 1, dim, dim), dtype=complex)
    comps = np.zeros_like(sums)
    window = [np.array(x.mat)]
    mat = window[0]
    for k in range(1, m + 1):
        mat = d.apply_mat(mat)
        window.append(mat)
    # window holds alpha^k(x) .. alpha^{k+m}(x); slide it n times
    for _ in range(n):
        head = window[0].conj().T
        for l in range(m + 1):
            term = head @ window[l] - comps[l]
            snew = sums[l] + term
            comps[l] = (snew - sums[l]) - term
            sums[l] = snew
        window.pop(0)
        window.append(d.apply_mat(mat))
        mat = window[-1]
    avgs = sums / n
    return compressed_norms(avgs, p, bilateral=True)


def random_vdc_suite(count: int, max_dim: int, max_n: int, seed: int):
    """Seeded stream of certificates: for each instance (random dimension,
    length, complex Gaussian entries) every admissible window m is
    certified.  Yields (instance_index, certificate) pairs."""
    from .algebra import AlgebraCtx
    from .sampling import random_operator

    gen = np.random.default_rng(seed)
    for idx in range(count):
        dim = int(gen.integers(1, max_dim + 1))
        n = int(gen.integers(1, max_n + 1))
        ctx = AlgebraCtx(dim)
        a = [random_operator(ctx, gen) for _ in range(n)]
        for m in range(n):
            cert = vdc_gap(a, m)
            cert.seed = seed
            yield idx, cert
