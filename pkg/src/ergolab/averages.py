"""Ergodic and weighted ergodic averages along the orbit of the dynamics.

The unweighted average is a_n(x) = (1/n) sum_{k<n} alpha^k(x); the
weighted average a_n(x, lambda) = (1/n) sum_{k<n} lambda^k alpha^k(x)
attaches a unimodular weight lambda^k to each orbit point.  The engine
here computes whole lambda-grids incrementally along n, reusing the orbit
once across the grid, with compensated (Kahan) accumulation so that
horizons up to 1e5 do not lose the cancellation structure.

For the uniform grid of q-th roots of unity the per-step work drops to a
single fold into q bins; a length-q inverse DFT at each checkpoint then
produces every grid value at once.  The two paths agree to roundoff and
are cross-checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraCtx, Operator, Projection

ORBIT_CACHE_BUDGET = 512  # operators kept by Orbit before streaming kicks in

__all__ = [
    "ergodic_avg",
    "weighted_avg",
    "trajectory",
    "uniform_sup",
    "AverageTrajectory",
    "uniform_grid",
    "roots_of_unity_grid",
    "lipschitz_slack",
    "WeightedSums",
    "Orbit",
]


# ---------------------------------------------------------------------------
# lambda grids
# ---------------------------------------------------------------------------

def uniform_grid(size: int) -> np.ndarray:
    """Equally spaced angles j/size in [0, 1); these are the size-th roots
    of unity, so the DFT fast path applies."""
    if size < 1:
        raise ValueError("grid size must be >= 1")
    return np.arange(size) / float(size)


def roots_of_unity_grid(q: int) -> np.ndarray:
    return uniform_grid(q)


def _is_uniform_grid(angles: np.ndarray) -> bool:
    q = len(angles)
    return bool(np.array_equal(angles, np.arange(q) / float(q)))


def _phases(angles: np.ndarray, k: int) -> np.ndarray:
    """exp(2 pi i k * angles), with the angle product reduced mod 1 before
    exponentiation so large k does not degrade the phase."""
    return np.exp(2j * np.pi * np.mod(k * angles, 1.0))


# ---------------------------------------------------------------------------
# orbit iteration with a bounded cache
# ---------------------------------------------------------------------------

class Orbit:
    """Iterator over alpha^k(x) as raw matrices, caching up to a budget.

    Entries past the budget are produced by streaming (recomputed on a
    fresh pass when iterated again) so long horizons cannot exhaust
    memory.
    """

    def __init__(self, d, x: Operator, budget: int = ORBIT_CACHE_BUDGET):
        self.d = d
        self.x = x
        self.budget = budget
        self._cache = [np.array(x.mat)]

    def __iter__(self):
        m = None
        k = 0
        while True:
            if k < len(self._cache):
                m = self._cache[k]
            else:
                m = self.d.apply_mat(self._cache[-1] if m is None else m)
                if len(self._cache) < self.budget:
                    self._cache.append(m)
            yield m
            k += 1


# ---------------------------------------------------------------------------
# compensated accumulation over a lambda grid
# ---------------------------------------------------------------------------

class _KahanSum:
    """Kahan-compensated elementwise sum over a complex ndarray."""

    def __init__(self, shape):
        self.s = np.zeros(shape, dtype=complex)
        self.c = np.zeros(shape, dtype=complex)

    def add(self, term):
        t = term - self.c
        snew = self.s + t
        self.c = (snew - self.s) - t
        self.s = snew

    def value(self):
        return self.s


class WeightedSums:
    """Running sums sum_{k<n} lambda^k y_k for every lambda on a grid.

    Uniform grids use the fold-into-bins representation: the bin r holds
    sum_{k = r mod q} y_k and the grid values are recovered by a length-q
    inverse DFT at readout.  Arbitrary grids accumulate directly with the
    per-step phase computed from the reduced angle.
    """

    def __init__(self, angles: np.ndarray, dim: int):
        self.angles = np.asarray(angles, dtype=float)
        self.dim = dim
        self.q = len(self.angles)
        self.dft = _is_uniform_grid(self.angles)
        shape = (self.q, dim, dim)
        self._acc = _KahanSum(shape)
        self.k = 0

    def add(self, y: np.ndarray):
        """Append the next orbit point y = alpha^k(x)."""
        if self.dft:
            # only the bin k mod q is touched; compensate just that row
            r = self.k % self.q
            s, c = self._acc.s, self._acc.c
            t = y - c[r]
            snew = s[r] + t
            c[r] = (snew - s[r]) - t
            s[r] = snew
        else:
            ph = _phases(self.angles, self.k)
            self._acc.add(ph[:, None, None] * y)
        self.k += 1

    def grid_sums(self) -> np.ndarray:
        """Current sums, one (dim, dim) matrix per grid angle."""
        if self.dft:
            # G_j = sum_r omega^{jr} bin_r = q * ifft(bins)_j
            return self.q * np.fft.ifft(self._acc.value(), axis=0)
        return self._acc.value()

    def averages(self) -> np.ndarray:
        if self.k == 0:
            raise ValueError("no terms accumulated yet")
        return self.grid_sums() / self.k


def _batched_opnorm(a: np.ndarray) -> np.ndarray:
    """Largest singular value along the last two axes."""
    return np.linalg.svd(a, compute_uv=False)[..., 0]


def compressed_norms(avgs: np.ndarray, p: Projection | None, bilateral: bool) -> np.ndarray:
    """||a p||_inf (or ||p a p||_inf) for a batch of averages.

    Bilateral compressions are evaluated on the range basis of p, which
    keeps the SVD at the compressed rank.
    """
    if p is None:
        return _batched_opnorm(avgs)
    v = p.range_basis()
    if v.shape[1] == 0:
        return np.zeros(avgs.shape[0])
    ap = avgs @ v
    if bilateral:
        ap = np.einsum("ij,gjk->gik", v.conj().T, ap)
    return _batched_opnorm(ap)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

_SUPEROP_THRESHOLD = 4096  # switch to superoperator doubling past this n


def _cesaro_sum_via_superop(s: np.ndarray, v: np.ndarray, n: int, lam: complex = 1.0):
    """sum_{k<n} (lam*S)^k v by binary doubling of partial geometric sums.

    Uses T(a+b) = T(a) + S^a T(b) on the binary digits of n; O(log n)
    superoperator products, numerically equivalent to direct summation.
    """
    m = lam * s
    pow_block = m  # M^(2^j)
    t_block = np.eye(s.shape[0], dtype=complex)  # T(2^j) = sum_{k < 2^j} M^k
    total_t = np.zeros_like(s)
    total_pow = np.eye(s.shape[0], dtype=complex)
    bits = n
    while bits:
        if bits & 1:
            total_t = total_t + total_pow @ t_block
            total_pow = total_pow @ pow_block
        t_block = t_block + pow_block @ t_block
        pow_block = pow_block @ pow_block
        bits >>= 1
    return total_t @ v


def ergodic_avg(d, x: Operator, n: int) -> Operator:
    """a_n(x) = (1/n) sum_{k=0}^{n-1} alpha^k(x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > _SUPEROP_THRESHOLD:
        from .dynamics import superoperator, vec, unvec
        s = superoperator(d)
        total = _cesaro_sum_via_superop(s, vec(x.mat), n)
        return Operator(x.ctx, unvec(total, x.ctx.dim) / n)
    acc = _KahanSum(x.mat.shape)
    m = np.array(x.mat)
    acc.add(m)
    for _ in range(n - 1):
        m = d.apply_mat(m)
        acc.add(m)
    return Operator(x.ctx, acc.value() / n)


def weighted_avg(d, x: Operator, lam: complex, n: int) -> Operator:
    """a_n(x, lambda) = (1/n) sum_{k=0}^{n-1} lambda^k alpha^k(x).

    lambda must be unimodular; at lambda = 1 this is the ergodic average.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > x.ctx.tol * 100 + 1e-12:
        raise ValueError(f"weight must lie on the unit circle, got |lambda| = {abs(lam)!r}")
    if n > _SUPEROP_THRESHOLD:
        from .dynamics import superoperator, vec, unvec
        s = superoperator(d)
        total = _cesaro_sum_via_superop(s, vec(x.mat), n, lam=lam)
        return Operator(x.ctx, unvec(total, x.ctx.dim) / n)
    theta = np.angle(lam) / (2 * np.pi)
    acc = _KahanSum(x.mat.shape)
    m = np.array(x.mat)
    for k in range(n):
        if k:
            m = d.apply_mat(m)
        acc.add(np.exp(2j * np.pi * math.fmod(k * theta, 1.0)) * m)
    return Operator(x.ctx, acc.value() / n)


@dataclass
class AverageTrajectory:
    """Weighted averages along n over a lambda grid, stored as compressed
    norms plus (optionally) full operator payloads at the final points."""

    ctx: AlgebraCtx
    n_grid: list
    angles: np.ndarray
    norms_one_sided: np.ndarray      # shape (len(n_grid), G)
    norms_bilateral: np.ndarray | None
    lipschitz_slack: np.ndarray      # shape (len(n_grid),)
    operators: dict = field(default_factory=dict)  # n -> (G, dim, dim)
    projection_defect: float = 0.0   # tau(1 - p) of the compressing projection

    def value(self, n: int, grid_index: int) -> Operator:
        if n not in self.operators:
            raise KeyError(f"operators were not retained at n = {n}")
        return Operator(self.ctx, self.operators[n][grid_index])

    def sup_one_sided(self, n: int) -> float:
        return float(self.norms_one_sided[self.n_grid.index(n)].max())

    def sup_bilateral(self, n: int) -> float:
        if self.norms_bilateral is None:
            raise ValueError("bilateral norms were not computed")
        return float(self.norms_bilateral[self.n_grid.index(n)].max())

    def csv_rows(self):
        rows = []
        for i, n in enumerate(self.n_grid):
            for g, a in enumerate(self.angles):
                bil = self.norms_bilateral[i, g] if self.norms_bilateral is not None else ""
                rows.append((n, float(a), float(self.norms_one_sided[i, g]), bil))
        return rows


def trajectory(d, x: Operator, n_grid, angles, projection: Projection | None = None,
               bilateral=True, keep_operators=0) -> AverageTrajectory:
    """Evaluate a_n(x, lambda) for every n in n_grid and lambda on the grid.

    The orbit is computed once and folded incrementally; value(n, lambda)
    agrees with a direct weighted_avg call to roundoff.  keep_operators
    retains full operator payloads at that many of the largest grid
    points (for Cauchy-tail evaluation and limit estimates).
    """
    n_grid = sorted(set(int(n) for n in n_grid))
    if not n_grid or n_grid[0] < 1:
        raise ValueError("n_grid must contain positive integers")
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("lambda grid must be nonempty")

    sums = WeightedSums(angles, x.ctx.dim)
    keep_at = set(n_grid[len(n_grid) - keep_operators:]) if keep_operators else set()

    norms1 = np.empty((len(n_grid), len(angles)))
    norms2 = np.empty_like(norms1) if bilateral else None
    slack = np.empty(len(n_grid))
    ops = {}

    checkpoints = {n: i for i, n in enumerate(n_grid)}
    n_max = n_grid[-1]
    max_orbit_inf = 0.0
    m = np.array(x.mat)
    for k in range(n_max):
        if k:
            m = d.apply_mat(m)
        max_orbit_inf = max(max_orbit_inf, float(np.linalg.norm(m, ord=2)))
        sums.add(m)
        n = k + 1
        if n in checkpoints:
            i = checkpoints[n]
            avgs = sums.averages()
            norms1[i] = compressed_norms(avgs, projection, bilateral=False)
            if bilateral:
                norms2[i] = compressed_norms(avgs, projection, bilateral=True)
            # sup over the whole circle exceeds the grid sup by at most
            # (max angular distance to the grid) * (derivative bound)
            slack[i] = np.pi * (n - 1) * max_orbit_inf / len(angles)
            if n in keep_at:
                ops[n] = avgs

    return AverageTrajectory(
        ctx=x.ctx,
        n_grid=n_grid,
        angles=angles,
        norms_one_sided=norms1,
        norms_bilateral=norms2,
        lipschitz_slack=slack,
        operators=ops,
        projection_defect=0.0 if projection is None else projection.trace_defect(),
    )


def uniform_sup(d, x: Operator, p: Projection | None, n: int, angles, bilateral=False) -> float:
    """max over the grid of ||a_n(x, lambda) p||_inf (or ||p a p||_inf)."""
    traj = trajectory(d, x, [n], angles, projection=p, bilateral=bilateral)
    return traj.sup_bilateral(n) if bilateral else traj.sup_one_sided(n)


def lipschitz_slack(d, x: Operator, n: int, grid_size: int) -> float:
    """Upper bound on the gap between the grid sup and the sup over the
    whole circle: half grid spacing times the angular derivative bound
    2*pi*(n-1)*max_k ||alpha^k(x)||_inf."""
    worst = 0.0
    m = np.array(x.mat)
    for k in range(n):
        if k:
            m = d.apply_mat(m)
        worst = max(worst, float(np.linalg.norm(m, ord=2)))
    return np.pi * (n - 1) * worst / grid_size
