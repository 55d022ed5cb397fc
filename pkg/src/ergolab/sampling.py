"""Seeded random generators for operators, unitaries and projections.

All sampling is driven by an explicit numpy Generator so that every
randomized suite in the package is reproducible from its recorded seed.
"""

from __future__ import annotations

import numpy as np

from .algebra import AlgebraCtx, Operator, Projection


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_operator(ctx: AlgebraCtx, gen: np.random.Generator) -> Operator:
    """Standard complex Gaussian entries (unit expected |entry|^2)."""
    m = gen.standard_normal((ctx.dim, ctx.dim)) + 1j * gen.standard_normal((ctx.dim, ctx.dim))
    return Operator(ctx, m / np.sqrt(2.0))


def random_hermitian(ctx: AlgebraCtx, gen: np.random.Generator, unit_l2=False) -> Operator:
    a = random_operator(ctx, gen)
    h = (a + a.h) / 2.0
    if unit_l2:
        n2 = h.norm2()
        if n2 > 0:
            h = h / n2
    return h


def random_positive(ctx: AlgebraCtx, gen: np.random.Generator) -> Operator:
    a = random_operator(ctx, gen)
    return a.h @ a


def random_unitary(ctx: AlgebraCtx, gen: np.random.Generator) -> Operator:
    """Haar-distributed unitary via QR with the standard phase fix."""
    a = gen.standard_normal((ctx.dim, ctx.dim)) + 1j * gen.standard_normal((ctx.dim, ctx.dim))
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return Operator(ctx, q)


def random_projection(ctx: AlgebraCtx, gen: np.random.Generator, rank=None) -> Projection:
    if rank is None:
        rank = int(gen.integers(0, ctx.dim + 1))
    u = random_unitary(ctx, gen).mat[:, :rank]
    return Projection.from_range(ctx, u)


def random_permutation(n: int, gen: np.random.Generator):
    return tuple(int(i) for i in gen.permutation(n))
