import math

import numpy as np
import pytest

from ergolab import (
    AlgebraCtx, Power, Projection, UnitaryConjugation, ergodic_avg, lp_norm,
    trajectory, uniform_grid, uniform_sup, weighted_avg,
)
from ergolab.averages import WeightedSums, lipschitz_slack
from ergolab.sampling import rng, random_hermitian, random_operator, random_unitary

from conftest import cycle_conjugation, haar_conjugation, qubit_channel


def geo_mean(z, n):
    """(1/n) sum_{k<n} z^k, the scalar oracle."""
    return sum(z ** k for k in range(n)) / n


def test_ergodic_avg_basics():
    ctx = AlgebraCtx(3)
    d = haar_conjugation(3, seed=0)
    x = random_hermitian(ctx, rng(1))
    assert ergodic_avg(d, x, 1).allclose(x)
    assert ergodic_avg(d, ctx.identity(), 7).allclose(ctx.identity(), atol=1e-13)
    ident = Power(ctx, d, 0)
    assert ergodic_avg(ident, x, 9).allclose(x, atol=1e-13)
    with pytest.raises(ValueError):
        ergodic_avg(d, x, 0)


def test_ergodic_avg_large_n_matches_direct():
    # the superoperator doubling path must agree with direct summation
    d = qubit_channel(seed=2)
    x = random_hermitian(AlgebraCtx(2), rng(3))
    direct = x.mat.copy()
    m = x.mat.copy()
    n = 5000
    for _ in range(n - 1):
        m = d.apply_mat(m)
        direct = direct + m
    direct = direct / n
    import ergolab.averages as av
    old = av._SUPEROP_THRESHOLD
    av._SUPEROP_THRESHOLD = 100
    try:
        fast = ergodic_avg(d, x, n)
    finally:
        av._SUPEROP_THRESHOLD = old
    assert np.abs(fast.mat - direct).max() < 1e-12


def test_weighted_avg_at_lambda_one():
    d = cycle_conjugation(5)
    x = random_hermitian(AlgebraCtx(5), rng(4))
    for n in (1, 3, 10):
        assert weighted_avg(d, x, 1.0, n).allclose(ergodic_avg(d, x, n), atol=1e-13)
    with pytest.raises(ValueError):
        weighted_avg(d, x, 0.5, 3)


def test_weighted_avg_eigenoperator_closed_form():
    # eigenoperator of a diagonal conjugation: a_n(x, lambda) is a scalar
    # geometric mean times x
    ctx = AlgebraCtx(2)
    theta = 0.237
    mu = np.exp(2j * np.pi * theta)
    d = UnitaryConjugation(ctx, ctx.diag([1.0, np.exp(-2j * np.pi * theta)]))
    x = ctx.matrix_unit(0, 1)  # alpha(x) = mu x
    assert d(x).allclose(mu * x, atol=1e-14)
    g = rng(5)
    for _ in range(10):
        n = int(g.integers(1, 200))
        lam = np.exp(2j * np.pi * g.uniform())
        got = weighted_avg(d, x, lam, n)
        want = geo_mean(lam * mu, n) * x
        assert got.allclose(want, atol=1e-11)
    # resonance lambda*mu = 1 gives back x exactly for every n
    lam = np.conj(mu)
    for n in (1, 7, 64):
        assert weighted_avg(d, x, lam, n).allclose(x, atol=1e-12)


def test_weighted_avg_linearity():
    ctx = AlgebraCtx(3)
    d = haar_conjugation(3, seed=6)
    g = rng(7)
    x, y = random_operator(ctx, g), random_operator(ctx, g)
    a, b = complex(g.standard_normal(), g.standard_normal()), complex(g.standard_normal())
    lam = np.exp(2j * np.pi * 0.13)
    lhs = weighted_avg(d, a * x + b * y, lam, 17)
    rhs = a * weighted_avg(d, x, lam, 17) + b * weighted_avg(d, y, lam, 17)
    assert lhs.allclose(rhs, atol=1e-12)


def test_weighted_avg_norm_bounds():
    ctx = AlgebraCtx(3)
    g = rng(8)
    lam = np.exp(2j * np.pi * 0.31)
    hom = haar_conjugation(3, seed=9)
    ch = qubit_channel(seed=10)
    for _ in range(5):
        x = random_operator(ctx, g)
        for p in (1, 2, math.inf):
            a = weighted_avg(hom, x, lam, 23)
            assert lp_norm(a, p) <= lp_norm(x, p) + 1e-10
        x2 = random_operator(AlgebraCtx(2), g)
        for p in (1, 2, math.inf):
            a = weighted_avg(ch, x2, lam, 23)
            assert lp_norm(a, p) <= 2 * lp_norm(x2, p) + 1e-10


def test_telescoping_recurrence():
    d = cycle_conjugation(6)
    ctx = AlgebraCtx(6)
    x = random_operator(ctx, rng(11))
    lam = np.exp(2j * np.pi * 0.07)
    prev = weighted_avg(d, x, lam, 9)
    cur = weighted_avg(d, x, lam, 10)
    from ergolab import iterate
    orbit = iterate(d, x, 9)
    recon = (9 * prev + lam ** 9 * orbit[9]) / 10
    assert cur.allclose(recon, atol=1e-12)


def test_trajectory_n1_and_spot_checks():
    ctx = AlgebraCtx(4)
    d = haar_conjugation(4, seed=12)
    x = random_hermitian(ctx, rng(13))
    angles = uniform_grid(16)
    traj = trajectory(d, x, [1, 4, 11], angles, keep_operators=3)
    # n = 1 gives x for every weight
    for gidx in range(16):
        assert traj.value(1, gidx).allclose(x, atol=1e-13)
    # direct-summation oracle at random (n, lambda)
    g = rng(14)
    for _ in range(5):
        n = int(g.choice([4, 11]))
        gidx = int(g.integers(0, 16))
        lam = np.exp(2j * np.pi * angles[gidx])
        direct = weighted_avg(d, x, lam, n)
        assert traj.value(n, gidx).allclose(direct, atol=1e-11)


def test_dft_path_equals_naive():
    # the fold+IDFT evaluation must match naive per-weight summation
    ctx = AlgebraCtx(3)
    d = haar_conjugation(3, seed=15)
    x = random_operator(ctx, rng(16))
    q = 32
    angles = uniform_grid(q)
    sums = WeightedSums(angles, 3)
    assert sums.dft
    m = np.array(x.mat)
    n = 45
    for k in range(n):
        if k:
            m = d.apply_mat(m)
        sums.add(m)
    fast = sums.averages()
    for j in range(q):
        lam = np.exp(2j * np.pi * j / q)
        naive = weighted_avg(d, x, lam, n)
        rel = np.abs(fast[j] - naive.mat).max() / max(np.abs(naive.mat).max(), 1e-300)
        assert rel < 1e-10


def test_uniform_sup():
    ctx = AlgebraCtx(2)
    theta = 1.0 / 3.0
    d = UnitaryConjugation(ctx, ctx.diag([1.0, np.exp(-2j * np.pi * theta)]))
    x = ctx.matrix_unit(0, 1)
    angles = uniform_grid(64)
    p0 = Projection.zero(ctx)
    assert uniform_sup(d, x, p0, 10, angles) == 0.0
    # eigenoperator closed form oracle for the grid sup
    mu = np.exp(2j * np.pi * theta)
    n = 37
    oracle = max(abs(geo_mean(np.exp(2j * np.pi * a) * mu, n)) for a in angles)
    got = uniform_sup(d, x, None, n, angles)
    assert got == pytest.approx(oracle * lp_norm(x, math.inf), rel=1e-10)
    # bilateral compression contracts
    g = rng(17)
    from ergolab.sampling import random_projection
    for _ in range(5):
        pr = random_projection(ctx, g, rank=1)
        one = uniform_sup(d, x, pr, n, angles, bilateral=False)
        bil = uniform_sup(d, x, pr, n, angles, bilateral=True)
        assert bil <= one + 1e-12


def test_lipschitz_slack_positive_and_reported():
    d = cycle_conjugation(4)
    x = random_hermitian(AlgebraCtx(4), rng(18))
    s = lipschitz_slack(d, x, 10, 128)
    assert s >= 0
    traj = trajectory(d, x, [10], uniform_grid(128))
    assert traj.lipschitz_slack[0] == pytest.approx(s)


def test_grid_validation():
    with pytest.raises(ValueError):
        uniform_grid(0)
    d = cycle_conjugation(3)
    x = AlgebraCtx(3).identity()
    with pytest.raises(ValueError):
        trajectory(d, x, [], uniform_grid(4))
    with pytest.raises(ValueError):
        trajectory(d, x, [1], np.array([]))
