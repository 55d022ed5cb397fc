import numpy as np
import pytest

from ergolab import (
    AlgebraCtx, HypothesisViolation, Projection, lemma2_identity_check,
    lp_norm, random_vdc_suite, uniform_grid, vdc_gap, vdc_norm_bound,
    ww_bound_chain, correlation, uniform_sup,
)
from ergolab.sampling import rng, random_operator, random_projection

from conftest import cycle_conjugation, qubit_channel


def test_single_element_window_zero():
    ctx = AlgebraCtx(3)
    a = [random_operator(ctx, rng(0))]
    cert = vdc_gap(a, 0)
    # inequality reads a0* a0 <= a0* a0
    assert cert.gap_min_eig == pytest.approx(0.0, abs=1e-12)
    assert cert.lhs_norm <= cert.rhs_norm_bound + 1e-12


def test_all_ones_scalar_oracle():
    # scalar arithmetic oracle: with every a_k the identity, the left side
    # is n^2 and the right side is the explicit coefficient sum
    for n in (1, 2, 4, 7):
        ctx = AlgebraCtx(3)
        a = [ctx.identity() for _ in range(n)]
        for m in range(n):
            cert = vdc_gap(a, m)
            coef = (n + m) / (m + 1)
            rhs_scalar = coef * n + 2 * coef * sum(
                (m - l + 1) / (m + 1) * (n - l) for l in range(1, m + 1))
            assert rhs_scalar - n * n >= -1e-12
            assert cert.gap_min_eig == pytest.approx(rhs_scalar - n * n, abs=1e-9)
            assert cert.gap_min_eig >= -1e-12


def test_all_ones_m0_norm_values():
    ctx = AlgebraCtx(2)
    a = [ctx.identity() for _ in range(4)]
    cert = vdc_norm_bound(a, 0)
    assert cert.lhs_norm == pytest.approx(1.0)
    assert cert.rhs_norm_bound == pytest.approx(2.0)


def test_all_zero_instances():
    ctx = AlgebraCtx(2)
    a = [ctx.zero() for _ in range(5)]
    cert = vdc_gap(a, 3)
    assert cert.gap_min_eig == pytest.approx(0.0)
    assert cert.lhs_norm == 0.0 and cert.rhs_norm_bound == 0.0


def test_window_validation():
    ctx = AlgebraCtx(2)
    a = [ctx.identity() for _ in range(3)]
    with pytest.raises(ValueError):
        vdc_gap(a, 3)
    with pytest.raises(ValueError):
        vdc_gap(a, -1)
    with pytest.raises(ValueError):
        vdc_gap([], 0)


def test_randomized_suite_small():
    # operator inequality and its norm corollary hold on every instance,
    # LHS/RHS built by direct summation inside vdc_gap
    count = 0
    for idx, cert in random_vdc_suite(60, max_dim=4, max_n=6, seed=123):
        assert cert.gap_min_eig >= -1e-9 * max(1.0, cert.gap_norm)
        assert cert.lhs_norm <= cert.rhs_norm_bound + 1e-9
        count += 1
    assert count >= 60


def test_operator_implies_first_display_norms():
    # whenever the operator inequality certifies, the unnormalized norm
    # display with the same constants holds on the same data
    g = rng(7)
    ctx = AlgebraCtx(3)
    for _ in range(20):
        n = int(g.integers(1, 6))
        a = [random_operator(ctx, g) for _ in range(n)]
        m = int(g.integers(0, n))
        total = np.sum([op.mat for op in a], axis=0)
        lhs = np.linalg.norm(total, 2) ** 2
        coef = (n + m) / (m + 1)
        rhs = coef * np.linalg.norm(
            np.sum([op.mat.conj().T @ op.mat for op in a], axis=0), 2)
        for l in range(1, m + 1):
            s = np.sum([a[k].mat.conj().T @ a[k + l].mat for k in range(n - l)], axis=0) \
                if n - l > 0 else np.zeros((3, 3))
            rhs += 2 * coef * (m - l + 1) / (m + 1) * np.linalg.norm(s, 2)
        cert = vdc_gap(a, m)
        assert cert.gap_min_eig >= -1e-9 * max(1.0, cert.gap_norm)
        assert lhs <= rhs + 1e-9


def test_lemma2_identity():
    ctx = AlgebraCtx(4)
    g = rng(8)
    a, b = random_operator(ctx, g), random_operator(ctx, g)
    assert lemma2_identity_check(a, b, Projection.identity(ctx)) < 1e-12
    assert lemma2_identity_check(a, b, Projection.zero(ctx)) == 0.0
    for _ in range(10):
        e = random_projection(ctx, g)
        assert lemma2_identity_check(random_operator(ctx, g), random_operator(ctx, g), e) <= 1e-12


def test_chain_zero_observable():
    d = cycle_conjugation(4)
    ctx = AlgebraCtx(4)
    pt = ww_bound_chain(d, ctx.zero(), None, 10, 2, uniform_grid(8))
    assert pt.uniform_sup_sq == 0.0 and pt.bound == 0.0


def test_chain_m0_random_homomorphisms():
    # direct evaluation oracle of both sides at m = 0
    from conftest import haar_conjugation
    g = rng(9)
    angles = uniform_grid(64)
    for seed in range(4):
        d = haar_conjugation(3, seed=seed)
        x = random_operator(d.ctx, g)
        n = 40
        pt = ww_bound_chain(d, x, None, n, 0, angles)
        sup = uniform_sup(d, x, None, n, angles)
        assert pt.uniform_sup_sq == pytest.approx(sup ** 2, rel=1e-10)
        from ergolab import ergodic_avg
        t0 = lp_norm(ergodic_avg(d, x.h @ x, n), np.inf)
        assert pt.bound == pytest.approx(2 * t0, rel=1e-10)
        assert pt.uniform_sup_sq <= pt.bound + 1e-9


def test_chain_qcycle_matches_gamma_oracle():
    # at a full-period horizon the compressed averages equal |gamma(l)|
    # exactly, so the bound coincides with its asymptotic prediction
    q = 12
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    x = ctx.matrix_unit(0, 0) - (1.0 / q) * ctx.identity()
    x = x * (1.0 / lp_norm(x, 2))
    n, m = 50 * q, 16
    corr = correlation(d, x, L=m)
    pt = ww_bound_chain(d, x, None, n, m, uniform_grid(256))
    pred = 2 / (m + 1) * abs(corr.value(0)) + 4 / (m + 1) * sum(
        abs(corr.value(l)) for l in range(1, m + 1))
    assert pt.bound == pytest.approx(pred, rel=1e-10)
    assert pt.bound_predicted == pytest.approx(pred, rel=1e-10)
    assert pt.uniform_sup_sq <= pt.bound + 1e-9
    # within 10 percent of the asymptotic prediction away from multiples too
    pt2 = ww_bound_chain(d, x, None, n + 5, m, uniform_grid(256))
    assert abs(pt2.bound - pred) / pred < 0.1


def test_chain_rejects_channels_and_bad_windows():
    d = qubit_channel(0)
    x = AlgebraCtx(2).identity()
    with pytest.raises(HypothesisViolation):
        ww_bound_chain(d, x, None, 10, 2, uniform_grid(8))
    dc = cycle_conjugation(3)
    with pytest.raises(ValueError):
        ww_bound_chain(dc, AlgebraCtx(3).identity(), None, 4, 4, uniform_grid(8))


def test_certificate_csv_row_and_convention():
    ctx = AlgebraCtx(2)
    cert = vdc_gap([ctx.identity(), ctx.identity()], 1)
    assert cert.convention == "zero-pad"
    row = cert.csv_row()
    assert row[0] == 2 and row[1] == 1 and row[2] == 2
