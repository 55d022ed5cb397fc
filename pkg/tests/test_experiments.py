import numpy as np
import pytest

from ergolab import (
    AlgebraCtx, HypothesisViolation, Projection, UnitaryConjugation, find_witness,
    lp_norm, mean_ergodic_check, refine_projection, superoperator, theorem6_experiment,
    trace, uniform_grid, weak_mixing_experiment, ww_verdict,
)
from ergolab.experiments import ergodic_deviation, log_spaced_grid, verify_compression
from ergolab.sampling import rng, random_hermitian
from ergolab.scenarios import bundled_config, build_context, build_dynamics, build_observable

from conftest import cycle_conjugation, haar_conjugation, qubit_channel


def geo_mean(z, n):
    return sum(z ** k for k in range(n)) / n


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------

def test_witness_zero_observable():
    d = cycle_conjugation(4)
    ctx = AlgebraCtx(4)
    w = find_witness(d, ctx.zero(), 0.2, 0.1, 16, uniform_grid(8))
    assert w.e.rank() == 4
    assert w.eps_achieved == 0.0 and w.delta_achieved == 0.0
    assert w.feasible


def test_witness_small_norm_identity():
    d = cycle_conjugation(4)
    ctx = AlgebraCtx(4)
    x = 0.01 * ctx.diag([1, -1, 0.5, -0.5])
    w = find_witness(d, x, 0.2, delta_target=0.05, N=32, angles=uniform_grid(16))
    assert w.e.rank() == 4 and w.feasible
    assert w.delta_achieved <= 0.05


def test_witness_soundness_reverified():
    # the claimed sup is exactly what direct evaluation measures
    d = cycle_conjugation(6)
    ctx = AlgebraCtx(6)
    x = random_hermitian(ctx, rng(0), unit_l2=True) * 0.2
    angles = uniform_grid(32)
    w = find_witness(d, x, 0.4, delta_target=0.5, N=24, angles=angles)
    direct = verify_compression(d, x, w.e, 24, angles)
    assert w.delta_achieved == pytest.approx(direct, rel=1e-12)
    assert w.eps_achieved == pytest.approx(w.e.trace_defect(), abs=1e-12)


def test_witness_qcycle_vs_exhaustive_oracle():
    # diagonal dynamics keep everything diagonal: the optimal witness is a
    # coordinate cut, computable by enumeration
    q = 6
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    gamma = 0.05
    x = (q * gamma) * ctx.matrix_unit(0, 0)  # ||x||_1 = gamma
    assert lp_norm(x, 1) == pytest.approx(gamma)
    angles = uniform_grid(64)
    n_hor = 48
    w = find_witness(d, x, eps_budget=0.34, delta_target=5 * gamma, N=n_hor, angles=angles)
    assert w.delta_achieved <= 5 * gamma + 1e-12

    # per-coordinate worst weighted average over all n <= N and grid weights
    worst = np.zeros(q)
    for j in range(q):
        for n in range(1, n_hor + 1):
            ks = np.arange(j, n, q)
            if ks.size == 0:
                continue
            vals = np.abs(np.exp(2j * np.pi * np.outer(angles, ks)).sum(axis=1)) / n
            worst[j] = max(worst[j], q * gamma * vals.max())
    order = np.argsort(worst)[::-1]
    drop = int(np.floor(w.eps_achieved * q + 1e-9))
    oracle_delta = worst[order[drop:]].max() if drop < q else 0.0
    # no verified claim beats the exhaustive optimum at the same budget
    assert w.delta_achieved >= oracle_delta - 1e-9


def test_witness_infeasible_budget_flagged():
    d = cycle_conjugation(4)
    ctx = AlgebraCtx(4)
    x = ctx.diag([4.0, 0, 0, 0])
    w = find_witness(d, x, eps_budget=0.01, delta_target=1e-4, N=16,
                     angles=uniform_grid(8))
    assert not w.feasible
    assert w.delta_achieved > 1e-4


# ---------------------------------------------------------------------------
# convergence verdicts
# ---------------------------------------------------------------------------

def test_ww_verdict_identity_observable():
    # geometric closed-form oracle: at lambda = 1 the limit is the identity,
    # elsewhere the averages decay like a scalar geometric mean
    d = cycle_conjugation(4)
    ctx = AlgebraCtx(4)
    rep = ww_verdict(d, ctx.identity(), eps=0.2, N=512, angles=uniform_grid(16))
    assert rep.all_converged
    v1 = rep.verdict_at(0.0)
    assert v1.limit_scalar == pytest.approx(1.0, abs=1e-12)
    assert v1.limit_scalar_residual < 1e-12
    v2 = rep.verdict_at(0.5)  # lambda = -1
    n_fin = rep.n_grid[-1]
    assert v2.final_bilateral == pytest.approx(abs(geo_mean(-1.0, n_fin)), abs=1e-12)


def test_ww_verdict_eigenoperator():
    theta = 1.0 / 8.0
    ctx = AlgebraCtx(2)
    d = UnitaryConjugation(ctx, ctx.diag([1.0, np.exp(-2j * np.pi * theta)]))
    x = np.sqrt(2) * ctx.matrix_unit(0, 1)
    angles = uniform_grid(16)  # contains the resonant weight exactly
    rep = ww_verdict(d, x, eps=0.2, N=256, angles=angles)
    assert rep.all_converged
    res = rep.verdict_at((1.0 - theta) % 1.0)
    # at lambda mu = 1 the average is x itself for every n
    assert res.final_one_sided == pytest.approx(lp_norm(x, np.inf), rel=1e-10)


def test_ww_verdict_channel_traceless_gap_rate():
    d = qubit_channel(seed=1)
    ctx = AlgebraCtx(2)
    g = rng(4)
    x = random_hermitian(ctx, g, unit_l2=True)
    x = x - trace(x) * ctx.identity()
    x = x * 0.005
    rep = ww_verdict(d, x, eps=0.2, N=20000, angles=uniform_grid(64))
    assert rep.all_converged
    # superoperator power-norm oracle: ||S^k restricted|| <= r^k with r < 1,
    # so every limit is zero
    for v in rep.per_lambda:
        assert abs(v.limit_scalar) < 1e-5
        assert v.limit_scalar_residual < 1e-4


def test_ww_verdict_stability_under_doubling():
    d = cycle_conjugation(6)
    ctx = AlgebraCtx(6)
    x = random_hermitian(ctx, rng(5), unit_l2=True)
    angles = uniform_grid(32)
    r1 = ww_verdict(d, x, eps=0.2, N=240, angles=angles)
    r2 = ww_verdict(d, x, eps=0.2, N=480, angles=angles)
    assert [v.verdict for v in r1.per_lambda] == [v.verdict for v in r2.per_lambda]


def test_eps_assembly_subadditive():
    # tau(p_perp) stays within the sum of the component budgets
    q = 6
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    x = 0.6 * ctx.matrix_unit(0, 0)
    w = find_witness(d, x, eps_budget=0.5, delta_target=0.05, N=32,
                     angles=uniform_grid(16))
    assert w.eps_achieved <= 0.5 + 1e-12


# ---------------------------------------------------------------------------
# mean ergodic check
# ---------------------------------------------------------------------------

def test_mean_ergodic_identity_observable():
    d = qubit_channel(seed=1)
    ctx = AlgebraCtx(2)
    grid, curve = mean_ergodic_check(d, ctx.identity(), 64)
    assert np.allclose(curve, 0.0, atol=1e-13)


def test_mean_ergodic_rejects_non_ergodic():
    d = cycle_conjugation(4)  # not ergodic on the full matrix algebra
    with pytest.raises(HypothesisViolation):
        mean_ergodic_check(d, AlgebraCtx(4).identity(), 32)


def test_mean_ergodic_qcycle_exact_at_full_periods():
    # cyclic-sum arithmetic oracle: diagonal averages close up exactly
    q = 5
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    x = ctx.diag(rng(6).standard_normal(q))
    for k in (1, 2, 3):
        assert ergodic_deviation(d, x, k * q) <= 1e-14


def test_mean_ergodic_channel_envelope():
    # spectral-gap oracle: deviation <= ||x||_2 * C / ((1-r) n)
    d = qubit_channel(seed=1)
    ctx = AlgebraCtx(2)
    g = rng(7)
    x = random_hermitian(ctx, g, unit_l2=True)
    s = superoperator(d)
    mods = np.abs(np.linalg.eigvals(s))
    r = mods[mods < 1 - 1e-8].max()
    grid, curve = mean_ergodic_check(d, x, 4000)
    for n, dev in zip(grid, curve):
        assert dev <= 2.0 / ((1 - r) * n) + 1e-12


# ---------------------------------------------------------------------------
# weak mixing
# ---------------------------------------------------------------------------

def test_weak_mixing_rejects_non_mixing():
    d = cycle_conjugation(3)
    with pytest.raises(HypothesisViolation):
        weak_mixing_experiment(d, AlgebraCtx(3).identity(), 64, uniform_grid(8))


def test_weak_mixing_identity_exact_decay():
    # closed form: ||a_n(1, lambda)|| = |(1/n)(1 - lambda^n)/(1 - lambda)|
    d = qubit_channel(seed=1)
    ctx = AlgebraCtx(2)
    rep = weak_mixing_experiment(d, ctx.identity(), 1024, uniform_grid(8))
    n_fin = rep.n_grid[-1]
    for v in rep.per_lambda:
        lam = np.exp(2j * np.pi * v.angle)
        if v.angle == 0:
            continue
        assert v.final_bilateral == pytest.approx(abs(geo_mean(lam, n_fin)), abs=1e-12)
    assert rep.extras["lambda1_limit_dist_inf"] < 1e-12


def test_weak_mixing_dichotomy_channel():
    d = qubit_channel(seed=1)
    ctx = AlgebraCtx(2)
    g = rng(8)
    x = random_hermitian(ctx, g, unit_l2=True)
    x = (x - trace(x) * ctx.identity()) * 0.01
    rep = weak_mixing_experiment(d, x, 10000, uniform_grid(64))
    assert rep.uniform_tail <= 1e-5
    assert rep.extras["lambda1_limit_dist_inf"] <= 1e-5
    # lambda = -1: twisted superoperator has spectral radius < 1 on the
    # traceless part; power-norm oracle gives the decay scale
    v = rep.verdict_at(0.5)
    s = superoperator(d)
    mods = np.abs(np.linalg.eigvals(-s))
    r = mods[mods < 1 - 1e-8].max()
    assert v.final_bilateral <= 0.01 * 2 * np.sqrt(2) / ((1 - r) * rep.n_grid[-1])


# ---------------------------------------------------------------------------
# main experiment
# ---------------------------------------------------------------------------

def test_theorem6_rejects_channels():
    d = qubit_channel(0)
    with pytest.raises(HypothesisViolation):
        theorem6_experiment(d, AlgebraCtx(2).identity(), 0.1, 32, [0], uniform_grid(8))


def test_theorem6_identity_observable():
    q = 4
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    rep = theorem6_experiment(d, ctx.identity(), 0.2, 64, [0, 2], uniform_grid(32))
    assert rep.chain_holds
    assert rep.verdict in ("bWW", "bWW+WW")
    assert rep.closed_form_deviation < 1e-10


def test_theorem6_qcycle_mean_zero():
    q = 6
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    x = ctx.matrix_unit(0, 0) - (1.0 / q) * ctx.identity()
    x = x * (1.0 / lp_norm(x, 2))
    rep = theorem6_experiment(d, x, 0.2, 20 * q, [0, 4], uniform_grid(128))
    assert rep.chain_holds and rep.verdict == "bWW+WW"
    assert rep.tau_p_perp == pytest.approx(0.0)
    assert rep.projection_method == "identity"
    for pt in rep.chain:
        assert pt.uniform_sup_sq <= pt.bound + 1e-9


def test_theorem6_tensorshift_compression():
    cfg = bundled_config("tensorshift-4q")
    ctx = build_context(cfg)
    d = build_dynamics(cfg, ctx)
    x = build_observable(cfg, ctx)
    rep = theorem6_experiment(d, x, 0.6, 100, [0, 4, 16], uniform_grid(256),
                              n_sweep=[20, 60, 100])
    assert rep.projection_method == "obstruction-cut"
    assert rep.tau_p_perp == pytest.approx(0.5, abs=1e-9)
    assert rep.chain_holds
    for pt in rep.chain:
        # gamma for the shifted site observable vanishes off multiples of 4
        assert pt.uniform_sup_sq <= pt.bound + 1e-9


def test_prop7_refinement_on_qcycle():
    q = 6
    d = cycle_conjugation(q)
    ctx = AlgebraCtx(q)
    x = random_hermitian(ctx, rng(9), unit_l2=True)
    p = Projection.identity(ctx)
    p_lam, tails = refine_projection(d, x, lam_angle=0.25, p=p, nu=0.34, N=512)
    assert p.trace_value() - p_lam.trace_value() <= 0.34 + 1e-12
    head = max(tails[: len(tails) // 4])
    tail = max(tails[-max(2, len(tails) // 4):])
    assert tail <= head + 1e-12


def test_log_grid_contains_endpoints():
    g = log_spaced_grid(100)
    assert g[0] == 1 and g[-1] == 100
    assert log_spaced_grid(1) == [1]
