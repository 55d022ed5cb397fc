import numpy as np
import pytest

from ergolab import (
    AlgebraCtx, Composition, KrausChannel, PermutationConjugation, Power,
    UnitaryConjugation, dynamics_from_json, dynamics_to_json, iterate,
    lp_norm, superoperator, trace, validate,
)
from ergolab.dynamics import vec, unvec
from ergolab.sampling import rng, random_hermitian, random_operator, random_permutation, random_unitary

from conftest import cycle, cycle_conjugation, haar_conjugation, qubit_channel


def all_kinds(seed=0):
    g = rng(seed)
    ctx = AlgebraCtx(3)
    u = random_unitary(ctx, g)
    kinds = [
        UnitaryConjugation(ctx, u),
        PermutationConjugation(ctx, random_permutation(3, g)),
        KrausChannel(ctx, (0.3, 0.7), (random_unitary(ctx, g), random_unitary(ctx, g))),
    ]
    kinds.append(Composition(ctx, (kinds[0], kinds[1])))
    kinds.append(Power(ctx, kinds[0], 3))
    return ctx, kinds


def test_constructor_validation():
    ctx = AlgebraCtx(2)
    with pytest.raises(ValueError):
        UnitaryConjugation(ctx, ctx.diag([1, 2]))
    with pytest.raises(ValueError):
        PermutationConjugation(ctx, (0, 0))
    u = ctx.identity()
    with pytest.raises(ValueError):
        KrausChannel(ctx, (0.5, 0.4), (u, u))
    with pytest.raises(ValueError):
        KrausChannel(ctx, (1.5, -0.5), (u, u))
    with pytest.raises(ValueError):
        Power(ctx, UnitaryConjugation(ctx, u), -1)


def test_apply_unitality_all_kinds():
    ctx, kinds = all_kinds()
    for d in kinds:
        assert d(ctx.identity()).allclose(ctx.identity(), atol=1e-12)


def test_apply_diag_unitary_on_matrix_unit():
    # oracle: dense multiplication u e01 u*
    ctx = AlgebraCtx(2)
    u = ctx.diag([1, 1j])
    d = UnitaryConjugation(ctx, u)
    e01 = ctx.matrix_unit(0, 1)
    got = d(e01)
    assert got.allclose(-1j * e01, atol=1e-15)
    dense = u.mat @ e01.mat @ u.mat.conj().T
    assert np.allclose(got.mat, dense, atol=1e-15)


def test_apply_permutation_swap():
    ctx = AlgebraCtx(2)
    d = PermutationConjugation(ctx, (1, 0))
    x = ctx.diag([2.0, 5.0])
    assert d(x).allclose(ctx.diag([5.0, 2.0]))
    # dense oracle
    p = d.permutation_matrix()
    g = rng(1)
    y = random_operator(ctx, g)
    assert np.allclose(d(y).mat, p @ y.mat @ p.conj().T, atol=1e-14)


def test_iterate():
    ctx = AlgebraCtx(4)
    d = cycle_conjugation(4)
    x = random_hermitian(ctx, rng(2))
    assert len(iterate(d, x, 0)) == 1
    orbit = iterate(d, x, 4)
    assert orbit[0].allclose(x)
    # order-q permutation closes up: brute-force repeated apply
    assert orbit[4].allclose(x, atol=1e-14)
    fixed = ctx.identity()
    assert all(o.allclose(fixed) for o in iterate(d, fixed, 3))
    with pytest.raises(ValueError):
        iterate(d, x, -1)


def test_superoperator_identity_and_consistency():
    ctx, kinds = all_kinds(3)
    ident = Power(ctx, kinds[0], 0)
    assert np.allclose(superoperator(ident), np.eye(9))
    g = rng(4)
    for d in kinds:
        s = superoperator(d)
        for _ in range(5):
            x = random_operator(ctx, g)
            assert np.allclose(s @ vec(x.mat), vec(d(x).mat), atol=1e-12)


def test_superoperator_unitary_for_automorphisms():
    d = haar_conjugation(4, seed=5)
    s = superoperator(d)
    assert np.linalg.norm(s.conj().T @ s - np.eye(16), 2) < 1e-12


def test_superoperator_kraus_contraction():
    # direct SVD oracle: all singular values <= 1 + tol
    for seed in range(5):
        d = qubit_channel(seed)
        sv = np.linalg.svd(superoperator(d), compute_uv=False)
        assert sv.max() <= 1 + 1e-10


def test_validate_cyclic_m4_not_ergodic_on_full_algebra():
    d = cycle_conjugation(4)
    rep = validate(d)
    # brute-force fixed space: commutant of the cycle has dimension 4
    s = superoperator(d)
    w = np.linalg.eigvals(s)
    assert rep.fixed_space_dim == 4
    assert not rep.ergodic
    assert rep.homomorphism


def test_validate_unitary_is_homomorphism():
    rep = validate(haar_conjugation(3, seed=6))
    assert rep.homomorphism
    assert rep.positive_on_samples
    assert rep.trace_preserving
    assert rep.contraction_inf


def test_validate_kraus_two_generic_unitaries():
    d = qubit_channel(seed=1)
    rep = validate(d)
    assert rep.ergodic and rep.fixed_space_dim == 1
    assert not rep.homomorphism
    # explicit multiplicativity witness pair among matrix units
    ctx = d.ctx
    worst = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    lhs = d(ctx.matrix_unit(i, j) @ ctx.matrix_unit(k, l))
                    rhs = d(ctx.matrix_unit(i, j)) @ d(ctx.matrix_unit(k, l))
                    worst = max(worst, float(np.abs(lhs.mat - rhs.mat).max()))
    assert worst > 1e-3


def test_trace_preservation_all_kinds():
    ctx, kinds = all_kinds(7)
    g = rng(8)
    for d in kinds:
        for _ in range(10):
            x = random_operator(ctx, g)
            assert abs(trace(d(x)) - trace(x)) <= 1e-12 * max(1.0, x.norm2())


def test_l2_isometry_for_homomorphism_kinds():
    ctx, kinds = all_kinds(9)
    g = rng(10)
    for d in kinds:
        if not d.is_homomorphism:
            continue
        for _ in range(5):
            x = random_operator(ctx, g)
            assert d(x).norm2() == pytest.approx(x.norm2(), rel=1e-12)


def test_positivity_all_kinds():
    ctx, kinds = all_kinds(11)
    g = rng(12)
    for d in kinds:
        for _ in range(5):
            y = random_operator(ctx, g)
            pos = d(y.h @ y)
            assert np.linalg.eigvalsh((pos.mat + pos.mat.conj().T) / 2).min() >= -1e-10


def test_lp_double_bound_recorded():
    # upper-bound check only: the constant 2 is never sharp here
    ctx, kinds = all_kinds(13)
    g = rng(14)
    for d in kinds:
        for _ in range(5):
            x = random_operator(ctx, g)
            for p in (1, 2, np.inf):
                assert lp_norm(d(x), p) <= 2 * lp_norm(x, p) + 1e-10


def test_ergodicity_invariant_under_coprime_power():
    ctx = AlgebraCtx(5)
    d = cycle_conjugation(5)
    base = validate(d).fixed_space_dim
    for k in (2, 3, 4):
        dk = Power(ctx, d, k)
        assert validate(dk).fixed_space_dim == base


def test_report_invariants():
    for d in (haar_conjugation(2, 15), qubit_channel(16)):
        rep = validate(d)
        if rep.homomorphism:
            assert rep.positive_on_samples
        assert rep.ergodic == (rep.fixed_space_dim == 1 and rep.fixed_contains_identity)
        if rep.weakly_mixing:
            assert rep.ergodic


def test_weakly_mixing_flags():
    rep = validate(qubit_channel(1))
    # generic two-unitary mixtures have no non-unit unimodular spectrum
    assert rep.weakly_mixing
    ident = Power(AlgebraCtx(2), haar_conjugation(2, 17), 0)
    rep_id = validate(ident)
    assert not rep_id.weakly_mixing and rep_id.fixed_space_dim == 4


def test_dynamics_json_roundtrip():
    ctx, kinds = all_kinds(18)
    g = rng(19)
    x = random_operator(ctx, g)
    for d in kinds:
        data = dynamics_to_json(d)
        d2 = dynamics_from_json(data, ctx)
        assert d(x).allclose(d2(x), atol=1e-14)
