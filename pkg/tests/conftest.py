import numpy as np
import pytest

from ergolab import AlgebraCtx, KrausChannel, PermutationConjugation, UnitaryConjugation
from ergolab.sampling import rng, random_unitary


@pytest.fixture
def ctx4():
    return AlgebraCtx(4)


@pytest.fixture
def ctx2():
    return AlgebraCtx(2)


def cycle(n):
    return tuple((i + 1) % n for i in range(n))


def qubit_channel(seed=0, weights=(0.5, 0.5)):
    ctx = AlgebraCtx(2)
    g = rng(seed)
    us = tuple(random_unitary(ctx, g) for _ in weights)
    return KrausChannel(ctx, weights, us)


def haar_conjugation(dim, seed=0):
    ctx = AlgebraCtx(dim)
    return UnitaryConjugation(ctx, random_unitary(ctx, rng(seed)))


def cycle_conjugation(n):
    return PermutationConjugation(AlgebraCtx(n), cycle(n))
