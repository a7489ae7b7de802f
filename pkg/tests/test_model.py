import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinbath.errors import InvalidArgument, UnsupportedSize
from spinbath.model import (
    ConstantCoupling,
    EnvironmentEnsemble,
    GeneralD2,
    OriginalD1,
    OriginalD2,
    SystemSpec,
    TimeGrid,
    UniformCoupling,
    block_index,
    concatenate,
    degeneracy_order,
    down_counts,
    iter_ensemble_chunks,
    make_random_ensemble,
    to_binary_matrix,
    to_degeneracy_matrix,
    uniform_block_pair_weight,
)

# values computed independently (math.lgamma / hand arithmetic)
LN_BINOM_1000_500 = 689.4672615678512


def test_constant_ensemble_small():
    ens = make_random_ensemble(3, 7, ConstantCoupling(400.0))
    assert ens.n == 3
    assert np.all(ens.g == 400.0)
    np.testing.assert_allclose(np.abs(ens.alpha) ** 2 + np.abs(ens.beta) ** 2, 1.0, atol=1e-12)
    assert ens.constant_g == 400.0


def test_amplitude_mean_matches_independent_stream():
    ens = make_random_ensemble(10**5, 1, ConstantCoupling(400.0))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=1, spawn_key=(0,))))
    p = rng.random(10**5)
    assert np.array_equal(ens.p, p)
    assert abs(p.mean() - 0.5) < 0.01


def test_uniform_coupling_mean():
    ens = make_random_ensemble(10**5, 1, UniformCoupling(800.0))
    assert abs(ens.g.mean() - 400.0) < 5.0
    assert ens.g.min() >= 0.0 and ens.g.max() <= 800.0
    assert ens.constant_g is None


def test_amplitudes_do_not_depend_on_coupling_mode():
    a = make_random_ensemble(50, 3, ConstantCoupling(400.0))
    b = make_random_ensemble(50, 3, UniformCoupling(800.0))
    assert np.array_equal(a.p, b.p) and np.array_equal(a.phase_beta, b.phase_beta)


def test_reproducible_and_seed_sensitive():
    a = make_random_ensemble(1000, 5, UniformCoupling(800.0))
    b = make_random_ensemble(1000, 5, UniformCoupling(800.0))
    c = make_random_ensemble(1000, 6, UniformCoupling(800.0))
    for f in ("p", "phase_alpha", "phase_beta", "g"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert not np.array_equal(a.p, c.p)


def test_streamed_chunks_concatenate_to_full_ensemble():
    n = (1 << 20) + 17
    full = make_random_ensemble(n, 9, ConstantCoupling(400.0))
    parts = list(iter_ensemble_chunks(n, 9, ConstantCoupling(400.0)))
    assert [p.n for p in parts] == [1 << 20, 17]
    joined = concatenate(*parts)
    assert np.array_equal(joined.p, full.p) and np.array_equal(joined.phase_alpha, full.phase_alpha)


@pytest.mark.parametrize("args", [(0, 1, ConstantCoupling(400.0)), (3, 1, ConstantCoupling(0.0)),
                                  (3, 1, UniformCoupling(-1.0)), (3, -1, ConstantCoupling(1.0)),
                                  (2.5, 1, ConstantCoupling(1.0))])
def test_ensemble_bad_arguments(args):
    with pytest.raises(InvalidArgument):
        make_random_ensemble(*args)


def test_ensemble_invariants_enforced():
    with pytest.raises(InvalidArgument):
        EnvironmentEnsemble.from_amplitudes([1.0], [0.5], [1.0])
    with pytest.raises(InvalidArgument):
        EnvironmentEnsemble([0.5], [0.0], [0.0], [-1.0])
    with pytest.raises(InvalidArgument):
        EnvironmentEnsemble([0.5, 0.2], [0.0], [0.0], [1.0])
    ens = EnvironmentEnsemble.from_amplitudes([0.6j], [0.8], [3.0])
    np.testing.assert_allclose(ens.alpha, [0.6j])
    np.testing.assert_allclose(ens.beta, [0.8])
    with pytest.raises(ValueError):
        ens.p[0] = 0.1


def test_block_index_m1():
    idx = block_index(1)
    assert idx.f_table == (0, 1, 2)
    np.testing.assert_array_equal(idx.eigenvalue, [0.5, -0.5])


def test_block_index_m4():
    idx = block_index(4)
    assert idx.multiplicity(2) == 6
    assert idx.f(2) == 11
    assert list(idx.block_of(2)) == list(range(5, 11))


def test_block_index_large_log_multiplicity():
    idx = block_index(1000)
    assert abs(idx.log_multiplicity[500] - LN_BINOM_1000_500) <= 1e-10 * LN_BINOM_1000_500
    assert idx.eigenvalue[0] == 500 and idx.eigenvalue[-1] == -500
    assert idx.m_tilde == 499
    assert block_index(7).m_tilde == 3


def test_block_index_bad_sizes():
    for m in (0, -1, 10**6 + 1):
        with pytest.raises(InvalidArgument):
            block_index(m)


@pytest.mark.parametrize("m", range(1, 17))
def test_block_sums(m):
    idx = block_index(m)
    total = np.sum(np.exp(idx.log_multiplicity))
    assert abs(total - 2**m) <= 1e-9 * 2**m
    f = idx.f_table
    assert f[0] == 0 and f[-1] == 2**m
    assert all(f[l + 1] - f[l] == math.comb(m, l) for l in range(m + 1))
    assert np.all(np.diff(idx.eigenvalue) < 0)


@pytest.mark.parametrize("m", range(1, 13))
def test_degeneracy_grouping(m):
    counts = np.bincount(down_counts(m), minlength=m + 1)
    assert [int(c) for c in counts] == [math.comb(m, l) for l in range(m + 1)]
    order = degeneracy_order(m)
    assert np.all(np.diff(down_counts(m)[order]) >= 0)


def test_uniform_block_pair_weight_examples():
    assert math.exp(uniform_block_pair_weight(block_index(1), 0, 1)) == pytest.approx(0.5, abs=1e-15)
    assert math.exp(uniform_block_pair_weight(block_index(10), 5, 5)) == pytest.approx(62.015625, rel=1e-12)
    idx = block_index(2)
    lab = down_counts(2)
    brute = {}
    for lam in range(4):
        for lam2 in range(4):
            key = (lab[lam], lab[lam2])
            brute[key] = brute.get(key, 0.0) + 0.25
    for (l, l2), w in brute.items():
        assert math.exp(uniform_block_pair_weight(idx, int(l), int(l2))) == pytest.approx(w, rel=1e-12)
    assert sum(brute.values()) == 4.0
    with pytest.raises(InvalidArgument):
        uniform_block_pair_weight(idx, 3, 0)


def test_system_spec():
    with pytest.raises(InvalidArgument):
        SystemSpec.explicit([1.0, 1.0])
    with pytest.raises(UnsupportedSize):
        SystemSpec(21, np.zeros(2**21, dtype=complex))
    sys = SystemSpec.product([(1.0, 0.0), (0.0, 1.0)])
    np.testing.assert_array_equal(sys.amplitudes_binary(), [0, 1, 0, 0])
    uni = SystemSpec.uniform(3)
    np.testing.assert_allclose(uni.amplitudes_binary(), 2 ** -1.5)
    c = np.arange(8) + 1.0
    c = c / np.linalg.norm(c)
    deg = SystemSpec.explicit(c, "degeneracy")
    np.testing.assert_array_equal(deg.amplitudes_binary()[degeneracy_order(3)], c)


def test_matrix_reordering_round_trip(rng):
    s = rng.normal(size=(8, 8))
    assert np.array_equal(to_degeneracy_matrix(to_binary_matrix(s, 3, "degeneracy"), 3), s)


def test_observables_must_be_hermitian():
    with pytest.raises(InvalidArgument):
        OriginalD1(np.array([[1, 1], [0, 1]]))
    with pytest.raises(InvalidArgument):
        OriginalD2(0, np.eye(2))
    with pytest.raises(InvalidArgument):
        GeneralD2(np.array([[1j, 0], [0, 1]]))
    OriginalD2(1, np.array([[1, 2 - 1j], [2 + 1j, 0]]))


def test_time_grid():
    g = TimeGrid(3e-6)
    t = g.samples
    assert t.size == 201 and t[0] == 0.0 and t[-1] == 3e-6
    np.testing.assert_allclose(np.diff(t), 3e-6 / 200, rtol=1e-9)
    for bad in ((0.0, 200), (1.0, 1)):
        with pytest.raises(InvalidArgument):
            TimeGrid(*bad)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**64 - 1))
def test_normalization_property(n, seed):
    ens = make_random_ensemble(n, seed, UniformCoupling(800.0))
    assert np.all(np.abs(np.abs(ens.alpha) ** 2 + np.abs(ens.beta) ** 2 - 1.0) <= 1e-12)
