import math

import numpy as np
import pytest

from spinbath import kernels, oracle
from spinbath.errors import InvalidArgument, UnsupportedSize
from spinbath.model import (
    ConstantCoupling,
    DensityMatrix,
    EnvironmentEnsemble,
    FullProduct,
    GeneralD1,
    OriginalD1,
    OriginalD2,
    SystemSpec,
    UniformCoupling,
    make_random_ensemble,
)

H = 2 ** -0.5


def test_build_initial_examples():
    up = EnvironmentEnsemble([1.0], [0.0], [0.0], [400.0])
    s = oracle.build_initial(SystemSpec.explicit([1.0, 0.0]), up)
    np.testing.assert_array_equal(s.amp, [1, 0, 0, 0])
    s = oracle.build_initial(SystemSpec.explicit([H, H]))
    np.testing.assert_allclose(s.amp, [H, H])
    ens = make_random_ensemble(6, 1, UniformCoupling(800.0))
    s = oracle.build_initial(SystemSpec.uniform(3), ens)
    assert abs(np.vdot(s.amp, s.amp) - 1) < 1e-12


def test_caps():
    with pytest.raises(UnsupportedSize):
        oracle.build_initial(SystemSpec.uniform(5), make_random_ensemble(20, 0, ConstantCoupling(1.0)))
    with pytest.raises(UnsupportedSize):
        oracle.build_hamiltonian_dense(6, 7, np.ones(7))


def test_evolve_identity_cases():
    ens = make_random_ensemble(4, 2, UniformCoupling(800.0))
    s = oracle.build_initial(SystemSpec.uniform(2), ens)
    assert np.array_equal(oracle.evolve(s, ens.g, 0.0).amp, s.amp)
    for t in (0.1, 3.0, 1e4):
        assert np.array_equal(oracle.evolve(s, np.zeros(4), t).amp, s.amp)
        e = oracle.evolve(s, ens.g, t)
        assert abs(np.vdot(e.amp, e.amp).real - 1) < 1e-12


def test_two_level_overlap_is_cosine():
    ens = EnvironmentEnsemble.from_amplitudes([H], [H], [400.0])
    s0 = oracle.build_initial(SystemSpec.explicit([H, H]), ens)
    for t in np.linspace(0, 0.02, 9):
        amp = oracle.evolve(s0, ens.g, t).amp
        e_up, e_down = amp[:2] / H, amp[2:] / H
        assert np.vdot(e_down, e_up) == pytest.approx(math.cos(400 * t), abs=1e-14)
        assert kernels.kernel_K(-1, ens, t).value() == pytest.approx(math.cos(400 * t), abs=1e-14)


def test_hamiltonian_examples():
    h = oracle.build_hamiltonian_dense(1, 1, [400.0])
    np.testing.assert_array_equal(h, np.diag([200.0, -200.0, -200.0, 200.0]))
    h = oracle.build_hamiltonian_dense(2, 1, [3.0])
    # Lambda in (1, 0, 0, -1) for system states 00, 01, 10, 11, times +-g
    np.testing.assert_array_equal(np.diag(h), [3, -3, 0, 0, 0, 0, -3, 3])


@pytest.mark.parametrize("m,n", [(1, 1), (2, 3), (3, 5), (4, 6), (6, 6)])
def test_hamiltonian_diagonal_and_consistent(m, n):
    g = make_random_ensemble(n, m, UniformCoupling(800.0)).g
    h = oracle.build_hamiltonian_dense(m, n, g)
    off = h - np.diag(np.diag(h))
    assert np.max(np.abs(off)) < 1e-15
    assert np.array_equal(h, h.T)
    np.testing.assert_allclose(np.diag(h), oracle.energies(m, g), atol=1e-12)


def test_expectation_identity_and_dimension_checks():
    ens = make_random_ensemble(2, 0, UniformCoupling(800.0))
    s = oracle.evolve(oracle.build_initial(SystemSpec.uniform(2), ens), ens.g, 0.01)
    obs = FullProduct(np.stack([np.eye(2)] * 2), np.eye(4))
    assert oracle.expectation(s, obs) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidArgument):
        oracle.expectation(s, OriginalD1(np.eye(2)))
    with pytest.raises(InvalidArgument):
        oracle.expectation(s, GeneralD1(np.eye(2)))


def test_expectation_matches_original_d1(rng):
    ens = make_random_ensemble(2, 3, UniformCoupling(800.0))
    a, b = 0.6, 0.8 * np.exp(0.3j)
    st = oracle.build_initial(SystemSpec.explicit([a, b]), ens)
    sm = np.array([[0.2, 1 - 2j], [1 + 2j, -0.7]])
    for t in rng.uniform(0, 0.02, 5):
        got = oracle.expectation(oracle.evolve(st, ens.g, t), OriginalD1(sm))
        assert got == pytest.approx(kernels.expectation_original_d1(a, b, sm, ens, t), abs=1e-10)


def test_expectation_matches_general_d1_uniform(rng):
    ens = make_random_ensemble(2, 3, UniformCoupling(800.0))
    st = oracle.build_initial(SystemSpec.uniform(2), ens)
    t = rng.uniform(0, 0.02, 5)
    split = kernels.sigma_split_general_d1(SystemSpec.uniform(2), None, ens, t)
    got = [oracle.expectation(oracle.evolve(st, ens.g, x), GeneralD1()) for x in t]
    np.testing.assert_allclose(got, split.expectation, atol=1e-10)


def test_partial_trace_product_state():
    ens = EnvironmentEnsemble.from_amplitudes([0.6, H], [0.8j, H], [1.0, 2.0])
    s = oracle.build_initial(SystemSpec.explicit([H, -H]), ens)
    rho = oracle.partial_trace(s, [1])
    v = np.array([0.6, 0.8j])
    np.testing.assert_allclose(rho.entries, np.outer(v, v.conj()), atol=1e-15)
    assert oracle.purity(oracle.partial_trace(s, [0, 2])) == pytest.approx(1.0)
    for bad in ([], [0, 0], [3]):
        with pytest.raises(InvalidArgument):
            oracle.partial_trace(s, bad)


def test_offdiag_norm():
    assert oracle.offdiag_norm(DensityMatrix(np.diag([0.3, 0.7]))) == 0.0
    assert oracle.offdiag_norm(DensityMatrix(np.full((2, 2), 0.5))) == pytest.approx(0.5)


def test_central_spin_coherence_is_ab_r(rng):
    ens = make_random_ensemble(3, 4, UniformCoupling(800.0))
    a, b = 0.6, 0.8j
    st = oracle.build_initial(SystemSpec.explicit([a, b]), ens)
    for t in rng.uniform(0, 0.02, 6):
        rho = oracle.partial_trace(oracle.evolve(st, ens.g, t), [0]).entries
        r = kernels.kernel_K(-1, ens, t).value()
        assert rho[0, 1] == pytest.approx(a * np.conj(b) * r, abs=1e-10)


def test_offdiag_norm_decays_early():
    ens = make_random_ensemble(8, 1, ConstantCoupling(400.0))
    st = oracle.build_initial(SystemSpec.explicit([H, H]), ens)
    t = np.linspace(0, 1.5e-3, 8)
    vals = [oracle.offdiag_norm(oracle.partial_trace(oracle.evolve(st, ens.g, x), [0])) for x in t]
    assert np.all(np.diff(vals) < 0)


def test_zero_coupling_keeps_every_reduced_state(rng):
    ens = make_random_ensemble(3, 2, UniformCoupling(800.0))
    st = oracle.build_initial(SystemSpec.explicit(np.array([0.1, 0.7j, -0.5, 0.5]), "binary"), ens)
    for k in range(5):
        r0 = oracle.partial_trace(st, [k]).entries
        for t in (0.3, 17.0):
            rt = oracle.partial_trace(oracle.evolve(st, np.zeros(3), t), [k]).entries
            np.testing.assert_allclose(rt, r0, atol=1e-12)


def test_recurrence_constant_coupling(rng):
    ens = make_random_ensemble(3, 6, ConstantCoupling(400.0))
    st = oracle.build_initial(SystemSpec.uniform(2), ens)
    obs = GeneralD1(np.array([[1, 2, 0, 1j], [2, 0, 1, 0], [0, 1, 3, 1], [-1j, 0, 1, 0]]))
    period = 2 * math.pi / 400.0
    for t in rng.uniform(0, 0.01, 5):
        a = oracle.expectation(oracle.evolve(st, ens.g, t), obs)
        b = oracle.expectation(oracle.evolve(st, ens.g, t + period), obs)
        assert a == pytest.approx(b, abs=1e-9)


def test_environment_observable(rng):
    ens = make_random_ensemble(3, 9, UniformCoupling(800.0))
    st = oracle.build_initial(SystemSpec.explicit([0.0, 1.0]), ens)
    eps = np.array([[0.5, 1j], [-1j, 2.0]])
    for t in rng.uniform(0, 0.02, 4):
        got = oracle.expectation(oracle.evolve(st, ens.g, t), OriginalD2(2, eps))
        assert got == pytest.approx(kernels.expectation_original_d2(2, ens, eps, t), abs=1e-10)
