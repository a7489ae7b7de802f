import numpy as np
import pytest

from spinbath.logdomain import REDUCE_BLOCK, LogComplex, block_sums, wrap_phase


def test_round_trip(rng):
    z = rng.normal(size=20) + 1j * rng.normal(size=20)
    np.testing.assert_allclose(LogComplex.from_complex(z).value(), z, rtol=1e-14)


def test_zero_sentinel():
    z = LogComplex.from_complex(0.0)
    assert np.isneginf(z.log_mag) and z.phase == 0.0 and z.value() == 0


def test_phase_range():
    z = LogComplex(np.zeros(5), np.array([-1e-300, -np.pi, 7.0, 2 * np.pi, 0.0]))
    assert np.all((z.phase >= 0) & (z.phase < 2 * np.pi))
    assert np.all(wrap_phase(np.linspace(-50, 50, 1001)) < 2 * np.pi)


def test_conj_mul_pow(rng):
    a = rng.normal(size=4) + 1j * rng.normal(size=4)
    b = rng.normal(size=4) + 1j * rng.normal(size=4)
    la, lb = LogComplex.from_complex(a), LogComplex.from_complex(b)
    np.testing.assert_allclose((la * lb).value(), a * b, rtol=1e-13)
    np.testing.assert_allclose(la.conj().value(), np.conj(a), rtol=1e-13)
    np.testing.assert_allclose((la ** 3).value(), a**3, rtol=1e-12)


def test_underflow_clamps_to_zero():
    z = LogComplex(np.array([-1e5]), np.array([1.0]))
    assert z.value()[0] == 0


def test_block_sums_layout():
    x = np.arange(2 * REDUCE_BLOCK + 3, dtype=float)
    out = block_sums(x)
    assert out.shape == (3,)
    assert out.sum() == pytest.approx(x.sum())
    assert out[-1] == x[-3:].sum()
