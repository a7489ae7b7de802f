"""Closed-form expectation values evaluated in the log domain.

Everything here reduces to products over environment spins of the form

    K_m(t) = Π_j (|α_j|² e^{i m g_j t} + |β_j|² e^{-i m g_j t})

(or the ε-decorated variant in :func:`block_kernel`). ``K_{-1}`` is the
environment overlap ``r(t)``; the overlap of the environment states attached
to system blocks ``l`` and ``l'`` is ``K_{l-l'}``.

Reduction order is fixed: per-particle terms are summed in blocks of
``REDUCE_BLOCK``, the block sums of each ``ENSEMBLE_CHUNK`` are added, and the
chunk totals are added last. Threads only split the time axis, so results
do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .errors import InvalidArgument, UnsupportedSize
from .logdomain import LogComplex, block_sums, wrap_phase
from .model import (
    ENSEMBLE_CHUNK,
    EnvironmentEnsemble,
    GeneralD1,
    SystemSpec,
    BlockIndex,
    FullProduct,
    NORM_TOL,
    DensityMatrix,
    block_index,
    degeneracy_order,
    down_counts,
    log_binom,
    to_binary_matrix,
    to_degeneracy_matrix,
)

# Kernel weights more than this many e-folds below the largest are dropped.
WEIGHT_CUTOFF = 50.0
# Elements per temporary (kernels x particles) array.
WORK_ELEMENTS = 1 << 22
MAX_LIMIT_M = 12

Source = Union[EnvironmentEnsemble, Iterable[EnvironmentEnsemble]]


# --------------------------------------------------------------------------
# Kernel tables


def _chunks(source: Source):
    if isinstance(source, EnvironmentEnsemble):
        if source.n <= ENSEMBLE_CHUNK:
            yield source
            return
        for start in range(0, source.n, ENSEMBLE_CHUNK):
            yield source[start:start + ENSEMBLE_CHUNK]
    else:
        yield from source


def _map_times(fn, n_times, workers):
    if workers is None or workers <= 1 or n_times < 2:
        return [fn(k) for k in range(n_times)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_times)))


def _chunk_partials(ms, chunk, times, want_phase, workers):
    """Log-magnitude and phase sums of one chunk for every (m, t) pair."""
    ms = np.asarray(ms, dtype=float)
    x4 = 4.0 * chunk.p * chunk.q
    pmq = chunk.p - chunk.q
    g_const = chunk.constant_g
    group = max(1, WORK_ELEMENTS // max(chunk.n, 1))

    def at_time(k):
        t = times[k]
        lm_out = np.empty(ms.size)
        ph_out = np.zeros(ms.size)
        for lo in range(0, ms.size, group):
            mm = ms[lo:lo + group, None]
            if g_const is not None:
                phi = mm * (g_const * t)
            else:
                phi = mm * (chunk.g * t)[None, :]
            s = np.sin(phi)
            with np.errstate(divide="ignore"):
                lm = 0.5 * np.log1p(-x4 * (s * s))
            lm_out[lo:lo + group] = block_sums(lm).sum(axis=-1)
            if want_phase:
                ph = np.arctan2(pmq * s, np.cos(phi))
                ph_out[lo:lo + group] = wrap_phase(block_sums(ph, wrap=True).sum(axis=-1))
        return lm_out, ph_out

    parts = _map_times(at_time, len(times), workers)
    lm = np.stack([p[0] for p in parts], axis=-1)
    ph = np.stack([p[1] for p in parts], axis=-1)
    return lm, ph


def kernel_table(ms, source: Source, times, want_phase=True, workers=1) -> LogComplex:
    """``K_m(t)`` for non-negative integers ``ms`` (1-D) and 1-D ``times``.

    ``source`` is an ensemble or an iterable of ensemble chunks (streaming
    mode); both give identical bits when the chunks are the ones produced by
    :func:`spinbath.model.iter_ensemble_chunks`.
    """
    ms = np.asarray(ms, dtype=np.int64)
    times = np.asarray(times, dtype=float)
    if np.any(ms < 0):
        raise InvalidArgument("kernel_table expects non-negative orders")
    lms, phs = [], []
    for chunk in _chunks(source):
        lm, ph = _chunk_partials(ms, chunk, times, want_phase, workers)
        lms.append(lm)
        phs.append(ph)
    if not lms:
        raise InvalidArgument("empty environment")
    lm = np.stack(lms).sum(axis=0)
    ph = wrap_phase(np.stack(phs).sum(axis=0)) if want_phase else np.zeros_like(lm)
    return LogComplex(lm, ph)


def kernel_K(m, ens: Source, t, workers=1) -> LogComplex:
    """``K_m(t)``; output shape is ``shape(m) + shape(t)``.

    Negative orders are evaluated as the conjugate of the positive order, so
    ``K_{-m} = conj(K_m)`` holds exactly.
    """
    m_arr = np.asarray(m)
    if not np.issubdtype(m_arr.dtype, np.integer):
        if np.any(m_arr != np.round(m_arr)):
            raise InvalidArgument("kernel order must be an integer")
        m_arr = m_arr.astype(np.int64)
    t_arr = np.asarray(t, dtype=float)
    uniq, inv = np.unique(np.abs(m_arr).ravel(), return_inverse=True)
    table = kernel_table(uniq, ens, t_arr.ravel(), workers=workers)
    lm = table.log_mag[inv].reshape(m_arr.shape + t_arr.shape)
    ph = table.phase[inv].reshape(m_arr.shape + t_arr.shape)
    neg = (m_arr < 0).reshape(m_arr.shape + (1,) * t_arr.ndim)
    return LogComplex(lm, np.where(neg, -ph, ph))


def r_of_t(ens: Source, t, workers=1) -> LogComplex:
    """Environment overlap ``r(t) = K_{-1}(t)``."""
    return kernel_K(-1, ens, t, workers)


def log_r2(ens: Source, t, workers=1) -> np.ndarray:
    """``ln |r(t)|²``, skipping the phase computation."""
    t_arr = np.asarray(t, dtype=float)
    table = kernel_table([1], ens, t_arr.ravel(), want_phase=False, workers=workers)
    return (2.0 * table.log_mag[0]).reshape(t_arr.shape)


def r2_of_t(ens: Source, t, workers=1) -> np.ndarray:
    return np.exp(log_r2(ens, t, workers))


# --------------------------------------------------------------------------
# ε-decorated kernels


def _per_particle_eps(eps, n):
    eps = np.asarray(eps, dtype=complex)
    if eps.shape == (2, 2):
        eps = np.broadcast_to(eps, (n, 2, 2))
    if eps.shape != (n, 2, 2):
        raise InvalidArgument(f"eps must have shape (2, 2) or ({n}, 2, 2), got {eps.shape}")
    return eps


def block_kernel(l: int, l2: int, m_sys: int, ens: EnvironmentEnsemble, eps, t) -> LogComplex:
    """``Π_j ⟨b_j(l')|ε_j|b_j(l)⟩`` for system blocks ``l`` and ``l'``.

    Each factor is ``|α|² ε↑↑ e^{idθ} + |β|² ε↓↓ e^{-idθ} + 2Re(αβ* ε↓↑ e^{isθ})``
    with ``d = l - l'``, ``s = l + l' - M`` and ``θ = g t``. With ε the
    identity this is ``K_{l-l'}``.
    """
    eps = _per_particle_eps(eps, ens.n)
    t_arr = np.asarray(t, dtype=float)
    d = l - l2
    s = l + l2 - m_sys
    theta = ens.g[:, None] * t_arr.ravel()[None, :]
    ab = (ens.alpha * np.conj(ens.beta) * eps[:, 1, 0])[:, None]
    z = (ens.p[:, None] * eps[:, 0, 0, None] * np.exp(1j * d * theta)
         + ens.q[:, None] * eps[:, 1, 1, None] * np.exp(-1j * d * theta)
         + 2.0 * np.real(ab * np.exp(1j * s * theta)))
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(z))
    ph = np.angle(z)
    lm = block_sums(lm.T).sum(axis=-1)
    ph = block_sums(ph.T, wrap=True).sum(axis=-1)
    return LogComplex(lm.reshape(t_arr.shape), ph.reshape(t_arr.shape))


def gamma0(ens: EnvironmentEnsemble, eps, t) -> np.ndarray:
    """Environment factor of the ``|b|² s⇓⇓`` term (system spin down).

    The matching factor for the up state is ``gamma0(ens, eps, -t)``.
    """
    return block_kernel(1, 1, 1, ens, eps, t).value()


def gamma1(ens: EnvironmentEnsemble, eps, t) -> np.ndarray:
    """Environment factor of the ``a b* s⇓⇑`` cross term; equals r(t) for ε = I."""
    return block_kernel(0, 1, 1, ens, eps, t).value()


# --------------------------------------------------------------------------
# Original model


def _check_ab(a, b):
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > NORM_TOL:
        raise InvalidArgument("system amplitudes must satisfy |a|^2 + |b|^2 = 1")


def expectation_original_d1(a, b, s, ens: Source, t, workers=1) -> np.ndarray:
    """``⟨O_P ⊗ I⟩ = |a|² s⇑⇑ + |b|² s⇓⇓ + 2Re(a b* s⇓⇑ r(t))``."""
    _check_ab(a, b)
    s = np.asarray(s, dtype=complex)
    r = r_of_t(ens, t, workers).value()
    return (abs(a) ** 2 * s[0, 0].real + abs(b) ** 2 * s[1, 1].real
            + 2.0 * np.real(a * np.conj(b) * s[1, 0] * r))


def _check_j(j, n):
    if not isinstance(j, (int, np.integer)) or not 1 <= j <= n:
        raise InvalidArgument(f"particle index j must be in 1..{n}, got {j!r}")


def _d2_oscillation(j, ens, eps_j, t, a, b):
    theta = ens.g[j - 1] * np.asarray(t, dtype=float)
    c = ens.alpha[j - 1] * np.conj(ens.beta[j - 1]) * np.asarray(eps_j)[1, 0]
    return c * (abs(a) ** 2 * np.exp(-1j * theta) + abs(b) ** 2 * np.exp(1j * theta))


def expectation_original_d2(j: int, ens: EnvironmentEnsemble, eps_j, t, a=0.0, b=1.0) -> np.ndarray:
    """``⟨I ⊗ O_j⟩`` for environment spin ``j`` (1-based).

    ``|α_j|² ε↑↑ + |β_j|² ε↓↓ + 2Re(α_j β_j* ε↓↑ (|a|² e^{-iθ} + |b|² e^{iθ}))``
    with ``θ = g_j t``. The default ``(a, b) = (0, 1)`` leaves a single
    oscillating term of constant envelope.
    """
    _check_j(j, ens.n)
    _check_ab(a, b)
    eps_j = np.asarray(eps_j, dtype=complex)
    base = ens.p[j - 1] * eps_j[0, 0].real + ens.q[j - 1] * eps_j[1, 1].real
    return base + 2.0 * np.real(_d2_oscillation(j, ens, eps_j, t, a, b))


def original_d2_envelope(j: int, ens: EnvironmentEnsemble, eps_j, t, a=0.0, b=1.0) -> np.ndarray:
    """Amplitude of the oscillating part of :func:`expectation_original_d2`."""
    _check_j(j, ens.n)
    return 2.0 * np.abs(_d2_oscillation(j, ens, eps_j, t, a, b))


# --------------------------------------------------------------------------
# Generalized model: Σ split


@dataclass(frozen=True, eq=False)
class SigmaSplit:
    """``⟨O⟩ = Σ1 + Σ2(t) + Σ3(t)``, all scaled by ``exp(-log_scale)``.

    ``sigma1`` is the time-independent diagonal-block part, ``sigma2`` the
    mirror blocks ``(l, M-l)`` and ``sigma3`` every other off-diagonal block.
    """

    times: np.ndarray
    sigma1: float
    sigma2: np.ndarray
    sigma3: np.ndarray
    normalization: float
    log_scale: float = 0.0

    @property
    def sigma_nd(self) -> np.ndarray:
        return self.sigma2 + self.sigma3

    @property
    def normalized(self) -> np.ndarray:
        if self.normalization == 0.0:
            raise InvalidArgument("non-diagonal part vanishes at t=0; cannot normalize")
        return self.sigma_nd / self.normalization

    def raw(self, values):
        return np.asarray(values) * math.exp(self.log_scale)

    @property
    def expectation(self) -> np.ndarray:
        return self.raw(self.sigma1 + self.sigma_nd)


@dataclass
class _Terms:
    """Kernel coefficients: Σ2 = Σ 2Re(c K_m), Σ3 = Re Σ c K_m."""

    sigma1: float
    mirror: dict
    generic: dict
    log_scale: float = 0.0

    def orders(self):
        return sorted({abs(m) for m in self.mirror} | {abs(m) for m in self.generic})


def _evaluate(terms: _Terms, ens: Source, times, workers) -> SigmaSplit:
    times = np.asarray(times, dtype=float)
    orders = terms.orders()
    if orders:
        table = kernel_table(orders, ens, times, workers=workers).value()
    else:
        table = np.ones((0, times.size), dtype=complex)
    row = {m: i for i, m in enumerate(orders)}

    def assemble(tab):
        def kern(m):
            k = tab[row[abs(m)]]
            return np.conj(k) if m < 0 else k

        s2 = np.zeros(tab.shape[-1])
        s3 = np.zeros(tab.shape[-1], dtype=complex)
        for m, c in terms.mirror.items():
            s2 = s2 + 2.0 * np.real(c * kern(m))
        for m, c in terms.generic.items():
            s3 = s3 + c * kern(m)
        return s2, np.real(s3)

    s2, s3 = assemble(table)
    # same arithmetic with every kernel set to 1, i.e. the t=0 value
    n2, n3 = assemble(np.ones((len(orders), 1), dtype=complex))
    return SigmaSplit(times, float(terms.sigma1), s2, s3, float(n2[0] + n3[0]), terms.log_scale)


def _prune(coeffs: dict) -> dict:
    if not coeffs:
        return coeffs
    top = max(abs(c) for c in coeffs.values())
    if top == 0.0:
        return {}
    floor = top * math.exp(-WEIGHT_CUTOFF)
    return {m: c for m, c in coeffs.items() if abs(c) > floor}


def collapse_block_weights(w: np.ndarray) -> _Terms:
    """Group an ``(M+1)x(M+1)`` block-weight matrix by kernel order.

    ``w[l, l']`` multiplies ``K_{l-l'}``. Diagonal blocks go to Σ1, mirror
    blocks ``l + l' = M`` (``l != l'``) to Σ2 and the rest to Σ3.
    """
    w = np.asarray(w, dtype=complex)
    m = w.shape[0] - 1
    idx = block_index(m)
    sigma1 = float(np.real(np.trace(w)))
    mirror = {l - (m - l): w[l, m - l] for l in range(idx.m_tilde + 1) if w[l, m - l] != 0}
    generic: dict = {}
    for l in range(m + 1):
        for l2 in range(m + 1):
            if l == l2 or l + l2 == m or w[l, l2] == 0:
                continue
            generic[l - l2] = generic.get(l - l2, 0.0) + w[l, l2]
    return _Terms(sigma1, mirror, generic)


def _aggregate_blocks(m, b: np.ndarray) -> np.ndarray:
    """Sum a binary-ordered ``2^M x 2^M`` pair-weight matrix into blocks."""
    lab = down_counts(m)
    g = np.zeros((m + 1, 2**m))
    g[lab, np.arange(2**m)] = 1.0
    return g @ b @ g.T


def general_d1_block_weights(sys: SystemSpec, s: Optional[np.ndarray] = None, s_arrangement=None) -> np.ndarray:
    """``W[l, l'] = Σ C_λ C*_λ' s_{λ'λ}`` over λ in block l and λ' in block l'."""
    c = sys.amplitudes_binary()
    m = sys.m
    lab = down_counts(m)
    if s is None:
        v = np.zeros(m + 1, dtype=complex)
        np.add.at(v, lab, c)
        return np.outer(v, np.conj(v))
    s_bin = to_binary_matrix(s, m, s_arrangement or sys.arrangement)
    if s_bin.shape != (2**m, 2**m):
        raise InvalidArgument(f"s must be {2**m}x{2**m}")
    b = c[:, None] * s_bin.T * np.conj(c)[None, :]
    return _aggregate_blocks(m, b)


def _uniform_d1_terms(m: int) -> _Terms:
    ln2 = math.log(2.0)
    l = np.arange(m + 1)
    log_cm = log_binom(m, l)
    log_scale = float(log_binom(2 * m, m) - m * ln2)
    sigma1 = 1.0
    mirror = {}
    for ll in range(block_index(m).m_tilde + 1):
        mirror[2 * ll - m] = math.exp(2 * log_cm[ll] - m * ln2 - log_scale)
    generic = {}
    for d in range(1, m + 1):
        lv = float(log_binom(2 * m, m + d))
        if (m + d) % 2 == 0:
            lx = 2 * float(log_cm[(m + d) // 2])
            if lx >= lv:
                continue
            lv = lv + math.log1p(-math.exp(lx - lv))
        v = math.exp(lv - m * ln2 - log_scale)
        generic[d] = v
        generic[-d] = v
    return _Terms(sigma1, _prune(mirror), _prune(generic), log_scale)


def sigma_split_general_d1(sys: SystemSpec, idx: Optional[BlockIndex], ens: Source, times,
                           obs: Optional[GeneralD1] = None, workers=1) -> SigmaSplit:
    """Σ split of ``⟨O_A ⊗ I⟩`` for the M-spin system.

    Uniform amplitudes with ``s = 1`` use closed-form block weights in the
    log domain (any M up to 10^6); anything else builds the block weights
    from explicit amplitudes.
    """
    if idx is not None and idx.m != sys.m:
        raise InvalidArgument("block index does not match system size")
    s = None if obs is None else obs.s
    if sys.is_uniform and s is None:
        terms = _uniform_d1_terms(sys.m)
    else:
        if sys.m > 20:
            raise UnsupportedSize("explicit block weights need M <= 20")
        w = general_d1_block_weights(sys, s, None if obs is None else obs.arrangement)
        terms = collapse_block_weights(w)
    return _evaluate(terms, ens, times, workers)


def general_d2_block_weights(sys: SystemSpec, s_tilde) -> np.ndarray:
    """Block weights of ``I ⊗ ... ⊗ s̃`` acting on the last system spin."""
    st = np.asarray(s_tilde, dtype=complex)
    m = sys.m
    c = sys.amplitudes_binary()
    even = np.arange(0, 2**m, 2)
    lab = down_counts(m)[even]
    c0, c1 = c[even], c[even + 1]
    w = np.zeros((m + 1, m + 1), dtype=complex)
    np.add.at(w, (lab, lab), np.abs(c0) ** 2 * st[0, 0])
    np.add.at(w, (lab + 1, lab + 1), np.abs(c1) ** 2 * st[1, 1])
    np.add.at(w, (lab, lab + 1), c0 * np.conj(c1) * st[1, 0])
    np.add.at(w, (lab + 1, lab), c1 * np.conj(c0) * st[0, 1])
    return w


def _uniform_d2_terms(m: int, st) -> _Terms:
    st = np.asarray(st, dtype=complex)
    sigma1 = 0.5 * float(np.real(st[0, 0] + st[1, 1]))
    mid = 0.0
    mirror = {}
    if m % 2 == 1:
        mid = math.exp(float(log_binom(m - 1, (m - 1) // 2)) - m * math.log(2.0))
        mirror[-1] = st[1, 0] * mid
    generic = {-1: st[1, 0] * (0.5 - mid), 1: st[0, 1] * (0.5 - mid)}
    return _Terms(sigma1, _prune(mirror), _prune(generic))


def sigma_split_general_d2(sys: SystemSpec, idx: Optional[BlockIndex], ens: Source, s_tilde, times,
                           workers=1) -> SigmaSplit:
    """Σ split of the last system spin's observable ``s̃``.

    Only kernels ``K_{±1}`` occur: flipping one spin moves one block.
    The mirror term exists for odd M only.
    """
    if idx is not None and idx.m != sys.m:
        raise InvalidArgument("block index does not match system size")
    st = np.asarray(s_tilde, dtype=complex)
    if st.shape != (2, 2) or np.any(np.abs(st - st.conj().T) > 1e-12):
        raise InvalidArgument("s_tilde must be a Hermitian 2x2 matrix")
    if sys.is_uniform:
        terms = _uniform_d2_terms(sys.m, st)
    else:
        terms = collapse_block_weights(general_d2_block_weights(sys, st))
    return _evaluate(terms, ens, times, workers)


def expectation_full_product(sys: SystemSpec, ens: EnvironmentEnsemble, obs: FullProduct, t) -> np.ndarray:
    """``⟨O_A ⊗ (⊗_j O_j)⟩`` by explicit block sums (small instances)."""
    if sys.m > 12:
        raise UnsupportedSize("full product observables are limited to M <= 12")
    if obs.eps.shape[0] != ens.n:
        raise InvalidArgument("eps must list one 2x2 matrix per environment spin")
    w = general_d1_block_weights(sys, obs.s, obs.arrangement)
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros(t_arr.shape, dtype=complex)
    for l in range(sys.m + 1):
        for l2 in range(sys.m + 1):
            if w[l, l2] != 0:
                total += w[l, l2] * block_kernel(l, l2, sys.m, ens, obs.eps, t_arr).value()
    return np.real(total)


# --------------------------------------------------------------------------
# Long-time reduced states


def block_diagonal_limit(sys: SystemSpec) -> DensityMatrix:
    """Predicted long-time ``ρ_A``: the initial state with inter-block
    coherences removed, in degeneracy order."""
    if sys.m > MAX_LIMIT_M:
        raise UnsupportedSize(f"block-diagonal limit is limited to M <= {MAX_LIMIT_M}")
    c = sys.amplitudes_binary()
    rho = to_degeneracy_matrix(np.outer(c, np.conj(c)), sys.m)
    lab = down_counts(sys.m)[degeneracy_order(sys.m)]
    return DensityMatrix(np.where(lab[:, None] == lab[None, :], rho, 0.0))


def single_particle_limit(sys: SystemSpec) -> DensityMatrix:
    """Predicted long-time state of the last system spin: its populations."""
    if sys.is_uniform:
        return DensityMatrix(np.diag([0.5, 0.5]))
    c = sys.amplitudes_binary()
    p_up = float(np.sum(np.abs(c[0::2]) ** 2))
    return DensityMatrix(np.diag([p_up, 1.0 - p_up]))


def reduced_state_limits(sys: SystemSpec):
    return block_diagonal_limit(sys), single_particle_limit(sys)
