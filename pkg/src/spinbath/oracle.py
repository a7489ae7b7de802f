"""Brute-force state-vector simulation of small system + environment instances.

Independent of :mod:`spinbath.kernels`: states are evolved with per-basis
phases taken straight from the Hamiltonian, and observables are applied as
explicit operators. Basis index ``k`` has the M system bits most significant
(``A_1`` first), then the N environment bits (``B_1`` first); bit 0 is up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, UnsupportedSize
from .model import (
    DensityMatrix,
    EnvironmentEnsemble,
    FullProduct,
    GeneralD1,
    GeneralD2,
    ObservableSpec,
    OriginalD1,
    OriginalD2,
    SystemSpec,
    popcount,
    to_binary_matrix,
)

MAX_SPINS = 24
MAX_HAMILTONIAN_SPINS = 12
MAX_KEEP = 10

SZ_HALF = np.diag([0.5, -0.5])
SZ = np.diag([1.0, -1.0])


@dataclass(frozen=True, eq=False)
class DenseState:
    m: int
    n: int
    amp: np.ndarray

    def __post_init__(self):
        if self.m + self.n > MAX_SPINS:
            raise UnsupportedSize(f"dense states are limited to {MAX_SPINS} spins")
        amp = np.asarray(self.amp, dtype=complex)
        if amp.shape != (2 ** (self.m + self.n),):
            raise InvalidArgument("amplitude vector has the wrong length")
        if abs(np.vdot(amp, amp).real - 1.0) > 1e-10:
            raise InvalidArgument("state is not normalized")
        object.__setattr__(self, "amp", amp)

    @property
    def n_spins(self) -> int:
        return self.m + self.n


def build_initial(sys: SystemSpec, ens: Optional[EnvironmentEnsemble] = None) -> DenseState:
    n = 0 if ens is None else ens.n
    if sys.m + n > MAX_SPINS:
        raise UnsupportedSize(f"dense states are limited to {MAX_SPINS} spins")
    amp = sys.amplitudes_binary()
    if ens is not None:
        for a, b in zip(ens.alpha, ens.beta):
            amp = np.kron(amp, np.array([a, b]))
    return DenseState(sys.m, n, amp)


def environment_energies(couplings) -> np.ndarray:
    """``E_B = Σ_j σ_j g_j`` for every environment basis state (σ = +1 up)."""
    g = np.asarray(couplings, dtype=float)
    n = g.size
    idx = np.arange(2**n)
    e = np.zeros(2**n)
    for j in range(n):
        bit = (idx >> (n - 1 - j)) & 1
        e += g[j] * (1 - 2 * bit)
    return e


def energies(m: int, couplings) -> np.ndarray:
    """Diagonal of ``H_A ⊗ H_B``: ``Λ_A(k) E_B(k)`` with ``Λ_A = (M - 2 l)/2``."""
    lam = (m - 2 * popcount(np.arange(2**m))) / 2.0
    return np.kron(lam, environment_energies(couplings))


def evolve(state: DenseState, couplings, t: float) -> DenseState:
    g = np.asarray(couplings, dtype=float)
    if g.size != state.n:
        raise InvalidArgument("need one coupling per environment spin")
    if t == 0:
        return DenseState(state.m, state.n, state.amp.copy())
    return DenseState(state.m, state.n, state.amp * np.exp(-1j * energies(state.m, g) * t))


def _kron_sum(ops_by_site, n_sites):
    dim = 2**n_sites
    out = np.zeros((dim, dim))
    for site, op in ops_by_site:
        term = np.ones((1, 1))
        for k in range(n_sites):
            term = np.kron(term, op if k == site else np.eye(2))
        out += term
    return out


def build_hamiltonian_dense(m: int, n: int, couplings) -> np.ndarray:
    """Explicit ``H = (Σ_i ½σ_z^{(i)}) ⊗ (Σ_j g_j σ_z^{(j)})``."""
    if m + n > MAX_HAMILTONIAN_SPINS:
        raise UnsupportedSize(f"dense Hamiltonians are limited to {MAX_HAMILTONIAN_SPINS} spins")
    g = np.asarray(couplings, dtype=float)
    if g.size != n:
        raise InvalidArgument("need one coupling per environment spin")
    h_a = _kron_sum([(i, SZ_HALF) for i in range(m)], m)
    h_b = _kron_sum([(j, g[j] * SZ) for j in range(n)], n)
    return np.kron(h_a, h_b)


# --------------------------------------------------------------------------
# Observables


def _apply_site(psi, op, axis):
    out = np.tensordot(op, psi, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _apply_system(psi, op, m, n):
    flat = psi.reshape(2**m, 2**n)
    return (op @ flat).reshape(psi.shape)


def _square(op, dim, name):
    op = np.asarray(op, dtype=complex)
    if op.shape != (dim, dim):
        raise InvalidArgument(f"{name} has shape {op.shape}, expected ({dim}, {dim})")
    return op


def _system_matrix(obs, m):
    if obs.s is None:
        return np.ones((2**m, 2**m))
    return to_binary_matrix(_square(obs.s, 2**m, "s"), m, obs.arrangement)


def apply_observable(state: DenseState, obs: ObservableSpec) -> np.ndarray:
    m, n = state.m, state.n
    psi = state.amp.reshape((2,) * (m + n)) if m + n else state.amp.copy()
    if isinstance(obs, OriginalD1):
        if m != 1:
            raise InvalidArgument("original-model observables need a single system spin")
        psi = _apply_site(psi, _square(obs.s, 2, "s"), 0)
    elif isinstance(obs, OriginalD2):
        if m != 1 or not 1 <= obs.j <= n:
            raise InvalidArgument("observed particle outside the environment")
        psi = _apply_site(psi, _square(obs.eps, 2, "eps"), m + obs.j - 1)
    elif isinstance(obs, GeneralD1):
        psi = _apply_system(psi, _system_matrix(obs, m), m, n)
    elif isinstance(obs, GeneralD2):
        psi = _apply_site(psi, _square(obs.s_tilde, 2, "s_tilde"), m - 1)
    elif isinstance(obs, FullProduct):
        if obs.eps.shape[0] != n:
            raise InvalidArgument("need one eps matrix per environment spin")
        psi = _apply_system(psi, _system_matrix(obs, m), m, n)
        for j in range(n):
            psi = _apply_site(psi, obs.eps[j], m + j)
    else:
        raise InvalidArgument(f"unsupported observable {obs!r}")
    return psi.reshape(-1)


def expectation(state: DenseState, obs: ObservableSpec) -> float:
    val = np.vdot(state.amp, apply_observable(state, obs))
    if abs(val.imag) > 1e-10:
        raise InvalidArgument("observable is not Hermitian")
    return float(val.real)


# --------------------------------------------------------------------------
# Reduced states


def partial_trace(state: DenseState, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state of the spins in ``keep`` (0-based; system spins first)."""
    total = state.n_spins
    keep = list(keep)
    if not keep or len(set(keep)) != len(keep) or any(not 0 <= k < total for k in keep):
        raise InvalidArgument(f"keep must list distinct spins in 0..{total - 1}")
    if len(keep) > MAX_KEEP:
        raise UnsupportedSize(f"reduced states are limited to {MAX_KEEP} spins")
    psi = state.amp.reshape((2,) * total)
    psi = np.moveaxis(psi, keep, list(range(len(keep)))).reshape(2 ** len(keep), -1)
    rho = psi @ psi.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def offdiag_norm(rho: DensityMatrix) -> float:
    e = rho.entries
    return float(np.sum(np.abs(e) ** 2) - np.sum(np.abs(np.diag(e)) ** 2))


def purity(rho: DensityMatrix) -> float:
    e = rho.entries
    return float(np.real(np.sum(e * e.T)))
