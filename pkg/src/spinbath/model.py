"""Domain types for the spin-bath model and its M-particle generalization.

Conventions used throughout the package:

* Single-spin basis index 0 is up (``|⇑⟩`` / ``|↑⟩``), index 1 is down.
* A 2x2 coefficient matrix ``c`` represents ``Σ c[x, y] |x⟩⟨y|``, so
  ``c[1, 0]`` is the coefficient of ``|↓⟩⟨↑|``.
* System basis states are labelled either in *binary* order (particle
  ``A_1`` is the most significant bit) or in *degeneracy* order (sorted by
  the number of down spins ``l``, ties broken by binary index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union

import numpy as np
from scipy.special import gammaln

from .errors import InvalidArgument, UnsupportedSize

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
MAX_EXPLICIT_M = 20
MAX_BLOCK_M = 10**6
MAX_SEED = 2**64

# Particles per independently seeded RNG stream. A multiple of the
# reduction chunk so streamed and in-memory evaluations agree bitwise.
ENSEMBLE_CHUNK = 1 << 20


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Environment


@dataclass(frozen=True)
class ConstantCoupling:
    g: float


@dataclass(frozen=True)
class UniformCoupling:
    g_max: float


GMode = Union[ConstantCoupling, UniformCoupling]


@dataclass(frozen=True, eq=False)
class EnvironmentEnsemble:
    """The N environment spins: amplitudes ``α_j, β_j`` and couplings ``g_j``.

    Amplitudes are stored as ``p = |α|²`` plus the two phases; ``|β|²`` is
    defined as ``1 - p`` so that normalization holds exactly in floating
    point. Couplings are in s⁻¹ and enter the dynamics as ``exp(i g t)``.
    """

    p: np.ndarray
    phase_alpha: np.ndarray
    phase_beta: np.ndarray
    g: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        p = _frozen(self.p, float)
        pa = _frozen(self.phase_alpha, float)
        pb = _frozen(self.phase_beta, float)
        g = _frozen(self.g, float)
        if not (p.ndim == pa.ndim == pb.ndim == g.ndim == 1):
            raise InvalidArgument("ensemble arrays must be one-dimensional")
        if not (p.size == pa.size == pb.size == g.size):
            raise InvalidArgument("alpha, beta and g must have the same length")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise InvalidArgument("|alpha|^2 must lie in [0, 1]")
        if g.size and g.min() < 0.0:
            raise InvalidArgument("couplings must be non-negative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "phase_alpha", pa)
        object.__setattr__(self, "phase_beta", pb)
        object.__setattr__(self, "g", g)

    @classmethod
    def from_amplitudes(cls, alpha, beta, g) -> "EnvironmentEnsemble":
        alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
        beta = np.atleast_1d(np.asarray(beta, dtype=complex))
        g = np.broadcast_to(np.asarray(g, dtype=float), alpha.shape)
        if alpha.shape != beta.shape:
            raise InvalidArgument("alpha and beta must have the same length")
        norm = np.abs(alpha) ** 2 + np.abs(beta) ** 2
        if np.any(np.abs(norm - 1.0) > NORM_TOL):
            raise InvalidArgument("each environment spin must satisfy |alpha|^2 + |beta|^2 = 1")
        return cls(np.abs(alpha) ** 2 / norm, np.angle(alpha), np.angle(beta), g)

    @property
    def n(self) -> int:
        return int(self.p.size)

    @property
    def q(self) -> np.ndarray:
        return 1.0 - self.p

    @property
    def alpha(self) -> np.ndarray:
        return np.sqrt(self.p) * np.exp(1j * self.phase_alpha)

    @property
    def beta(self) -> np.ndarray:
        return np.sqrt(self.q) * np.exp(1j * self.phase_beta)

    @cached_property
    def constant_g(self) -> Optional[float]:
        """The common coupling if every ``g_j`` is equal, else None."""
        if self.n and np.all(self.g == self.g[0]):
            return float(self.g[0])
        return None

    def __getitem__(self, idx) -> "EnvironmentEnsemble":
        return EnvironmentEnsemble(self.p[idx], self.phase_alpha[idx], self.phase_beta[idx], self.g[idx])

    def __len__(self):
        return self.n


def concatenate(*ensembles: EnvironmentEnsemble) -> EnvironmentEnsemble:
    return EnvironmentEnsemble(
        np.concatenate([e.p for e in ensembles]),
        np.concatenate([e.phase_alpha for e in ensembles]),
        np.concatenate([e.phase_beta for e in ensembles]),
        np.concatenate([e.g for e in ensembles]),
    )


def _check_ensemble_args(n, seed, g_mode):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"environment size must be a positive integer, got {n!r}")
    if not isinstance(seed, (int, np.integer)) or not 0 <= seed < MAX_SEED:
        raise InvalidArgument("seed must be an integer in [0, 2^64)")
    if isinstance(g_mode, ConstantCoupling):
        if not g_mode.g > 0:
            raise InvalidArgument("coupling g must be positive")
    elif isinstance(g_mode, UniformCoupling):
        if not g_mode.g_max > 0:
            raise InvalidArgument("g_max must be positive")
    else:
        raise InvalidArgument(f"unknown coupling mode {g_mode!r}")


def _draw_chunk(seed, chunk, size, g_mode):
    # Stream order within a chunk: |alpha|^2, arg(alpha), arg(beta), then g.
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chunk),))
    rng = np.random.Generator(np.random.PCG64(ss))
    p = rng.random(size)
    phase_a = rng.uniform(0.0, 2 * np.pi, size)
    phase_b = rng.uniform(0.0, 2 * np.pi, size)
    if isinstance(g_mode, ConstantCoupling):
        g = np.full(size, float(g_mode.g))
    else:
        g = rng.uniform(0.0, float(g_mode.g_max), size)
    return p, phase_a, phase_b, g


def iter_ensemble_chunks(n: int, seed: int, g_mode: GMode) -> Iterator[EnvironmentEnsemble]:
    """Yield the ensemble of :func:`make_random_ensemble` in fixed-size pieces.

    Concatenating the pieces reproduces ``make_random_ensemble(n, seed, g_mode)``
    exactly, which lets environments far larger than memory be streamed.
    """
    _check_ensemble_args(n, seed, g_mode)
    for chunk, start in enumerate(range(0, n, ENSEMBLE_CHUNK)):
        size = min(ENSEMBLE_CHUNK, n - start)
        yield EnvironmentEnsemble(*_draw_chunk(seed, chunk, size, g_mode), seed=seed)


def make_random_ensemble(n: int, seed: int, g_mode: GMode) -> EnvironmentEnsemble:
    """Random environment with ``|α_j|²`` uniform on [0, 1] and uniform phases.

    Each block of ``ENSEMBLE_CHUNK`` particles has its own PCG64 stream keyed
    by ``(seed, block index)``, so results do not depend on how the caller
    later splits the work.
    """
    parts = list(iter_ensemble_chunks(n, seed, g_mode))
    if len(parts) == 1:
        return parts[0]
    out = concatenate(*parts)
    object.__setattr__(out, "seed", seed)
    return out


# --------------------------------------------------------------------------
# System block bookkeeping


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


def down_counts(m: int) -> np.ndarray:
    """Number of down spins ``l`` for every system state in binary order."""
    return popcount(np.arange(2**m))


def degeneracy_order(m: int) -> np.ndarray:
    """Binary index of each system state listed in degeneracy order."""
    return np.argsort(down_counts(m), kind="stable")


def log_binom(n, k):
    """``ln C(n, k)`` via log-gamma; ``-inf`` outside ``0 <= k <= n``."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    inside = (k >= 0) & (k <= n)
    kk = np.where(inside, k, 0.0)
    out = gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1)
    return np.where(inside, out, -np.inf)


@dataclass(frozen=True)
class BlockIndex:
    """Degenerate eigen-blocks of ``H_A`` for ``M`` system spins.

    Block ``l`` holds the ``C(M, l)`` states with ``l`` down spins, all with
    ``H_A`` eigenvalue ``(M - 2l)/2``.
    """

    m: int
    log_multiplicity: np.ndarray = field(repr=False)
    eigenvalue: np.ndarray = field(repr=False)

    @property
    def m_tilde(self) -> int:
        return (self.m - 2) // 2 if self.m % 2 == 0 else (self.m - 1) // 2

    def multiplicity(self, l: int) -> int:
        return math.comb(self.m, l) if 0 <= l <= self.m else 0

    def f(self, l: int) -> int:
        """Number of system states with at most ``l`` down spins."""
        if l < 0:
            return 0
        if l >= self.m:
            return 2**self.m
        return sum(math.comb(self.m, p) for p in range(l + 1))

    @cached_property
    def f_table(self) -> tuple:
        """``(f(-1), f(0), ..., f(M))`` as exact integers."""
        if self.m > 10_000:
            raise UnsupportedSize("exact f-table is limited to M <= 10000; use log_multiplicity")
        out = [0]
        c = 1
        for l in range(self.m + 1):
            out.append(out[-1] + c)
            c = c * (self.m - l) // (l + 1)
        return tuple(out)

    def block_of(self, l: int) -> range:
        """Zero-based degeneracy-order positions belonging to block ``l``."""
        return range(self.f(l - 1), self.f(l))


def block_index(m: int) -> BlockIndex:
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_BLOCK_M:
        raise InvalidArgument(f"system size must be in [1, {MAX_BLOCK_M}], got {m!r}")
    m = int(m)
    ls = np.arange(m + 1)
    return BlockIndex(m, _frozen(log_binom(m, ls), float), _frozen((m - 2 * ls) / 2.0, float))


def _check_block(idx: BlockIndex, l):
    if not isinstance(l, (int, np.integer)) or not 0 <= l <= idx.m:
        raise InvalidArgument(f"block {l!r} outside 0..{idx.m}")


def uniform_block_pair_weight(idx: BlockIndex, l: int, l2: int) -> float:
    """``ln W(l, l')`` for uniform amplitudes and an all-ones observable.

    ``W(l, l') = C(M, l) C(M, l') 2^-M`` is the summed weight of every
    ``(λ, λ')`` pair with ``λ`` in block ``l`` and ``λ'`` in block ``l'``.
    """
    _check_block(idx, l)
    _check_block(idx, l2)
    return float(idx.log_multiplicity[l] + idx.log_multiplicity[l2] - idx.m * math.log(2.0))


# --------------------------------------------------------------------------
# System state


ARRANGEMENTS = ("degeneracy", "binary")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """The M-spin open system A and its initial amplitudes ``C_λ``.

    ``amplitudes`` is None for the uniform state ``C_λ = 2^{-M/2}``; otherwise
    it lists ``2^M`` complex numbers indexed in ``arrangement`` order.
    """

    m: int
    amplitudes: Optional[np.ndarray] = field(default=None, repr=False)
    arrangement: str = "degeneracy"

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise InvalidArgument("system size must be a positive integer")
        if self.arrangement not in ARRANGEMENTS:
            raise InvalidArgument(f"arrangement must be one of {ARRANGEMENTS}")
        if self.amplitudes is not None:
            if self.m > MAX_EXPLICIT_M:
                raise UnsupportedSize(f"explicit amplitudes are limited to M <= {MAX_EXPLICIT_M}")
            c = _frozen(self.amplitudes, complex)
            if c.shape != (2**self.m,):
                raise InvalidArgument(f"expected {2**self.m} amplitudes, got shape {c.shape}")
            if abs(np.vdot(c, c).real - 1.0) > NORM_TOL:
                raise InvalidArgument("amplitudes must satisfy sum |C|^2 = 1")
            object.__setattr__(self, "amplitudes", c)

    @classmethod
    def uniform(cls, m: int, arrangement: str = "degeneracy") -> "SystemSpec":
        return cls(m, None, arrangement)

    @classmethod
    def explicit(cls, amplitudes, arrangement: str = "degeneracy") -> "SystemSpec":
        c = np.asarray(amplitudes, dtype=complex)
        m = int(round(math.log2(c.size))) if c.size else 0
        return cls(m, c, arrangement)

    @classmethod
    def product(cls, pairs) -> "SystemSpec":
        """Product state ``⊗ (a_i|⇑⟩ + b_i|⇓⟩)``, stored in binary order."""
        c = np.ones(1, dtype=complex)
        for a, b in pairs:
            c = np.kron(c, np.array([a, b], dtype=complex))
        return cls(len(pairs), c, "binary")

    @property
    def is_uniform(self) -> bool:
        return self.amplitudes is None

    def amplitudes_binary(self) -> np.ndarray:
        """``C`` re-indexed in binary order (materializes uniform states)."""
        if self.amplitudes is None:
            if self.m > MAX_EXPLICIT_M:
                raise UnsupportedSize(f"cannot materialize 2^{self.m} amplitudes")
            return np.full(2**self.m, 2.0 ** (-self.m / 2), dtype=complex)
        if self.arrangement == "binary":
            return self.amplitudes
        out = np.empty_like(self.amplitudes)
        out[degeneracy_order(self.m)] = self.amplitudes
        return out


def to_binary_matrix(s: np.ndarray, m: int, arrangement: str) -> np.ndarray:
    """Re-index a ``2^M x 2^M`` system matrix into binary order."""
    s = np.asarray(s, dtype=complex)
    if arrangement == "binary":
        return s
    perm = degeneracy_order(m)
    out = np.empty_like(s)
    out[np.ix_(perm, perm)] = s
    return out


def to_degeneracy_matrix(s: np.ndarray, m: int) -> np.ndarray:
    perm = degeneracy_order(m)
    return np.asarray(s)[np.ix_(perm, perm)]


# --------------------------------------------------------------------------
# Observables


def hermitian2(up_up, down_down, down_up) -> np.ndarray:
    """2x2 coefficient matrix from its diagonal and the ``|↓⟩⟨↑|`` entry."""
    return np.array([[up_up, np.conj(down_up)], [down_up, down_down]], dtype=complex)


IDENTITY2 = hermitian2(1.0, 1.0, 0.0)


def _check_hermitian(c, name):
    c = np.asarray(c, dtype=complex)
    if c.ndim < 2 or c.shape[-1] != c.shape[-2]:
        raise InvalidArgument(f"{name} must be square")
    if np.any(np.abs(c - np.conj(np.swapaxes(c, -1, -2))) > HERMITIAN_TOL):
        raise InvalidArgument(f"{name} must be Hermitian")
    return _frozen(c, complex)


@dataclass(frozen=True, eq=False)
class OriginalD1:
    """Observe the central spin P: ``O_P ⊗ I``, ``s`` is 2x2."""

    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", _check_hermitian(self.s, "s"))


@dataclass(frozen=True, eq=False)
class OriginalD2:
    """Observe environment spin ``j`` (1-based) with 2x2 coefficients ``eps``."""

    j: int
    eps: np.ndarray

    def __post_init__(self):
        if not isinstance(self.j, (int, np.integer)) or self.j < 1:
            raise InvalidArgument("particle index j is 1-based and must be >= 1")
        object.__setattr__(self, "eps", _check_hermitian(self.eps, "eps"))


@dataclass(frozen=True, eq=False)
class GeneralD1:
    """Observe block A: ``O_A ⊗ I``; ``s=None`` means every ``s_{λλ'} = 1``."""

    s: Optional[np.ndarray] = None
    arrangement: str = "degeneracy"

    def __post_init__(self):
        if self.s is not None:
            object.__setattr__(self, "s", _check_hermitian(self.s, "s"))


@dataclass(frozen=True, eq=False)
class GeneralD2:
    """Observe the last system spin ``A_M`` with 2x2 coefficients ``s_tilde``."""

    s_tilde: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s_tilde", _check_hermitian(self.s_tilde, "s_tilde"))


@dataclass(frozen=True, eq=False)
class FullProduct:
    """``O_A ⊗ (⊗_i O_i)`` with per-environment-spin 2x2 coefficients ``eps``."""

    eps: np.ndarray
    s: Optional[np.ndarray] = None
    arrangement: str = "degeneracy"

    def __post_init__(self):
        eps = _check_hermitian(self.eps, "eps")
        if eps.ndim != 3 or eps.shape[1:] != (2, 2):
            raise InvalidArgument("eps must have shape (n, 2, 2)")
        object.__setattr__(self, "eps", eps)
        if self.s is not None:
            object.__setattr__(self, "s", _check_hermitian(self.s, "s"))


ObservableSpec = Union[OriginalD1, OriginalD2, GeneralD1, GeneralD2, FullProduct]


# --------------------------------------------------------------------------
# Time grid and density matrices


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k t0 / n_points`` for ``k = 0..n_points``.

    ``n_points`` counts intervals, so there are ``n_points + 1`` samples.
    """

    t0: float
    n_points: int = 200

    def __post_init__(self):
        if not self.t0 > 0:
            raise InvalidArgument("t0 must be positive")
        if not isinstance(self.n_points, (int, np.integer)) or self.n_points < 2:
            raise InvalidArgument("n_points must be an integer >= 2")

    @property
    def dt(self) -> float:
        return self.t0 / self.n_points

    @property
    def samples(self) -> np.ndarray:
        return np.arange(self.n_points + 1) * self.t0 / self.n_points


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.entries, complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidArgument("density matrix must be square")
        if abs(np.trace(rho) - 1.0) > 1e-10:
            raise InvalidArgument("density matrix must have unit trace")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise InvalidArgument("density matrix must be Hermitian")
        if rho.shape[0] <= 1024 and np.linalg.eigvalsh(rho).min() < -1e-10:
            raise InvalidArgument("density matrix must be positive semidefinite")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]
