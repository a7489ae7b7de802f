"""Cross-check closed-form kernels against the dense simulator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Union

import numpy as np

from . import kernels, oracle
from .errors import InvalidArgument
from .model import (
    FullProduct,
    GeneralD1,
    GeneralD2,
    OriginalD1,
    OriginalD2,
    SystemSpec,
    UniformCoupling,
    block_index,
    make_random_ensemble,
)

TOLERANCE = 1e-10
G_MAX = 800.0
T_MAX = 10.0 / 400.0
VARIANTS = ("original-d1", "original-d2", "general-d1", "general-d2", "full-product")


@dataclass(frozen=True)
class AgreementCase:
    variant: str
    m: int
    n: int
    seed: int
    max_deviation: float

    @property
    def ok(self) -> bool:
        return self.max_deviation <= TOLERANCE


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_state(rng, dim):
    c = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return c / np.linalg.norm(c)


def _oracle_series(state, ens, obs, times):
    return np.array([oracle.expectation(oracle.evolve(state, ens.g, t), obs) for t in times])


def _cases_for(m, n, seed, n_times):
    ens = make_random_ensemble(n, seed, UniformCoupling(G_MAX))
    rng = np.random.default_rng(np.random.SeedSequence([seed, m, n]))
    times = rng.uniform(0.0, T_MAX, n_times)
    arrangement = ("degeneracy", "binary")[int(rng.integers(2))]
    sys = SystemSpec.explicit(random_state(rng, 2**m), arrangement)
    uni = SystemSpec.uniform(m, arrangement)
    idx = block_index(m)
    out = []

    def record(variant, kernel_vals, state, obs):
        dev = np.max(np.abs(np.asarray(kernel_vals) - _oracle_series(state, ens, obs, times)))
        out.append(AgreementCase(variant, m, n, seed, float(dev)))

    state = oracle.build_initial(sys, ens)
    if m == 1:
        a, b = sys.amplitudes_binary()
        s = random_hermitian(rng, 2)
        record("original-d1", kernels.expectation_original_d1(a, b, s, ens, times), state, OriginalD1(s))
        j = int(rng.integers(1, n + 1))
        eps = random_hermitian(rng, 2)
        record("original-d2", kernels.expectation_original_d2(j, ens, eps, times, a, b), state, OriginalD2(j, eps))

    obs = GeneralD1(random_hermitian(rng, 2**m), arrangement)
    split = kernels.sigma_split_general_d1(sys, idx, ens, times, obs)
    record("general-d1", split.expectation, state, obs)
    split = kernels.sigma_split_general_d1(uni, idx, ens, times)
    record("general-d1", split.expectation, oracle.build_initial(uni, ens), GeneralD1())

    st = random_hermitian(rng, 2)
    split = kernels.sigma_split_general_d2(sys, idx, ens, st, times)
    record("general-d2", split.expectation, state, GeneralD2(st))
    split = kernels.sigma_split_general_d2(uni, idx, ens, st, times)
    record("general-d2", split.expectation, oracle.build_initial(uni, ens), GeneralD2(st))

    obs = FullProduct(np.stack([random_hermitian(rng, 2) for _ in range(n)]), random_hermitian(rng, 2**m), arrangement)
    record("full-product", kernels.expectation_full_product(sys, ens, obs, times), state, obs)
    return out


def run_agreement(max_m: int, max_n: int, seeds: Union[int, Iterable[int]] = 20,
                  n_times: int = 20) -> List[AgreementCase]:
    """Every variant for every ``1 <= m <= max_m``, ``1 <= n <= max_n`` and seed."""
    if max_m < 1 or max_n < 1:
        raise InvalidArgument("max_m and max_n must be at least 1")
    if max_m + max_n > oracle.MAX_SPINS:
        raise InvalidArgument(f"max_m + max_n must not exceed {oracle.MAX_SPINS}")
    seeds = range(seeds) if isinstance(seeds, int) else list(seeds)
    out = []
    for m in range(1, max_m + 1):
        for n in range(1, max_n + 1):
            for seed in seeds:
                out.extend(_cases_for(m, n, seed, n_times))
    return out


def summarize(cases: List[AgreementCase]) -> List[str]:
    worst = {}
    for c in cases:
        key = (c.variant, c.m, c.n)
        worst[key] = max(worst.get(key, 0.0), c.max_deviation)
    return [f"{v:<13} m={m} n={n} max_dev={d:.3e} {'ok' if d <= TOLERANCE else 'FAIL'}"
            for (v, m, n), d in sorted(worst.items())]
