# Compare the closed-form expectation values with a brute-force state vector.

import numpy as np

from spinbath import kernels, oracle
from spinbath.agreement import run_agreement, summarize
from spinbath.model import GeneralD1, SystemSpec, UniformCoupling, make_random_ensemble

ens = make_random_ensemble(4, 1, UniformCoupling(800.0))
sys = SystemSpec.uniform(2)
t = np.linspace(0.0, 0.02, 5)

closed = kernels.sigma_split_general_d1(sys, None, ens, t).expectation
state = oracle.build_initial(sys, ens)
dense = [oracle.expectation(oracle.evolve(state, ens.g, x), GeneralD1()) for x in t]
for x, a, b in zip(t, closed, dense):
    print(f"t={x:.3f}  closed={a: .12f}  dense={b: .12f}")

# The full agreement sweep used by the test suite, on a smaller grid.
for line in summarize(run_agreement(2, 2, seeds=3)):
    print(line)
