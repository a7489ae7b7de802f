# How the decay of |r(t)|^2 depends on environment size and coupling.

from spinbath import experiments as ex
from spinbath.model import ConstantCoupling, TimeGrid, UniformCoupling, make_random_ensemble

grid = TimeGrid(2e-5, 200)

print("half-decay time against N (g = 400)")
for n in (10**5, 10**6, 10**7):
    s = ex.series_r2(make_random_ensemble(n, 0, ConstantCoupling(400.0)), grid)
    print(f"  N={n:>9d}  t_half={ex.half_decay_time(s):.3e} s")

print("half-decay time against g (N = 10^6)")
for g in (200.0, 400.0, 800.0):
    s = ex.series_r2(make_random_ensemble(10**6, 0, ConstantCoupling(g)), grid)
    print(f"  g={g:>5.0f}  t_half={ex.half_decay_time(s):.3e} s")

s = ex.series_r2(make_random_ensemble(10**6, 0, UniformCoupling(800.0)), grid)
print(f"random g in [0, 800]: t_half={ex.half_decay_time(s):.3e} s")

# Multi-spin system: who decoheres depends on which side is larger.
# M = N = 1000 sits close to the 0.1 threshold, so the grid end matters.
print("verdicts for the M-spin block")
for m, n, verdict, tail in ex.sweep([10, 1000], [10, 1000], t0=1.2e-3):
    print(f"  M={m:<5d} N={n:<5d} {verdict.value:<10s} final-quarter max {tail:.3f}")
