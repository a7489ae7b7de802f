# Decoherence time of a single spin coupled to a very large environment.
#
# A base ensemble of 10^7 environment spins is evaluated directly, then the
# log of |r(t)|^2 is multiplied by 10^13 to stand in for 10^20 spins.

from spinbath import experiments as ex

fit, series = ex.decoherence_time(seed=42, g=400.0, n_base=10**7, n_target=1e20)

print(f"fitted tau: {fit.tau:.3e} s")
print(f"fit used samples {fit.window[0]}..{fit.window[1]} ({fit.n_samples} points)")
print(f"rms residual in log space: {fit.residual:.2e}")

# For comparison, the recurrence period of identical couplings.
print(f"Poincare time pi/g: {ex.poincare_time(400.0):.3e} s")
