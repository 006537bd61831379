"""
Fractional integration and memory estimation
============================================

Type-II fractional differencing, its inverse, and the exact local Whittle
estimator of the memory parameter on simulated series.
"""

import numpy as np

from fraccomp.fracdiff import frac_diff, frac_integrate, pi_coeffs, simulate_fi
from fraccomp.semiparam import elw_estimate

# the weights of (1 - L)^d decay hyperbolically rather than geometrically
for d in (0.3, 0.7, 1.0):
    print(f"d = {d}: first weights", np.round(pi_coeffs(d, 6), 4))

# differencing undoes integration exactly under zero pre-sample values
rng = np.random.default_rng(0)
x = rng.standard_normal(1000)
print("round trip error:", np.abs(frac_diff(frac_integrate(x, 0.7), 0.7) - x).max())

# ELW with bandwidth floor(n ** 0.5) works for stationary and nonstationary d
for d in (0.0, 0.4, 0.8, 1.1):
    y = simulate_fi(d, 2000, rng)
    est = elw_estimate(y)
    print(f"true d = {d:.1f}  estimate = {est.d_hat:.3f}  (se {est.se:.3f}, m = {est.m})")
