"""
Fractional components: specification, estimation, cointegration
================================================================

Simulate a six-variable panel driven by two groups of fractional
components and one short-memory component, recover the structure with the
semiparametric tools, estimate the model by maximum likelihood, and read
off the cointegration representations.
"""

import numpy as np

from fraccomp.model import DofcParams, DofcSpec, coint_subspaces, simulate_dofc, triangular_form
from fraccomp.semiparam import initial_params, specify
from fraccomp.statespace import FitOptions, build_system, fit_ml, kalman_filter, residual_diagnostics

spec = DofcSpec(p=6, group_sizes=(1, 2), s0=1, ar_order=1)
rng = np.random.default_rng(3)
lam = rng.normal(size=(6, 3))
lam[0, 2] = 0.0  # lower-triangular loadings within the second group
truth = DofcParams(d=[0.65, 0.35], lam=lam, gamma=np.tril(rng.normal(size=(6, 1))), phi=[[0.5]],
                   h=np.full(6, 0.5), c=np.zeros(6))
y = simulate_dofc(spec, truth, 2000, rng=7)

# dimension test, orthogonal components, memory estimates and grouping
report = specify(y)
print("white-noise combinations:", report.n_whitenoise)
print("component memory estimates:", np.round(np.sort(report.d_hats)[::-1], 3))
print("selected specification:", report.spec)

# maximum likelihood; starting values for the true size come from the same
# pipeline (dimension reduction, orthogonal rotation, ELW)
start = report.start if report.spec == spec else initial_params(y, spec)
fit = fit_ml(spec, y, start, FitOptions(em_max_iter=25))
print("estimated d:", np.round(fit.params.d, 3), " loglik:", round(fit.loglik, 2), " BIC:", round(fit.bic, 4))

# standardized residuals should look like white noise
out = kalman_filter(build_system(spec, fit.params, len(y)), y)
print(residual_diagnostics(out).round(3))

# cointegration: combinations annihilating the most persistent group
s1 = coint_subspaces(fit.params.lam, spec.group_sizes)[0]
print("dim of the first cointegration space:", s1.shape[1])
tri = triangular_form(fit.params.lam, spec.group_sizes, d=fit.params.d)
print("triangular system block orders:", np.round(tri.orders, 3))
