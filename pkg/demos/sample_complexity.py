"""
How many triples are enough?
============================

Compute Lambda and sigma_m for a two-state HMM, the sample size that
buys a 50% relative-error guarantee, and the two data-only conditions that
certify it after the fact.
"""

# %%
import numpy as np

from spectral_hmm import (Hmm, build_model, checkable_conditions, diagnose, exact_moments,
                          lambda_of, sample_complexity, sigma_min)
from spectral_hmm.diagnostics import epsilon_for, eval_relative_error
from spectral_hmm.distributions import distributions_from_dense_counts
from spectral_hmm.hmm import sample_trigram_counts
from spectral_hmm.moments import moments_from_distributions

hmm = Hmm(T=[[0.95, 0.04], [0.05, 0.96]], O=[[0.99, 0.01], [0.01, 0.99]], pi=[0.4, 0.6])
theta = 1.2
U = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])

exact = exact_moments(hmm, U)
lam, sig = lambda_of(exact), sigma_min(exact.sigma)
print(f"Lambda = {lam:.4f}, sigma_m = {sig:.4f}")

# %%
# The bound is steep in Lambda and sigma_m; the constants are large too.
N = sample_complexity(m=2, epsilon=0.5, delta=0.1, t=2, Lambda=lam, sigma_m=sig)
print(f"required N = {N:.3e}")
for n in (1e6, 1e8, N):
    print(f"N={n:.1e}: guaranteed epsilon {epsilon_for(n, 2, 0.1, 2, lam, sig):.3g}")

# %%
# Drawing billions of triples is cheap through their multinomial counts.
counts = sample_trigram_counts(hmm, N, seed=0)
emp = moments_from_distributions(distributions_from_dense_counts(counts), U, "empirical", N)
model = build_model(emp, U)
print("observed max relative error:", eval_relative_error(hmm, model, 2))

# %%
report = diagnose(emp, N, epsilon=0.5, delta=0.1, t=2)
print(report.to_dict())
print(checkable_conditions(report.lambda_hat, report.sigma_m_hat, 2, 0.1, N, 0.5, 2))
