"""
Exact observable representation
===============================

Build the reduced model from population moments and check that it
reproduces the HMM's sequence probabilities, then watch the estimate
improve as the number of sampled triples grows.
"""

# %%
import numpy as np

from spectral_hmm import (build_hsu_model, build_model, compute_projection, empirical_moments,
                          exact_joint_distributions, exact_moments, hmm_a, joint_prob,
                          sample_triples, sequence_prob)
from spectral_hmm.diagnostics import eval_relative_error

hmm = hmm_a()
dists = exact_joint_distributions(hmm)
U = compute_projection(dists.P21, m=2)
print("U =\n", U.U)

# %%
# Population moments give an exact model.
model = build_model(exact_moments(hmm, U), U)
hsu = build_hsu_model(dists, U)
for seq in ([0], [0, 0], [1, 0, 1, 1]):
    print(seq, joint_prob(hmm, seq), sequence_prob(model, seq).value)
print("c_inf . c1 =", model.c_inf @ model.c1)

# %%
# The operators are similar to the HMM's own: C(U^T delta_x) = (U^T O) A_x (U^T O)^{-1}.
UO = U.U.T @ hmm.O
A0 = hmm.T * hmm.O[0]
print(np.allclose(model.operator(U.U[0]), UO @ A0 @ np.linalg.inv(UO)))

# %%
# With sampled triples the error shrinks roughly like 1/sqrt(N).
for N in (10**3, 10**4, 10**5, 10**6):
    est = build_model(empirical_moments(sample_triples(hmm, N, seed=0), U), U)
    print(f"N={N:>8d}  max relative error at t=2: {eval_relative_error(hmm, est, 2):.2e}")
