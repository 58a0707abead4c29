"""
Estimating a likelihood ratio
=============================

Reweight each symbol by q = 1/sqrt(P1) and estimate
lambda(x) = Pr(x) Q(x)^2 instead of Pr(x).  Dividing by Q^2 recovers the
probabilities.
"""

# %%
import itertools
import warnings

import numpy as np

from spectral_hmm import (BoundWarning, build_weighted_model, compute_weighted_projection,
                          exact_joint_distributions, inverse_sqrt_weights, joint_prob,
                          likelihood_ratio, random_hmm)

hmm = random_hmm(3, 6, seed=2)
dists = exact_joint_distributions(hmm)
q = inverse_sqrt_weights(dists.P1)
print("q =", np.round(q, 3))

# %%
# The projection must make diag(q) U orthonormal over range(diag(q) O).
U = compute_weighted_projection(dists.P21, 3, q)
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", BoundWarning)
    model = build_weighted_model(hmm, U, q)
for w in caught:
    print("warning:", w.message)

# %%
for seq in itertools.islice(itertools.product(range(6), repeat=2), 5):
    lr = likelihood_ratio(model, seq)
    print(seq, f"lambda={lr.ratio:.5f}", f"Pr={joint_prob(hmm, seq):.6f}",
          f"recovered={lr.prob:.6f}")
