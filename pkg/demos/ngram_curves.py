"""
Lambda and sigma_m versus m on an n-gram corpus
===============================================

Write a synthetic corpus of count files, load it back with a fixed
vocabulary size, and tabulate Lambda-hat and sigma_m-hat for growing m.
"""

# %%
import tempfile
from pathlib import Path

from spectral_hmm import lambda_curve, load_counts, random_hmm, sample_triples
from spectral_hmm.ngram import triples_to_counters, write_count_files

hmm = random_hmm(8, 200, seed=0)
sample = sample_triples(hmm, 10**6, seed=0)
out = Path(tempfile.mkdtemp())
paths = write_count_files(triples_to_counters(sample), out)
print([p.name for p in paths])

# %%
counts = load_counts(paths, v=201)
print("vocabulary:", counts.v, "totals per order:", counts.totals)

# %%
curve = lambda_curve(counts, range(2, 9))
print(curve.to_csv())

# %%
# Rescaled rows, and the likelihood-ratio weighting, change Lambda-hat.
for rescale, q_mode in ((True, "none"), (False, "inverse-sqrt-P1")):
    c = lambda_curve(counts, range(2, 9), rescale=rescale, q_mode=q_mode)
    print(f"rescale={rescale} q_mode={q_mode}: slopes {c.lambda_slope:.2f}, {c.sigma_slope:.2f}")
