"""
Frechet distance, inception score and TEI
=========================================

The metric helpers on synthetic feature sets.
"""

# %%
import numpy as np

from ssce.metrics import TEIInputs, feature_stats, frechet_distance, inception_score, tei

rng = np.random.default_rng(0)
a = rng.normal(size=(500, 8))
b = rng.normal(loc=0.5, size=(500, 8))

# %%
# Shifting every coordinate by 0.5 adds about 8 * 0.25 = 2 to the distance.
print("FID(a, a) =", frechet_distance(feature_stats(a), feature_stats(a)))
print("FID(a, b) =", frechet_distance(feature_stats(a), feature_stats(b)))

# %%
# The inception score runs from 1 (uniform predictions) to k (confident and balanced).
print("IS uniform =", inception_score(np.full((10, 4), 0.25)))
print("IS one-hot =", inception_score(np.eye(4)))

# %%
# TEI takes accuracies in percent and times in seconds.
print("TEI =", tei(TEIInputs(acc=85.0, acc_b=80.0, t=600.0, t_b=100.0)))
