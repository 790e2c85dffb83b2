"""
A DCGAN on two-tone images
==========================

Train a small DCGAN for a few hundred iterations and watch FID fall.
This takes about a minute on one CPU core.
"""

# %%
from ssce.data import make_two_tone, make_two_tone_classes, stratified_split
from ssce.models import build_classifier
from ssce.pipeline import GanConfig, train_classifier, train_gan

# %%
# An embedder for FID: a small classifier that tells stripe orientations apart.
split = stratified_split(make_two_tone_classes(100, 16, seed=11), 0.8, seed=0)
embedder = build_classifier("small-4conv", 16, num_classes=2, seed=0)
train_classifier(split, embedder, epochs=5, seed=0)

# %%
real = make_two_tone(200, 16, seed=0)
cfg = GanConfig(variant="dcgan", iterations=400, eval_every=100, snapshot_iters=())
result = train_gan(real, cfg, seed=0, embedder=embedder)
for row in result.trace:
    print(f"iteration {row['iteration']:4d}  FID {row['fid']:8.3f}  IS {row['is']:.3f}")
