"""
Checkpoints and partial transfer
================================

Save a 5-class classifier and reuse its weights in a 3-class one.
"""

# %%
import tempfile
from pathlib import Path

from ssce.models import build_classifier, load_checkpoint, save_checkpoint, transfer_init

source = build_classifier("small-4conv", 32, num_classes=5, seed=0)
path = Path(tempfile.mkdtemp()) / "source.ckpt"
save_checkpoint(source, path)

# %%
# Entries matching by name and shape are copied; the final head layer is not.
target = build_classifier("small-4conv", 32, num_classes=3, seed=1)
report = transfer_init(target, load_checkpoint(path))
print(len(report.copied), "tensors copied")
print("skipped:", report.skipped)
