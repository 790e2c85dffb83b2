"""Model builders and checkpoint handling."""

from .checkpoint import (
    Checkpoint,
    CheckpointError,
    CheckpointVersionError,
    ChecksumMismatchError,
    CorruptRecordError,
    TransferError,
    TransferReport,
    apply_checkpoint,
    load_checkpoint,
    save_checkpoint,
    transfer_init,
)
from .classifier import EMBED_DIM, PRESETS, Classifier, build_classifier
from .gan import VARIANTS, GanPair, Generator, build_gan
