"""Dataset ingestion, splitting, augmentation and pseudo-labeled extension."""

from .augment import AugmentConfig, augment, hflip, rotate
from .dataset import (
    DatasetError,
    ExtensionPlan,
    LabeledDataset,
    SplitPair,
    largest_remainder,
    merge,
    stratified_split,
    synthesize_pseudo_labeled,
)
from .io import ingest_directory, save_grid, write_dataset
from .toy import make_bright_dark, make_shapes, make_two_tone, make_two_tone_classes
