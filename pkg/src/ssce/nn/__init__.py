"""Layers, initialization, losses and optimizers."""

from .layers import (
    BatchNorm,
    Conv2d,
    ConvTranspose2d,
    Dropout,
    Flatten,
    LayerNorm,
    LeakyReLU,
    Linear,
    MaxPool2d,
    Module,
    Parameter,
    ReLU,
    Reshape,
    Sequential,
    Sigmoid,
    Tanh,
)
from .losses import binary_cross_entropy, cross_entropy
from .optim import Adam, NonFiniteGradientError, Optimizer, RMSprop, clip_weights, make_optimizer
from .spec import LayerSpec, SpecError, infer_shapes, init_parameters
