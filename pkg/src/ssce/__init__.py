"""Semi-supervised classification enhancement with GAN-synthesized data."""

__version__ = "0.1.0"
