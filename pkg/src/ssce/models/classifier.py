"""CNN classifier: a small convolutional backbone plus the fixed three-layer head."""

from __future__ import annotations

import numpy as np

from ..nn import Module, spec as S
from ..nn.spec import LayerSpec, init_parameters, infer_shapes
from ..tensor import Tensor, no_grad, ops

HEAD_WIDTHS = (512, 256)
EMBED_DIM = HEAD_WIDTHS[-1]


def _block(out: int, stride: int) -> list[LayerSpec]:
    return [S.conv(out, kernel=3, stride=stride, padding=1), S.norm("batch"), S.act("relu")]


def _small_4conv() -> list[LayerSpec]:
    specs: list[LayerSpec] = []
    for ch in (8, 16, 32, 64):
        specs += _block(ch, 2)
    return specs + [S.flatten()]


def _small_6conv() -> list[LayerSpec]:
    specs: list[LayerSpec] = []
    for ch, stride in ((8, 1), (16, 2), (16, 1), (32, 2), (64, 2), (64, 2)):
        specs += _block(ch, stride)
    return specs + [S.flatten()]


PRESETS = {
    "small-4conv": (_small_4conv, (16, 32, 64)),
    "small-6conv": (_small_6conv, (32, 64)),
}


def head_specs(num_classes: int) -> list[LayerSpec]:
    return [
        S.linear(HEAD_WIDTHS[0]),
        S.act("relu"),
        S.dropout(0.5),
        S.linear(HEAD_WIDTHS[1]),
        S.act("relu"),
        S.dropout(0.5),
        S.linear(num_classes),
    ]


class Classifier(Module):
    """Backbone -> linear(n, 512) -> ReLU -> dropout -> linear(512, 256) -> ReLU -> dropout -> linear(256, K).

    Inputs are images in [0, 1]; per-channel standardization is folded into
    the model (``input_mean``/``input_std`` buffers) so that any caller,
    including the FID embedder, can feed raw images.
    """

    def __init__(self, preset: str, resolution: int, num_classes: int, channels: int = 1, seed: int = 0):
        if preset not in PRESETS:
            raise ValueError(f"unknown backbone preset '{preset}'; known: {sorted(PRESETS)}")
        make, resolutions = PRESETS[preset]
        if resolution not in resolutions:
            raise ValueError(f"preset '{preset}' supports resolutions {resolutions}, got {resolution}")
        if num_classes < 2:
            raise ValueError(f"a classifier needs at least 2 classes, got {num_classes}")
        self.preset, self.resolution = preset, resolution
        self.num_classes, self.channels = num_classes, channels
        in_shape = (channels, resolution, resolution)
        backbone = make()
        feat = infer_shapes(backbone, in_shape)[-1]
        self.feature_dim = feat[0]
        ss = np.random.SeedSequence(seed)
        s_backbone, s_head = (int(c.generate_state(1)[0]) for c in ss.spawn(2))
        self.backbone = init_parameters(backbone, in_shape, s_backbone)
        self.head = init_parameters(head_specs(num_classes), feat, s_head)
        self._buffers = {"input_mean": np.zeros(channels), "input_std": np.ones(channels)}

    @property
    def arch_id(self) -> str:
        return f"classifier/{self.preset}/r{self.resolution}/c{self.channels}/k{self.num_classes}"

    def set_normalization(self, mean, std) -> None:
        self._buffers["input_mean"][...] = mean
        self._buffers["input_std"][...] = np.maximum(np.asarray(std, dtype=np.float64), 1e-6)

    def _standardize(self, x: Tensor) -> Tensor:
        shape = (1, self.channels, 1, 1)
        m = Tensor(self._buffers["input_mean"].reshape(shape))
        s = Tensor(self._buffers["input_std"].reshape(shape))
        return ops.div(ops.sub(x, m), s)

    def forward(self, x):
        return self.head(self.backbone(self._standardize(x)))

    def embed_tensor(self, x) -> Tensor:
        h = self.backbone(self._standardize(x))
        # stop after the second ReLU of the head: the 256-wide penultimate activation
        for layer in self.head.layers[:5]:
            h = layer(h)
        return h

    def _batched(self, images: np.ndarray, fn, batch: int) -> np.ndarray:
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                parts = [fn(Tensor(images[i : i + batch])).data for i in range(0, len(images), batch)]
        finally:
            self.train(was_training)
        return np.concatenate(parts, axis=0)

    def embed(self, images: np.ndarray, batch: int = 64) -> np.ndarray:
        """256-wide penultimate features in evaluation mode."""
        return self._batched(images, self.embed_tensor, batch)

    def predict_proba(self, images: np.ndarray, batch: int = 64) -> np.ndarray:
        return self._batched(images, lambda t: ops.softmax(self.forward(t), axis=1), batch)

    def predict(self, images: np.ndarray, batch: int = 64) -> np.ndarray:
        return self._batched(images, self.forward, batch).argmax(axis=1)


def build_classifier(
    backbone_preset: str, input_resolution: int, num_classes: int, channels: int = 1, seed: int = 0
) -> Classifier:
    return Classifier(backbone_preset, input_resolution, num_classes, channels, seed)
