"""DCGAN-style generator and the three discriminator/critic variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Module, Sequential, spec as S
from ..nn.spec import LayerSpec, init_parameters
from ..tensor import Tensor, no_grad

VARIANTS = ("dcgan", "wgan", "wgan-gp")


def generator_specs(latent_len: int, resolution: int, channels: int, width: int) -> list[LayerSpec]:
    ups = int(np.log2(resolution)) - 2  # number of 2x upsamplings from 4x4
    top = width * 2 ** (ups - 1)
    specs = [S.linear(top * 16), S.reshape(top, 4, 4), S.norm("batch"), S.act("relu")]
    ch = top
    for _ in range(ups - 1):
        ch //= 2
        specs += [S.tconv(ch), S.norm("batch"), S.act("relu")]
    return specs + [S.tconv(channels), S.act("tanh")]


def critic_specs(variant: str, resolution: int, width: int) -> list[LayerSpec]:
    downs = int(np.log2(resolution)) - 2
    norm = "layer" if variant == "wgan-gp" else "batch"
    specs = [S.conv(width, kernel=4, stride=2, padding=1), S.act("leaky_relu", 0.2)]
    ch = width
    for _ in range(downs - 1):
        ch *= 2
        specs += [S.conv(ch, kernel=4, stride=2, padding=1), S.norm(norm), S.act("leaky_relu", 0.2)]
    specs += [S.flatten(), S.linear(1)]
    if variant == "dcgan":
        specs.append(S.act("sigmoid"))
    return specs


class _Net(Module):
    def __init__(self, net: Sequential, arch_id: str):
        self.net = net
        self._arch_id = arch_id

    @property
    def arch_id(self) -> str:
        return self._arch_id

    def forward(self, x):
        return self.net(x)


class Generator(_Net):
    def __init__(self, net, arch_id, latent_len: int, image_shape: tuple[int, int, int]):
        super().__init__(net, arch_id)
        self.latent_len = latent_len
        self.image_shape = image_shape

    def sample(self, n: int, rng: np.random.Generator, batch: int = 64) -> np.ndarray:
        """Draw ``n`` images in [-1, 1] using evaluation-mode normalization."""
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                z = rng.standard_normal((n, self.latent_len))
                parts = [self(Tensor(z[i : i + batch])).data for i in range(0, n, batch)]
        finally:
            self.train(was_training)
        return np.concatenate(parts, axis=0) if parts else np.zeros((0,) + self.image_shape)


@dataclass
class GanPair:
    generator: Generator
    critic: _Net
    variant: str
    latent_len: int
    resolution: int
    channels: int


def build_gan(
    variant: str,
    latent_len: int = 100,
    resolution: int = 32,
    channels: int = 1,
    seed: int = 0,
    g_width: int = 16,
    d_width: int = 16,
) -> GanPair:
    if variant not in VARIANTS:
        raise ValueError(f"unknown GAN variant '{variant}'; expected one of {VARIANTS}")
    if resolution < 16 or resolution & (resolution - 1):
        raise ValueError(f"GAN resolution must be a power of two >= 16, got {resolution}")
    ss = np.random.SeedSequence(seed)
    sg, sd = (int(c.generate_state(1)[0]) for c in ss.spawn(2))
    image_shape = (channels, resolution, resolution)
    g_net = init_parameters(generator_specs(latent_len, resolution, channels, g_width), (latent_len,), sg)
    d_net = init_parameters(critic_specs(variant, resolution, d_width), image_shape, sd)
    tag = f"r{resolution}/c{channels}/l{latent_len}/g{g_width}/d{d_width}"
    gen = Generator(g_net, f"generator/{tag}", latent_len, image_shape)
    critic = _Net(d_net, f"critic/{variant}/{tag}")
    return GanPair(gen, critic, variant, latent_len, resolution, channels)
