"""Training loops for the classifier and the three GAN variants."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.augment import AugmentConfig, augment
from ..data.dataset import SplitPair
from ..data.io import save_grid
from ..metrics.quality import to_unit_range
from ..metrics.scores import feature_stats, frechet_distance, inception_score
from ..models.checkpoint import Checkpoint, transfer_init
from ..models.gan import GanPair, build_gan
from ..nn import binary_cross_entropy, clip_weights, cross_entropy, make_optimizer
from ..tensor import Tensor, grad, no_grad, ops

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """A loss or gradient became non-finite; ``trace`` holds the progress up to that point."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


class Clock:
    """Measures training time either from the wall clock or by counting processed samples.

    The sample clock makes reported times (and therefore TEI) reproducible
    bit for bit across runs and machines.
    """

    def __init__(self, kind: str = "wall", seconds_per_sample: float = 1e-3):
        if kind not in ("wall", "samples"):
            raise ValueError(f"clock kind must be 'wall' or 'samples', got '{kind}'")
        self.kind = kind
        self.seconds_per_sample = seconds_per_sample
        self._samples = 0
        self._start = time.perf_counter()

    def tick(self, n: int) -> None:
        self._samples += n

    def elapsed(self) -> float:
        if self.kind == "wall":
            return time.perf_counter() - self._start
        return self._samples * self.seconds_per_sample


# -- classifier ---------------------------------------------------------------


@dataclass
class ClassifierResult:
    model: object
    accuracy: float  # fraction of the test split classified correctly
    seconds: float
    trace: list = field(default_factory=list)


def _check_finite(value: float, what: str, trace) -> None:
    if not np.isfinite(value):
        raise TrainingDivergedError(f"{what} became non-finite ({value})", trace)


def train_classifier(
    split: SplitPair,
    model,
    epochs: int,
    lr: float = 0.003,
    weight_decay: float = 0.0,
    batch_size: int = 32,
    seed: int = 0,
    augment_config: AugmentConfig | None = None,
    exempt_bias_and_norm: bool = False,
    clock: Clock | None = None,
) -> ClassifierResult:
    """Mini-batch Adam on ``split.train``; accuracy is measured on ``split.test``.

    Input standardization is estimated from the training images and folded
    into the model. The reported time covers the epoch loop, including the
    per-epoch accuracy checks recorded in ``trace``.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    train, test = split.train, split.test
    if len(train) == 0 or len(test) == 0:
        raise ValueError("train_classifier: both splits must be non-empty")
    augment_config = augment_config or AugmentConfig()
    rng = np.random.default_rng(seed)
    x_all, y_all = np.asarray(train.images), np.asarray(train.labels)
    model.set_normalization(x_all.mean(axis=(0, 2, 3)), x_all.std(axis=(0, 2, 3)))
    opt = make_optimizer("adam", model.parameters(), lr, weight_decay, exempt_bias_and_norm=exempt_bias_and_norm)
    clock = clock or Clock()
    trace = []
    model.train()
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            if len(idx) < 2 and len(order) > 1:
                continue  # a single-item batch cannot feed batch normalization
            xb = augment(x_all[idx], augment_config, rng)
            loss = cross_entropy(model(Tensor(xb)), y_all[idx])
            _check_finite(loss.item(), f"classifier loss at epoch {epoch}", trace)
            model.zero_grad()
            loss.backward()
            opt.step()
            clock.tick(len(idx))
            losses.append(loss.item())
        train_acc = float(np.mean(model.predict(x_all) == y_all))
        test_acc = float(np.mean(model.predict(test.images) == test.labels))
        trace.append({"epoch": epoch, "loss": float(np.mean(losses)), "train_acc": train_acc, "test_acc": test_acc})
        model.train()
    seconds = clock.elapsed()
    model.eval()
    acc = float(np.mean(model.predict(test.images) == test.labels))
    return ClassifierResult(model, acc, seconds, trace)


# -- GANs ---------------------------------------------------------------------


@dataclass
class GanConfig:
    variant: str = "dcgan"
    iterations: int = 4000
    batch: int = 32
    optimizer: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    n_critic: int = 5
    gp_lambda: float = 10.0
    clip: float = 0.01
    latent: int = 100
    width: int = 16
    eval_every: int = 200
    eval_samples: int = 64
    is_splits: int = 1
    snapshot_iters: tuple = (0, 8, 16, 32, 64, 128, 192)

    @property
    def critic_steps(self) -> int:
        return 1 if self.variant == "dcgan" else self.n_critic


@dataclass
class GanResult:
    pair: GanPair
    trace: list = field(default_factory=list)  # {"iteration", "fid", "is"}
    losses: list = field(default_factory=list)  # {"iteration", "d_loss", "g_loss"[, "gp"]}
    snapshots: list = field(default_factory=list)

    @property
    def final_fid(self) -> float | None:
        return self.trace[-1]["fid"] if self.trace else None


def gradient_penalty(critic, real: np.ndarray, fake: np.ndarray, rng: np.random.Generator) -> Tensor:
    """Mean of (||d critic(x_hat) / d x_hat|| - 1)^2 on random interpolates.

    The gradient is built with ``create_graph`` so the penalty itself can be
    differentiated with respect to the critic's parameters.
    """
    eps = rng.uniform(size=(len(real), 1, 1, 1))
    x_hat = Tensor(eps * real + (1.0 - eps) * fake, requires_grad=True)
    out = critic(x_hat)
    (g,) = grad(ops.sum(out), [x_hat], create_graph=True)
    norms = ops.l2_norm(ops.flatten(g), axis=1)
    return ops.mean(ops.power(ops.sub(norms, 1.0), 2.0))


def _optimizers(pair: GanPair, cfg: GanConfig):
    kw = {"betas": (cfg.beta1, cfg.beta2)} if cfg.optimizer == "adam" else {}
    g_opt = make_optimizer(cfg.optimizer, pair.generator.parameters(), cfg.lr, **kw)
    d_opt = make_optimizer(cfg.optimizer, pair.critic.parameters(), cfg.lr, **kw)
    return g_opt, d_opt


def _critic_step(pair, cfg, real, fake, rng) -> tuple[float, float | None]:
    critic = pair.critic
    if cfg.variant == "dcgan":
        loss = ops.add(binary_cross_entropy(critic(Tensor(real)), 1.0), binary_cross_entropy(critic(Tensor(fake)), 0.0))
        return loss, None
    loss = ops.sub(ops.mean(critic(Tensor(fake))), ops.mean(critic(Tensor(real))))
    if cfg.variant == "wgan-gp":
        gp = gradient_penalty(critic, real, fake, rng)
        return ops.add(loss, ops.mul(gp, cfg.gp_lambda)), gp.item()
    return loss, None


def train_gan(
    real_images: np.ndarray,
    cfg: GanConfig,
    seed: int = 0,
    embedder=None,
    transfer: tuple[Checkpoint | None, Checkpoint | None] | None = None,
    snapshot_dir=None,
    allow_empty_transfer: bool = False,
) -> GanResult:
    """Train one GAN on ``real_images`` (N, C, H, W) in [0, 1].

    One iteration is one generator update preceded by one (DCGAN) or
    ``n_critic`` (WGAN, WGAN-GP) critic updates. With an ``embedder``, FID
    and IS are logged every ``eval_every`` iterations and at the end.
    """
    real_images = np.asarray(real_images, dtype=np.float64)
    n, c, h, w = real_images.shape
    if h != w:
        raise ValueError(f"train_gan: images must be square, got {h}x{w}")
    ss = np.random.SeedSequence(seed)
    init_seed, train_seed, eval_seed, snap_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(4))
    pair = build_gan(cfg.variant, cfg.latent, h, c, init_seed, cfg.width, cfg.width)
    if transfer is not None:
        g_src, d_src = transfer
        if g_src is not None:
            transfer_init(pair.generator, g_src, allow_empty_transfer)
        if d_src is not None:
            transfer_init(pair.critic, d_src, allow_empty_transfer)
    g_opt, d_opt = _optimizers(pair, cfg)
    rng = np.random.default_rng(train_seed)
    scaled = real_images * 2.0 - 1.0
    real_stats = feature_stats(embedder.embed(real_images)) if embedder is not None else None
    z_fixed = np.random.default_rng(snap_seed).standard_normal((16, cfg.latent))
    result = GanResult(pair)
    snapshots = set(int(i) for i in cfg.snapshot_iters) | {cfg.iterations}

    def evaluate(it: int) -> None:
        fake = to_unit_range(pair.generator.sample(cfg.eval_samples, np.random.default_rng(eval_seed)))
        fid = frechet_distance(feature_stats(embedder.embed(fake)), real_stats)
        score = inception_score(embedder.predict_proba(fake), splits=cfg.is_splits)
        result.trace.append({"iteration": it, "fid": fid, "is": score})

    def snapshot(it: int) -> None:
        pair.generator.eval()
        with no_grad():
            imgs = pair.generator(Tensor(z_fixed)).data
        pair.generator.train()
        path = Path(snapshot_dir) / f"iter_{it:05d}.png"
        result.snapshots.append(str(save_grid(to_unit_range(imgs), path, ncols=8)))

    pair.generator.train()
    pair.critic.train()
    if snapshot_dir is not None and 0 in snapshots:
        snapshot(0)
    for it in range(1, cfg.iterations + 1):
        gp_val = None
        for _ in range(cfg.critic_steps):
            idx = rng.choice(n, size=cfg.batch, replace=n < cfg.batch)
            z = rng.standard_normal((cfg.batch, cfg.latent))
            fake = pair.generator(Tensor(z)).data  # detached: critic step only
            d_loss, gp_val = _critic_step(pair, cfg, scaled[idx], fake, rng)
            if not np.isfinite(d_loss.item()):
                raise TrainingDivergedError(f"{cfg.variant} critic loss non-finite at iteration {it}", result.losses)
            pair.critic.zero_grad()
            d_loss.backward()
            d_opt.step()
            if cfg.variant == "wgan":
                clip_weights(pair.critic.parameters(), cfg.clip)
        z = rng.standard_normal((cfg.batch, cfg.latent))
        score = pair.critic(pair.generator(Tensor(z)))
        if cfg.variant == "dcgan":
            g_loss = binary_cross_entropy(score, 1.0)  # non-saturating form
        else:
            g_loss = ops.neg(ops.mean(score))
        if not np.isfinite(g_loss.item()):
            raise TrainingDivergedError(f"{cfg.variant} generator loss non-finite at iteration {it}", result.losses)
        pair.generator.zero_grad()
        pair.critic.zero_grad()
        g_loss.backward()
        g_opt.step()
        pair.critic.zero_grad()
        entry = {"iteration": it, "d_loss": d_loss.item(), "g_loss": g_loss.item()}
        if gp_val is not None:
            entry["gp"] = gp_val
        result.losses.append(entry)
        if embedder is not None and (it % cfg.eval_every == 0 or it == cfg.iterations):
            evaluate(it)
        if snapshot_dir is not None and it in snapshots:
            snapshot(it)
    pair.generator.eval()
    pair.critic.eval()
    return result
