"""Gradient-check cases: one per registered op, plus small reference models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from oracles import central_diff, rel_err, sample_indices
import math

from ssce.nn import spec as S
from ssce.nn import init_parameters
from ssce.pipeline import RunLedger, TrainingRecord, gamma_search
from ssce.tensor import Tensor, grad, ops


def _away_from_zero(rng, shape, margin=0.1):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x) * margin + x, x)


def _batch_norm(x, w, b):
    return ops.batch_norm(x, w, b, np.zeros(x.shape[1]), np.ones(x.shape[1]), training=True)


def _dropout(x):
    return ops.dropout(x, 0.3, np.random.default_rng(5), training=True)


@dataclass
class OpCase:
    name: str
    make: Callable[[np.random.Generator], list]
    fn: Callable[..., Tensor]
    second_order: bool = True


OP_CASES = [
    OpCase("add", lambda r: [r.normal(size=(3, 4)), r.normal(size=(4,))], ops.add),
    OpCase("mul", lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 1))], ops.mul),
    OpCase("matmul", lambda r: [r.normal(size=(3, 4)), r.normal(size=(4, 2))], ops.matmul),
    OpCase("conv2d", lambda r: [r.normal(size=(2, 2, 6, 6)), r.normal(size=(3, 2, 3, 3))],
           lambda x, w: ops.conv2d(x, w, stride=2, padding=1)),
    OpCase("conv2d_transpose", lambda r: [r.normal(size=(2, 3, 3, 3)), r.normal(size=(3, 2, 4, 4))],
           lambda y, w: ops.conv2d_transpose(y, w, stride=2, padding=1)),
    OpCase("relu", lambda r: [_away_from_zero(r, (3, 5))], ops.relu),
    OpCase("leaky_relu", lambda r: [_away_from_zero(r, (3, 5))], lambda x: ops.leaky_relu(x, 0.2)),
    OpCase("tanh", lambda r: [r.normal(size=(3, 5))], ops.tanh),
    OpCase("sigmoid", lambda r: [r.normal(size=(3, 5)) * 3], ops.sigmoid),
    OpCase("softmax", lambda r: [r.normal(size=(3, 5))], lambda x: ops.softmax(x, axis=1)),
    OpCase("log", lambda r: [r.uniform(0.5, 2.0, size=(3, 5))], ops.log),
    OpCase("mean", lambda r: [r.normal(size=(3, 4, 2))], lambda x: ops.mean(x, axis=(0, 2), keepdims=True)),
    OpCase("sum", lambda r: [r.normal(size=(3, 4, 2))], lambda x: ops.sum(x, axis=1)),
    OpCase("reshape", lambda r: [r.normal(size=(3, 4))], lambda x: ops.reshape(x, (2, 6))),
    OpCase("pad", lambda r: [r.normal(size=(1, 2, 3, 3))], lambda x: ops.pad(x, 2)),
    OpCase("max_pool", lambda r: [r.permutation(64).reshape(1, 1, 8, 8) * 0.1 + r.uniform(0, 0.01, (1, 1, 8, 8))],
           lambda x: ops.max_pool(x, 2), second_order=False),
    OpCase("batch_norm", lambda r: [r.normal(size=(4, 3, 2, 2)), r.normal(size=3), r.normal(size=3)], _batch_norm),
    OpCase("layer_norm", lambda r: [r.normal(size=(3, 2, 2, 2)), r.normal(size=(2, 2, 2)), r.normal(size=(2, 2, 2))],
           ops.layer_norm),
    OpCase("dropout", lambda r: [r.normal(size=(4, 6))], _dropout),
    OpCase("l2_norm", lambda r: [r.normal(size=(3, 5))], lambda x: ops.l2_norm(x, axis=1)),
]


def weighted_loss(fn, arrays, weights):
    """sum(fn(*arrays) * weights) as a Tensor, with leaves that require grad."""
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    return ops.sum(ops.mul(fn(*leaves), Tensor(weights))), leaves


def op_first_order_error(case: OpCase, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    arrays = case.make(rng)
    out_shape = case.fn(*[Tensor(a) for a in arrays]).shape
    weights = rng.normal(size=out_shape)
    loss, leaves = weighted_loss(case.fn, arrays, weights)
    analytic = grad(loss, leaves)
    worst = 0.0
    for i, a in enumerate(arrays):
        def f(x, i=i):
            args = [Tensor(x if j == i else arrays[j]) for j in range(len(arrays))]
            return float(np.sum(case.fn(*args).data * weights))

        worst = max(worst, rel_err(analytic[i].data, central_diff(f, a)))
    return worst


def op_second_order_error(case: OpCase, seed: int = 0) -> float:
    """Check d/dx of ||d loss / dx||^2 against finite differences of the analytic first gradient."""
    rng = np.random.default_rng(seed)
    arrays = case.make(rng)
    out_shape = case.fn(*[Tensor(a) for a in arrays]).shape
    weights = rng.normal(size=out_shape)

    def penalty(xs, create_graph):
        loss, leaves = weighted_loss(case.fn, xs, weights)
        gs = grad(loss, leaves, create_graph=create_graph)
        total = ops.sum(ops.mul(gs[0], gs[0]))
        for g in gs[1:]:
            total = ops.add(total, ops.sum(ops.mul(g, g)))
        return total, leaves

    total, leaves = penalty(arrays, True)
    analytic = grad(total, leaves)
    worst = 0.0
    for i, a in enumerate(arrays):
        def f(x, i=i):
            xs = [x if j == i else arrays[j] for j in range(len(arrays))]
            return penalty(xs, False)[0].item()

        worst = max(worst, rel_err(analytic[i].data, central_diff(f, a)))
    return worst


# -- small models -----------------------------------------------------------------


def mlp_model(seed=0):
    specs = [S.linear(8), S.act("tanh"), S.linear(6), S.act("sigmoid"), S.linear(3)]
    return init_parameters(specs, (5,), seed), (4, 5)


def conv_classifier_model(seed=0):
    specs = [S.conv(3, 3, 1, 1), S.norm("batch"), S.act("relu"), S.pool(2), S.conv(4, 3, 2, 1), S.act("leaky_relu"),
             S.flatten(), S.linear(3)]
    return init_parameters(specs, (1, 6, 6), seed), (3, 1, 6, 6)


def wgan_gp_critic_model(seed=0):
    from ssce.models import build_gan

    return build_gan("wgan-gp", latent_len=8, resolution=16, channels=1, seed=seed, d_width=4).critic, (2, 1, 16, 16)


MODELS = {"mlp": mlp_model, "conv-classifier": conv_classifier_model, "wgan-gp-critic": wgan_gp_critic_model}


def model_gradient_error(name: str, seed: int = 0, per_param: int = 12) -> float:
    """Parameter gradients of sum(model(x) * r) vs central differences (sampled entries)."""
    model, in_shape = MODELS[name](seed)
    model.train()
    rng = np.random.default_rng(seed + 100)
    x = rng.normal(size=in_shape)
    out = model(Tensor(x))
    weights = rng.normal(size=out.shape)
    model.zero_grad()
    ops.sum(ops.mul(model(Tensor(x)), Tensor(weights))).backward()
    analytic_all, numeric_all = [], []
    for _, p in model.named_parameters():
        idx = sample_indices(p.data.size, per_param, rng)
        analytic = p.grad.data.reshape(-1)[idx]

        def f(arr, p=p):
            saved = p.data.copy()
            p.data[...] = arr
            val = float(np.sum(model(Tensor(x)).data * weights))
            p.data[...] = saved
            return val

        analytic_all.append(analytic)
        numeric_all.append(central_diff(f, p.data.copy(), index=idx).reshape(-1)[idx])
    return rel_err(np.concatenate(analytic_all), np.concatenate(numeric_all))


# -- gradient penalty through a small conv critic ---------------------------------


def small_conv_critic(seed=0):
    specs = [S.conv(3, 3, 2, 1), S.norm("layer"), S.act("leaky_relu", 0.2), S.flatten(), S.linear(1)]
    return init_parameters(specs, (1, 6, 6), seed)


def gradient_penalty_error(seed: int = 0, per_param: int = 6) -> float:
    """d(penalty)/d(params) by double backprop vs a nested finite-difference oracle."""
    from oracles import gp_penalty_numeric

    critic = small_conv_critic(seed)
    rng = np.random.default_rng(seed + 7)
    x_hat = rng.normal(size=(2, 1, 6, 6))

    xt = Tensor(x_hat, requires_grad=True)
    (g,) = grad(ops.sum(critic(xt)), [xt], create_graph=True)
    norms = ops.l2_norm(ops.flatten(g), axis=1)
    gp = ops.mean(ops.power(ops.sub(norms, 1.0), 2.0))
    critic.zero_grad()
    gp.backward()

    def critic_np(x):
        return critic(Tensor(x)).data

    # one relative error over the whole sampled gradient vector: several entries
    # are exactly zero (biases after the last nonlinearity) and carry only FD noise
    analytic_all, numeric_all = [], []
    for _, p in critic.named_parameters():
        idx = sample_indices(p.data.size, per_param, rng)
        # the penalty never depends on the last bias, so it may get no gradient at all
        analytic = np.zeros(len(idx)) if p.grad is None else p.grad.data.reshape(-1)[idx]

        def f(arr, p=p):
            saved = p.data.copy()
            p.data[...] = arr
            val = gp_penalty_numeric(critic_np, x_hat, h=1e-5)
            p.data[...] = saved
            return val

        analytic_all.append(analytic)
        numeric_all.append(central_diff(f, p.data.copy(), h=1e-4, index=idx).reshape(-1)[idx])
    return rel_err(np.concatenate(analytic_all), np.concatenate(numeric_all))


# -- scripted trainer for the gamma search ----------------------------------------

ACC_B, T_B = 50.0, 10.0


class ScriptedTrainer:
    """Returns records whose TEI equals a scripted value: acc = acc_b + TEI, t = t_b + e."""

    def __init__(self, script, fail=()):
        self.script = script
        self.fail = set(fail)
        self.calls = []

    def ledger(self):
        led = RunLedger(config_hash="stub", seed=0)
        for name in self.script:
            led.add_baseline(TrainingRecord(name, True, 0, ACC_B, T_B, 0))
        return led

    def __call__(self, structure, gamma):
        name, wd = structure
        self.calls.append((name, gamma))
        if (name, gamma) in self.fail:
            raise RuntimeError("diverged")
        return TrainingRecord(name, wd, gamma, ACC_B + self.script[name][gamma - 1], T_B + math.e, 0)


def run_scripted_search(script, gamma_max=8, fail=()):
    trainer = ScriptedTrainer(script, fail)
    led = gamma_search(trainer.ledger(), trainer, gamma_max)
    return led, trainer


def chosen_gammas(led):
    return {s[0]: led.chosen_gamma(s) for s in led.structures()}


# name -> (TEI script per structure, gamma_max, expected stop gamma, expected chosen gamma per structure)
SCENARIOS = {
    "monotone-rise": ({"A": [1.0, 2.0, 3.0, 4.0, 5.0]}, 5, 5, {"A": 5}),
    "early-peak": ({"A": [2.0, 2.5, 2.4], "B": [1.0, 0.9, 0.8]}, 8, 3, {"A": 2, "B": 1}),
    "all-decreasing": ({"A": [3.0, 2.0, 1.0], "B": [2.0, 1.0, 0.5]}, 8, 2, {"A": 1, "B": 1}),
    "single-structure": ({"A": [1.0, 1.5, 2.0, 1.9], "B": [3.0, 2.0, 1.0, 0.5]}, 8, 4, {"A": 3, "B": 1}),
    "gamma-max-cap": ({"A": [1.0, 2.0, 3.0, 4.0, 5.0]}, 3, 3, {"A": 3}),
}
