"""Finite-difference checks of every differentiable piece, from single ops to whole losses."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .autodiff import Tensor, grad_check, parameter
from .autodiff import functional as F
from .discriminator import Discriminator, DiscriminatorConfig, classification_loss
from .generator import Generator, GeneratorConfig
from .graph import BubbleDiagram, multi_hot
from .layers import GraphBatch
from .training import (
    AdjacencyPredictor,
    TrainConfig,
    accumulate_penalty_gradient,
    gradient_penalty_terms,
    generator_objective,
)

# 3-room graph: a connected pair plus one isolated room, so both attention
# branches have non-empty neighbourhoods.
SUITE_DIAGRAM = BubbleDiagram(["living room", "kitchen", "bedroom"], [(0, 1)])
SUITE_MASK = 8


def _op_cases(rng: np.random.Generator) -> dict[str, Callable[[], tuple[Callable[[], Tensor], list]]]:
    def pair(shape=(3, 4)):
        a, b = parameter(rng.normal(size=shape)), parameter(rng.normal(size=shape))
        a.data = np.where(np.abs(a.data) < 0.05, 0.3, a.data)  # away from the leaky-ReLU kink
        return a, b

    def probe_sum(out_fn, params):
        probe = rng.normal(size=out_fn().shape)
        return lambda: F.sum(F.mul(out_fn(), probe)), params

    cases = {}

    def unary(name, fn):
        def build():
            a, b = pair()
            return probe_sum(lambda: fn(a, b), [a, b])
        cases[name] = build

    unary("add", F.add)
    unary("sub", F.sub)
    unary("mul", F.mul)
    unary("scale", lambda a, b: F.scale(a, -1.7))
    unary("add_n", lambda a, b: F.add_n([a, b, a]))
    unary("square", lambda a, b: F.square(a))
    unary("sigmoid", lambda a, b: F.sigmoid(a))
    unary("leaky_relu", lambda a, b: F.leaky_relu(a, 0.1))
    unary("gelu", lambda a, b: F.gelu(a))
    unary("softmax", lambda a, b: F.softmax(a, axis=-1))
    unary("sum", lambda a, b: F.sum(a, axis=0))
    unary("mean", lambda a, b: F.mean(a, axis=1))
    unary("reshape", lambda a, b: F.reshape(a, (4, 3)))
    unary("transpose", lambda a, b: F.transpose(a, (1, 0)))
    unary("concat", lambda a, b: F.concat([a, b], axis=1))
    unary("index_rows", lambda a, b: F.index_rows(a, [2, 0, 2]))
    unary("matmul", lambda a, b: F.matmul(a, F.transpose(b, (1, 0))))
    unary("linear", lambda a, b: F.linear(a, b, F.sum(b, axis=1)))
    unary("frobenius_norm", lambda a, b: F.frobenius_norm(F.sub(a, b)))
    unary("bce_with_logits", lambda a, b: F.bce_with_logits(a, (b.data > 0).astype(float)))

    def conv():
        x = parameter(rng.normal(size=(2, 2, 5, 5)))
        w = parameter(rng.normal(size=(3, 2, 3, 3)))
        b = parameter(rng.normal(size=3))
        return probe_sum(lambda: F.conv2d(x, w, b, stride=1, pad=1), [x, w, b])

    def conv_strided():
        x = parameter(rng.normal(size=(1, 2, 6, 6)))
        w = parameter(rng.normal(size=(2, 2, 4, 4)))
        return probe_sum(lambda: F.conv2d(x, w, stride=2, pad=1), [x, w])

    def conv_t():
        x = parameter(rng.normal(size=(1, 2, 3, 3)))
        w = parameter(rng.normal(size=(2, 3, 4, 4)))
        b = parameter(rng.normal(size=3))
        return probe_sum(lambda: F.conv_transpose2d(x, w, b), [x, w, b])

    cases["conv2d"] = conv
    cases["conv2d_stride2"] = conv_strided
    cases["conv_transpose2d"] = conv_t
    return cases


def _perturb(module, rng: np.random.Generator, value: float = 0.5) -> None:
    """Open the attention gates and give biases random values.

    With zero biases some pre-activations sit exactly on the leaky-ReLU kink,
    where central differences are meaningless; open gates make the check
    cover the attention paths as well.
    """
    for name, p in module.named_parameters():
        if ".gates." in name:
            p.data = np.full(p.shape, value)
        elif name.endswith("bias"):
            p.data = rng.normal(scale=0.1, size=p.shape)


def suite_models(seed: int = 0):
    rng = np.random.default_rng([seed, 99])
    gen = Generator(GeneratorConfig(noise_dim=4, base_channels=4, mask_size=SUITE_MASK, blocks=2,
                                    head_channels=(6, 4)), rng)
    disc = Discriminator(DiscriminatorConfig(mask_size=SUITE_MASK, type_channels=2, channels=4,
                                             vector_dim=8, blocks=2), rng)
    pred = AdjacencyPredictor(3, SUITE_MASK, rng, hidden=4)
    _perturb(gen, rng)
    _perturb(disc, rng)
    _perturb(pred, rng)
    return gen, disc, pred


def run_gradient_suite(seed: int = 0, max_coords: Optional[int] = 6, h: float = 1e-5) -> dict[str, float]:
    """Worst relative error per check. Model-level checks probe ``max_coords`` entries per tensor."""
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, build in _op_cases(rng).items():
        f, params = build()
        errors[f"op:{name}"] = grad_check(f, params, h=h)

    gen, disc, pred = suite_models(seed)
    batch = GraphBatch.from_diagrams([SUITE_DIAGRAM])
    n = len(SUITE_DIAGRAM.nodes)
    noise = rng.normal(size=(n, gen.config.noise_dim))
    present = multi_hot(SUITE_DIAGRAM.nodes)[None]
    real = np.zeros((n, SUITE_MASK, SUITE_MASK))
    real[0, :4, :4] = real[1, :4, 4:] = real[2, 5:, :] = 1.0

    probe = rng.normal(size=(n, SUITE_MASK, SUITE_MASK))
    errors["model:generator"] = grad_check(
        lambda: F.sum(F.mul(gen.generate_masks([SUITE_DIAGRAM], noise), probe)),
        gen.parameters(), h=h, max_coords=max_coords, seed=seed)

    masks = parameter(rng.uniform(0.1, 0.9, size=(n, SUITE_MASK, SUITE_MASK)))

    def d_out():
        out = disc(masks, batch)
        return F.add(F.sum(out.realism), classification_loss(out.type_logits, present))

    errors["model:discriminator"] = grad_check(d_out, disc.parameters() + [masks], h=h,
                                               max_coords=max_coords, seed=seed)

    config = TrainConfig(max_rooms=3, lambda_gcyc=0.7, lambda_cls=0.5)
    errors["loss:generator_total"] = grad_check(
        lambda: generator_objective(gen, disc, pred, [SUITE_DIAGRAM], noise, config)[0],
        gen.parameters() + pred.parameters(), h=h, max_coords=max_coords, seed=seed)

    fake = np.clip(real[::-1] * 0.7 + 0.1, 0, 1)

    def d_loss():
        gap = F.sub(F.mean(disc(fake, batch).realism), F.mean(disc(real, batch).realism))
        cls = classification_loss(disc(real, batch).type_logits, present)
        return F.add(gap, F.scale(cls, config.lambda_cls))

    errors["loss:discriminator_total"] = grad_check(d_loss, disc.parameters(), h=h,
                                                    max_coords=max_coords, seed=seed)
    errors["loss:gradient_penalty"] = _penalty_check(disc, batch, 0.5 * (real + fake), rng, max_coords)
    return errors


def _penalty_check(disc: Discriminator, batch: GraphBatch, interp: np.ndarray, rng: np.random.Generator,
                   max_coords: Optional[int], h: float = 1e-5) -> float:
    """Penalty parameter gradient (finite-difference Hessian-vector product) vs differences of the penalty.

    The penalty is built from the input gradient of a leaky-ReLU network,
    which is piecewise constant in the parameters. A probe that straddles a
    kink sees a jump rather than a slope; such probes are recognised by
    disagreeing one-sided differences and skipped.
    """
    params = disc.parameters()
    for p in params:
        p.grad = None
    accumulate_penalty_gradient(disc, interp, batch, 1.0)
    analytic = [np.zeros(p.shape) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.grad = None

    def penalty() -> float:
        norms, _ = gradient_penalty_terms(disc, interp, batch)
        return float(np.mean((norms - 1.0) ** 2))

    centre = penalty()
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(p.size)
        if max_coords is not None and p.size > max_coords:
            coords = rng.choice(p.size, size=max_coords, replace=False)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            up = penalty()
            flat[idx] = orig - h
            down = penalty()
            flat[idx] = orig
            forward, backward = (up - centre) / h, (centre - down) / h
            if abs(forward - backward) > 1e-2 * max(abs(forward), abs(backward), 1e-6):
                continue  # kink crossing
            numeric = (up - down) / (2 * h)
            ai = a.reshape(-1)[idx]
            worst = max(worst, abs(ai - numeric) / max(abs(ai), abs(numeric), 1e-6))
    return worst
