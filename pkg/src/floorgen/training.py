"""Adversarial training with node classification and graph cycle-consistency."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import Adam, Conv2d, Linear, Module, Tensor
from .autodiff import functional as F
from .autodiff.serialize import save_checkpoint
from .data import Sample, downsample_masks
from .discriminator import Discriminator, DiscriminatorConfig, classification_loss
from .errors import ConfigurationError, InputError, NumericalError
from .generator import Generator, GeneratorConfig, sample_noise
from .graph import NUM_ROOM_TYPES, multi_hot, shortest_distance_matrix
from .layers import LEAK, GraphBatch

log = logging.getLogger(__name__)

METRIC_KEYS = ("step", "loss_d", "loss_g_adv", "loss_cls", "loss_gcyc")


@dataclass(frozen=True)
class TrainConfig:
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    lr_adj: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.999)
    batch_size: int = 4
    steps: int = 2000
    lambda_adv: float = 1.0
    lambda_cls: float = 1.0
    lambda_gcyc: float = 0.1
    lambda_adj_sup: float = 1.0
    d_steps: int = 1
    lambda_gp: float = 10.0
    gp_epsilon: float = 1e-5
    use_classifier: bool = True
    use_gcyc: bool = True
    max_rooms: int = 13
    checkpoint_every: int = 0
    seed: int = 0

    def __post_init__(self):
        weights = (self.lambda_adv, self.lambda_cls, self.lambda_gcyc, self.lambda_adj_sup, self.lambda_gp)
        if any(w < 0 for w in weights):
            raise ConfigurationError("loss weights must be non-negative")
        if self.batch_size <= 0 or self.steps < 0 or self.d_steps < 0 or self.max_rooms <= 0:
            raise ConfigurationError("batch_size, max_rooms positive; steps, d_steps non-negative")

    @property
    def effective_lambda_cls(self) -> float:
        return self.lambda_cls if self.use_classifier else 0.0

    @property
    def effective_lambda_gcyc(self) -> float:
        return self.lambda_gcyc if self.use_gcyc else 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "betas" in doc:
            doc["betas"] = tuple(doc["betas"])
        return cls(**doc)


# ------------------------------------------------------------ adjacency network

class AdjacencyPredictor(Module):
    """Regresses the shortest-distance matrix from a stack of room masks.

    The masks of up to ``max_rooms`` rooms are stacked as channels of one
    image, encoded by two stride-2 convolutions, and mapped together with the
    room types by one fully connected layer to ``max_rooms x max_rooms``
    values. The top-left ``M x M`` block, symmetrized and with a zero
    diagonal, is the prediction for ``M`` rooms.
    """

    def __init__(self, max_rooms: int, mask_size: int, rng: np.random.Generator, hidden: int = 16):
        self.max_rooms = max_rooms
        self.mask_size = mask_size
        self.conv = [Conv2d(max_rooms, hidden, rng, k=4, stride=2, pad=1),
                     Conv2d(hidden, 2 * hidden, rng, k=4, stride=2, pad=1)]
        feat = 2 * hidden * (mask_size // 4) ** 2 + max_rooms * NUM_ROOM_TYPES
        self.fc = Linear(feat, max_rooms * max_rooms, rng)

    def forward(self, masks, batch: GraphBatch) -> Tensor:
        """``(num_graphs, max_rooms, max_rooms)`` predictions, zero outside each graph's block."""
        masks = masks if isinstance(masks, Tensor) else Tensor(masks)
        k, s = self.max_rooms, self.mask_size
        slots, valid = self._slots(batch)
        b = batch.num_graphs
        scatter = np.zeros((b * k, batch.num_nodes))
        scatter[slots, np.arange(batch.num_nodes)] = 1.0
        stacked = F.reshape(F.matmul(scatter, F.reshape(masks, (batch.num_nodes, -1))), (b, k, s, s))
        x = stacked
        for conv in self.conv:
            x = F.leaky_relu(conv(x), LEAK)
        types = np.zeros((b * k, NUM_ROOM_TYPES))
        types[slots, batch.types] = 1.0
        feats = F.concat([F.reshape(x, (b, -1)), Tensor(types.reshape(b, -1))], axis=1)
        raw = F.reshape(self.fc(feats), (b, k, k))
        sym = F.scale(F.add(raw, F.transpose(raw, (0, 2, 1))), 0.5)
        keep = valid[:, :, None] * valid[:, None, :] * (1.0 - np.eye(k))[None]
        return F.mul(sym, keep)

    def _slots(self, batch: GraphBatch):
        k = self.max_rooms
        slots = np.zeros(batch.num_nodes, dtype=np.int64)
        valid = np.zeros((batch.num_graphs, k))
        counts = np.zeros(batch.num_graphs, dtype=np.int64)
        for n, g in enumerate(batch.graph_index):
            if counts[g] >= k:
                raise InputError(f"graph {g} has more than {k} rooms")
            slots[n] = g * k + counts[g]
            valid[g, counts[g]] = 1.0
            counts[g] += 1
        return slots, valid


def predict_gen_adjacency(predictor: AdjacencyPredictor, masks, diagram) -> Tensor:
    """``M x M`` predicted distance matrix for one diagram's masks."""
    if len(masks) < 1:
        raise InputError("at least one mask required")
    out = predictor(masks, GraphBatch.from_diagrams([diagram]))
    m = len(diagram.nodes)
    rows = F.index_rows(F.reshape(out, out.shape[1:]), np.arange(m))
    return F.transpose(F.index_rows(F.transpose(rows, (1, 0)), np.arange(m)), (1, 0))


def padded_distance_targets(diagrams, max_rooms: int) -> np.ndarray:
    out = np.zeros((len(diagrams), max_rooms, max_rooms))
    for i, d in enumerate(diagrams):
        m = len(d.nodes)
        out[i, :m, :m] = shortest_distance_matrix(d)
    return out


# --------------------------------------------------------------------- losses

def gcyc_loss(g_gt, g_pred) -> Tensor:
    """Frobenius norm of the difference between two distance matrices."""
    g_pred = g_pred if isinstance(g_pred, Tensor) else Tensor(g_pred)
    gt = np.asarray(g_gt, dtype=np.float64)
    if gt.shape != g_pred.shape:
        raise InputError(f"distance matrices differ in size: {gt.shape} vs {g_pred.shape}")
    return F.frobenius_norm(F.sub(gt, g_pred))


def batched_gcyc_loss(g_gt: np.ndarray, g_pred: Tensor) -> Tensor:
    """Mean over graphs of per-graph Frobenius norms; inputs ``(B, K, K)``."""
    if g_gt.shape != g_pred.shape:
        raise InputError(f"distance matrices differ in size: {g_gt.shape} vs {g_pred.shape}")
    losses = [gcyc_loss(g_gt[b], _row(g_pred, b)) for b in range(g_gt.shape[0])]
    return F.scale(F.add_n(losses), 1.0 / len(losses))


def _row(t: Tensor, b: int) -> Tensor:
    return F.reshape(F.index_rows(t, [b]), t.shape[1:])


@dataclass
class AdversarialTerms:
    loss_d: float
    wasserstein_gap: float
    penalty: float
    loss_g_adv: Tensor


def gradient_penalty_terms(discriminator: Discriminator, interp: np.ndarray, batch: GraphBatch):
    """Per-graph input-gradient norms of the realism score at ``interp`` masks.

    Returns ``(norms, grads)`` where ``grads`` has the masks' shape.
    """
    params = discriminator.parameters()
    saved = [p.grad for p in params]
    for p in params:
        p.grad = None
    x = Tensor(interp, requires_grad=True)
    out = discriminator(x, batch)
    F.sum(out.realism).backward()
    for p, g in zip(params, saved):
        p.grad = g
    grads = x.grad if x.grad is not None else np.zeros_like(interp)
    sq = np.zeros(batch.num_graphs)
    np.add.at(sq, batch.graph_index, (grads.reshape(len(grads), -1) ** 2).sum(axis=1))
    return np.sqrt(sq), grads


def accumulate_penalty_gradient(discriminator: Discriminator, interp: np.ndarray, batch: GraphBatch,
                                weight: float, epsilon: float = 1e-5) -> float:
    """Add ``weight * d/dtheta mean_b (||grad_x D||_b - 1)^2`` into the parameter grads.

    With ``g_b`` the input gradient and ``u`` the fixed vector
    ``2 (|g_b| - 1) g_b / (|g_b| B)``, the parameter gradient of the penalty is
    ``d/dtheta <grad_x D, u>``, a mixed second derivative. It is evaluated as
    a central difference of first-order parameter gradients along ``u``:
    ``[grad_theta D(x + eps u) - grad_theta D(x - eps u)] / (2 eps)``.
    Returns the penalty value.
    """
    norms, grads = gradient_penalty_terms(discriminator, interp, batch)
    penalty = float(np.mean((norms - 1.0) ** 2))
    if weight == 0.0:
        return penalty
    safe = np.where(norms > 0, norms, 1.0)
    coef = np.where(norms > 0, 2.0 * (norms - 1.0) / safe, 0.0) / batch.num_graphs
    u = grads * coef[batch.graph_index].reshape(-1, 1, 1)
    scale = float(np.sqrt((u * u).sum()))
    if scale == 0.0:
        return penalty
    direction = u / scale
    seed = np.full(batch.num_graphs, weight * scale / (2.0 * epsilon))
    discriminator(interp + epsilon * direction, batch).realism.backward(seed)
    discriminator(interp - epsilon * direction, batch).realism.backward(-seed)
    return penalty


def adversarial_losses(discriminator: Discriminator, real: np.ndarray, fake, batch: GraphBatch,
                       lambda_gp: float = 10.0, rng: Optional[np.random.Generator] = None,
                       epsilon: float = 1e-5, accumulate: bool = False) -> AdversarialTerms:
    """WGAN-GP: ``loss_D = E[D(fake)] - E[D(real)] + lambda_gp * GP``, ``loss_G = -E[D(fake)]``.

    With ``accumulate`` the discriminator's parameter gradients of ``loss_D``
    (penalty included) are added into its ``grad`` buffers. ``fake`` may be a
    tensor attached to the generator graph; the returned ``loss_g_adv`` keeps
    that attachment.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    fake_data = fake.data if isinstance(fake, Tensor) else np.asarray(fake)
    out_real = discriminator(real, batch)
    out_fake = discriminator(Tensor(fake_data), batch)
    gap = F.sub(F.mean(out_fake.realism), F.mean(out_real.realism))
    if accumulate:
        gap.backward()
    t = rng.random(batch.num_graphs)[batch.graph_index].reshape(-1, 1, 1)
    interp = t * real + (1.0 - t) * fake_data
    if accumulate:
        penalty = accumulate_penalty_gradient(discriminator, interp, batch, lambda_gp, epsilon)
    else:
        norms, _ = gradient_penalty_terms(discriminator, interp, batch)
        penalty = float(np.mean((norms - 1.0) ** 2))
    g_out = discriminator(fake, batch) if isinstance(fake, Tensor) else out_fake
    loss_g = F.scale(F.mean(g_out.realism), -1.0)
    return AdversarialTerms(gap.item() + lambda_gp * penalty, gap.item(), penalty, loss_g)


# ------------------------------------------------------------------- training

@dataclass
class TrainResult:
    generator: Generator
    discriminator: Discriminator
    predictor: AdjacencyPredictor
    log: list[dict] = field(default_factory=list)

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, module in (("generator", self.generator), ("discriminator", self.discriminator),
                               ("predictor", self.predictor)):
            out.update({f"{prefix}.{k}": v for k, v in module.state_dict().items()})
        return out


def _batch_arrays(samples: Sequence[Sample], mask_size: int):
    diagrams = [s.diagram for s in samples]
    batch = GraphBatch.from_diagrams(diagrams)
    real = np.concatenate([downsample_masks(s.masks(), mask_size) for s in samples])
    present = np.stack([multi_hot(d.nodes) for d in diagrams])
    return diagrams, batch, real, present


def generator_objective(generator: Generator, discriminator: Discriminator, predictor: AdjacencyPredictor,
                        diagrams, noise: np.ndarray, config: TrainConfig, real: Optional[np.ndarray] = None):
    """Total generator loss and its components for one batch.

    Zero-weighted terms are evaluated for logging but left out of the graph.
    Returns ``(total, components, fake_masks)``.
    """
    batch = GraphBatch.from_diagrams(diagrams)
    fake = generator.generate_masks(diagrams, noise)
    out = discriminator(fake, batch)
    adv = F.scale(F.mean(out.realism), -1.0)
    present = np.stack([multi_hot(d.nodes) for d in diagrams])
    cls = classification_loss(out.type_logits, present)
    targets = padded_distance_targets(diagrams, predictor.max_rooms)
    gcyc = batched_gcyc_loss(targets, predictor(fake, batch))
    terms = []
    for weight, term in ((config.lambda_adv, adv), (config.effective_lambda_cls, cls),
                         (config.effective_lambda_gcyc, gcyc)):
        if weight != 0.0:
            terms.append(F.scale(term, weight))
    total = F.add_n(terms) if terms else Tensor(0.0)
    components = {"loss_g_adv": adv.item(), "loss_cls": cls.item(), "loss_gcyc": gcyc.item()}
    return total, components, fake


def _check_finite(values: dict, step: int, dump: dict, out_dir: Optional[Path]):
    bad = {k: v for k, v in values.items() if not np.isfinite(v)}
    if not bad:
        return
    if out_dir is not None:
        path = Path(out_dir) / "nonfinite_dump.json"
        path.write_text(json.dumps({"step": step, "losses": {k: repr(v) for k, v in values.items()},
                                    **{k: np.asarray(v).tolist() for k, v in dump.items()}}))
    raise NumericalError(f"non-finite loss at step {step}: {bad}")


def build_models(gen_config: GeneratorConfig, disc_config: DiscriminatorConfig, config: TrainConfig):
    if gen_config.mask_size != disc_config.mask_size:
        raise ConfigurationError("generator and discriminator mask sizes differ")
    generator = Generator(gen_config, np.random.default_rng([config.seed, 1]))
    discriminator = Discriminator(disc_config, np.random.default_rng([config.seed, 2]))
    predictor = AdjacencyPredictor(config.max_rooms, gen_config.mask_size, np.random.default_rng([config.seed, 3]))
    return generator, discriminator, predictor


def train(dataset: Sequence[Sample], config: TrainConfig, gen_config: GeneratorConfig,
          disc_config: DiscriminatorConfig, out_dir: Optional[Path] = None,
          callback: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Alternate discriminator and generator updates for ``config.steps`` steps.

    Every step appends ``{"step", "loss_d", "loss_g_adv", "loss_cls",
    "loss_gcyc"}`` to the log (and to ``metrics.jsonl`` when ``out_dir`` is
    given). The run is a pure function of its inputs and seeds.
    """
    if not dataset:
        raise InputError("training needs a non-empty dataset")
    if disc_config.use_classifier != config.use_classifier:
        disc_config = DiscriminatorConfig(**{**disc_config.to_json(), "use_classifier": config.use_classifier})
    generator, discriminator, predictor = build_models(gen_config, disc_config, config)
    opt_g = Adam(generator.parameters(), config.lr_g, config.betas)
    opt_d = Adam(discriminator.parameters(), config.lr_d, config.betas)
    opt_p = Adam(predictor.parameters(), config.lr_adj, config.betas)
    rng = np.random.default_rng([config.seed, 0])
    s = gen_config.mask_size
    result = TrainResult(generator, discriminator, predictor)
    metrics_file = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_file = open(out_dir / "metrics.jsonl", "w")
    lam_cls = config.effective_lambda_cls
    try:
        for step in range(1, config.steps + 1):
            picks = rng.choice(len(dataset), size=min(config.batch_size, len(dataset)), replace=False)
            samples = [dataset[i] for i in sorted(picks)]
            diagrams, batch, real, present = _batch_arrays(samples, s)

            loss_d = 0.0
            for _ in range(config.d_steps):
                noise = rng.standard_normal((batch.num_nodes, gen_config.noise_dim))
                fake = generator.generate_masks(diagrams, noise).data
                opt_d.zero_grad()
                terms = adversarial_losses(discriminator, real, fake, batch, config.lambda_gp, rng,
                                           config.gp_epsilon, accumulate=True)
                loss_d = terms.loss_d
                if lam_cls:
                    cls_real = classification_loss(discriminator(real, batch).type_logits, present)
                    F.scale(cls_real, lam_cls).backward()
                    loss_d += lam_cls * cls_real.item()
                opt_d.step()

            # adjacency predictor: supervised on real layouts
            opt_p.zero_grad()
            targets = padded_distance_targets(diagrams, predictor.max_rooms)
            sup = batched_gcyc_loss(targets, predictor(real, batch))
            if config.lambda_adj_sup:
                F.scale(sup, config.lambda_adj_sup).backward()

            noise = rng.standard_normal((batch.num_nodes, gen_config.noise_dim))
            opt_g.zero_grad()
            total, comps, fake_t = generator_objective(generator, discriminator, predictor, diagrams, noise, config)
            total.backward()
            discriminator.zero_grad()
            opt_g.step()
            opt_p.step()

            record = {"step": step, "loss_d": loss_d, **comps}
            _check_finite({k: v for k, v in record.items() if k != "step"}, step,
                          {"fake_masks": fake_t.data, "real_masks": real}, out_dir)
            result.log.append(record)
            if metrics_file is not None:
                metrics_file.write(json.dumps(record) + "\n")
            if callback is not None:
                callback(record)
            if out_dir is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint_step{step:06d}.json", result.state(),
                                _meta(gen_config, disc_config, config, step))
    finally:
        if metrics_file is not None:
            metrics_file.close()
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint.json", result.state(), _meta(gen_config, disc_config, config, config.steps))
    return result


def _meta(gen_config, disc_config, config, step) -> dict:
    return {"generator": gen_config.to_json(), "discriminator": disc_config.to_json(),
            "train": config.to_json(), "step": step}


def load_trained(path) -> TrainResult:
    """Rebuild the three networks from a training checkpoint."""
    from .autodiff.serialize import load_checkpoint

    state, meta = load_checkpoint(path)
    gen_config = GeneratorConfig.from_json(meta["generator"])
    disc_config = DiscriminatorConfig.from_json(meta["discriminator"])
    config = TrainConfig.from_json(meta["train"])
    generator, discriminator, predictor = build_models(gen_config, disc_config, config)
    for prefix, module in (("generator", generator), ("discriminator", discriminator), ("predictor", predictor)):
        module.load_state_dict({k[len(prefix) + 1:]: v for k, v in state.items() if k.startswith(prefix + ".")})
    return TrainResult(generator, discriminator, predictor)
