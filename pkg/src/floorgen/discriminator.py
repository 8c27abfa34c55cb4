"""Node-classification discriminator over graphs of room masks."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .autodiff import Conv2d, Linear, Module, Tensor
from .autodiff import functional as F
from .errors import ConfigurationError, InputError
from .graph import NUM_ROOM_TYPES
from .layers import LEAK, ConvMPN, GraphBatch, MPNSettings


@dataclass(frozen=True)
class DiscriminatorConfig:
    mask_size: int = 32
    type_channels: int = 8
    channels: int = 16
    vector_dim: int = 128
    use_attention: bool = True
    use_classifier: bool = True
    blocks: int = 8
    heads: int = 2
    seed: int = 1

    def __post_init__(self):
        if min(self.mask_size, self.type_channels, self.channels, self.vector_dim, self.blocks, self.heads) <= 0:
            raise ConfigurationError("discriminator dimensions must be positive")
        if self.mask_size % 4:
            raise ConfigurationError("mask_size must be divisible by 4 (two 2x downsamplings)")

    def mpn_settings(self) -> MPNSettings:
        return MPNSettings(
            channels=self.channels,
            variant="eq2",
            use_cna=self.use_attention,
            use_nna=self.use_attention,
            use_gmb=self.use_attention,
            blocks=self.blocks,
            heads=self.heads,
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "DiscriminatorConfig":
        return cls(**doc)


def desk_discriminator_config(**overrides) -> DiscriminatorConfig:
    base = DiscriminatorConfig(mask_size=8, type_channels=4, channels=8, vector_dim=32, blocks=1)
    return replace(base, **overrides)


class DiscriminatorOutput(NamedTuple):
    realism: Tensor  # (num_graphs,)
    type_logits: Tensor  # (num_graphs, 10)
    room_vectors: Tensor  # (N, vector_dim)


class Discriminator(Module):
    def __init__(self, config: DiscriminatorConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        s, c, tc = config.mask_size, config.channels, config.type_channels
        self.type_linear = Linear(NUM_ROOM_TYPES, tc * s * s, rng)
        self.embed = [Conv2d(tc + 1, c, rng), Conv2d(c, c, rng), Conv2d(c, c, rng)]
        settings = config.mpn_settings()
        self.mpn = [ConvMPN(settings, rng) for _ in range(2)]
        # k=4, pad=1, stride=2 halves the spatial size exactly
        self.downsample = [Conv2d(c, c, rng, k=4, stride=2, pad=1) for _ in range(2)]
        widths = [c, 2 * c, 4 * c, config.vector_dim]
        self.encode = []
        size = s // 4
        for c_in, c_out in zip(widths[:-1], widths[1:]):
            if size >= 2:
                self.encode.append(Conv2d(c_in, c_out, rng, k=4, stride=2, pad=1))
                size //= 2
            else:
                self.encode.append(Conv2d(c_in, c_out, rng))
        v = config.vector_dim
        self.realism_head = Linear(v, 1, rng)
        self.class_head = Linear(v, NUM_ROOM_TYPES, rng)

    def type_volume(self, types: np.ndarray) -> Tensor:
        """One-hot room types expanded to ``(N, type_channels, S, S)``."""
        s, tc = self.config.mask_size, self.config.type_channels
        onehot = np.zeros((len(types), NUM_ROOM_TYPES))
        onehot[np.arange(len(types)), np.asarray(types, dtype=np.int64)] = 1.0
        return F.reshape(self.type_linear(Tensor(onehot)), (len(types), tc, s, s))

    def embed_room(self, masks, types: np.ndarray) -> Tensor:
        """Mask plus type volume through the shared three-layer CNN: ``(N, C, S, S)``."""
        masks = masks if isinstance(masks, Tensor) else Tensor(masks)
        n, s, _ = masks.shape
        x = F.concat([F.reshape(masks, (n, 1, s, s)), self.type_volume(types)], axis=1)
        for conv in self.embed:
            x = F.leaky_relu(conv(x), LEAK)
        return x

    def forward(self, masks, batch: GraphBatch) -> DiscriminatorOutput:
        masks = masks if isinstance(masks, Tensor) else Tensor(masks)
        if masks.shape[0] != batch.num_nodes:
            raise InputError(f"{masks.shape[0]} masks for {batch.num_nodes} rooms")
        if masks.shape[1:] != (self.config.mask_size, self.config.mask_size):
            raise InputError(f"masks must be {self.config.mask_size}x{self.config.mask_size}, got {masks.shape[1:]}")
        x = self.embed_room(masks, batch.types)
        for mpn, down in zip(self.mpn, self.downsample):
            x = mpn(x, batch)
            x = F.leaky_relu(down(x), LEAK)
        for conv in self.encode:
            x = F.leaky_relu(conv(x), LEAK)
        vectors = F.sum(F.reshape(x, (x.shape[0], x.shape[1], -1)), axis=2)
        pooled = F.matmul(batch.membership(), vectors)
        realism = F.reshape(self.realism_head(pooled), (batch.num_graphs,))
        logits = self.class_head(pooled)
        return DiscriminatorOutput(realism, logits, vectors)


def classification_loss(type_logits: Tensor, present_types) -> Tensor:
    """Mean binary cross-entropy between type logits and the multi-hot target."""
    present = np.asarray(present_types, dtype=np.float64)
    if type_logits.shape[-1] != NUM_ROOM_TYPES or present.shape != type_logits.shape:
        raise InputError(f"classification needs {NUM_ROOM_TYPES}-wide logits and targets, got "
                         f"{type_logits.shape} and {present.shape}")
    return F.bce_with_logits(type_logits, present)


def discriminate(discriminator: Discriminator, masks, types, g) -> DiscriminatorOutput:
    """Score a single diagram's masks."""
    if not (len(masks) == len(types) == len(g.nodes)):
        raise InputError(f"count mismatch: {len(masks)} masks, {len(types)} types, {len(g.nodes)} nodes")
    if [int(t) for t in types] != [int(t) for t in g.nodes]:
        raise InputError("types must match the diagram's node types")
    return discriminator(masks, GraphBatch.from_diagrams([g]))
