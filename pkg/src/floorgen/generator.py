"""Graph-Transformer generator: noise + room types in, one room mask per node out."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .autodiff import Conv2d, ConvTranspose2d, Linear, Module, Tensor
from .autodiff import functional as F
from .errors import ConfigurationError
from .graph import CANVAS, NUM_ROOM_TYPES, BubbleDiagram, Rect, RoomType, one_hot
from .layers import LEAK, ConvMPN, GraphBatch, MPNSettings


@dataclass(frozen=True)
class GeneratorConfig:
    noise_dim: int = 128
    room_type_dim: int = NUM_ROOM_TYPES
    base_channels: int = 16
    mask_size: int = 32
    heads: int = 2
    conv_mpn_variant: str = "eq2"
    use_cna: bool = True
    use_nna: bool = True
    use_gmb: bool = True
    blocks: int = 8
    head_channels: tuple[int, int] = (256, 128)
    use_projections: bool = False
    share_branch_weights: bool = False
    seed: int = 0

    def __post_init__(self):
        if min(self.noise_dim, self.base_channels, self.mask_size, self.heads, self.blocks) <= 0:
            raise ConfigurationError("generator dimensions must be positive")
        if self.room_type_dim != NUM_ROOM_TYPES:
            raise ConfigurationError(f"room_type_dim must be {NUM_ROOM_TYPES}")
        if self.mask_size % 4:
            raise ConfigurationError("mask_size must be divisible by 4 (two 2x upsamplings)")
        if CANVAS % self.mask_size:
            raise ConfigurationError(f"mask_size must divide the {CANVAS}-pixel canvas")
        # validates the variant name
        self.mpn_settings()

    @property
    def input_dim(self) -> int:
        return self.noise_dim + self.room_type_dim

    @property
    def initial_size(self) -> int:
        return self.mask_size // 4

    def mpn_settings(self) -> MPNSettings:
        return MPNSettings(
            channels=self.base_channels,
            variant=self.conv_mpn_variant,
            use_cna=self.use_cna,
            use_nna=self.use_nna,
            use_gmb=self.use_gmb,
            blocks=self.blocks,
            heads=self.heads,
            use_projections=self.use_projections,
            share_branch_weights=self.share_branch_weights,
        )

    def to_json(self) -> dict:
        d = asdict(self)
        d["head_channels"] = list(self.head_channels)
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "GeneratorConfig":
        doc = dict(doc)
        if "head_channels" in doc:
            doc["head_channels"] = tuple(doc["head_channels"])
        return cls(**doc)


def desk_generator_config(**overrides) -> GeneratorConfig:
    """Shrunken dimensions that train in minutes on one CPU core."""
    base = GeneratorConfig(noise_dim=16, base_channels=8, mask_size=8, blocks=1, head_channels=(32, 16))
    return replace(base, **overrides)


def sample_noise(num_nodes: int, noise_dim: int, seed) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((num_nodes, noise_dim))


def init_node_features(g: BubbleDiagram, seed, noise_dim: int = 128, noise: Optional[np.ndarray] = None) -> np.ndarray:
    """Per node: ``noise_dim`` standard-normal draws followed by the one-hot room type."""
    if noise is None:
        noise = sample_noise(len(g.nodes), noise_dim, seed)
    types = np.stack([one_hot(t) for t in g.nodes]) if g.nodes else np.zeros((0, NUM_ROOM_TYPES))
    return np.concatenate([noise, types], axis=1)


class Generator(Module):
    def __init__(self, config: GeneratorConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        c, s0 = config.base_channels, config.initial_size
        self.expand = Linear(config.input_dim, c * s0 * s0, rng)
        settings = config.mpn_settings()
        self.mpn = [ConvMPN(settings, rng) for _ in range(3)]
        self.upsample = [ConvTranspose2d(c, c, rng) for _ in range(2)]
        h1, h2 = config.head_channels
        self.head = [Conv2d(c, h1, rng), Conv2d(h1, h2, rng), Conv2d(h2, 1, rng)]

    def expand_to_volume(self, features) -> Tensor:
        """Shared linear map from node vectors to ``C x s0 x s0`` volumes."""
        features = features if isinstance(features, Tensor) else Tensor(np.atleast_2d(features))
        c, s0 = self.config.base_channels, self.config.initial_size
        return F.reshape(self.expand(features), (features.shape[0], c, s0, s0))

    def generation_head(self, volume: Tensor) -> Tensor:
        """Three convolutions down to one channel, then a sigmoid: ``(N, S, S)`` masks."""
        h = F.leaky_relu(self.head[0](volume), LEAK)
        h = F.leaky_relu(self.head[1](h), LEAK)
        out = F.sigmoid(self.head[2](h))
        return F.reshape(out, (out.shape[0], out.shape[2], out.shape[3]))

    def forward(self, features, batch: GraphBatch, trace: Optional[dict] = None) -> Tensor:
        x = self.expand_to_volume(features)
        for level in range(3):
            if trace is not None:
                trace.setdefault("volumes", []).append(x.shape)
            rec = trace.setdefault("attention", [{} for _ in range(3)])[level] if trace is not None else None
            x = self.mpn[level](x, batch, rec)
            if level < 2:
                x = F.leaky_relu(self.upsample[level](x), LEAK)
        if trace is not None:
            trace["volumes"].append(x.shape)
        masks = self.generation_head(x)
        if trace is not None:
            trace["masks"] = masks.shape
        return masks

    def generate_masks(self, diagrams: Sequence[BubbleDiagram], noise: np.ndarray, trace: Optional[dict] = None) -> Tensor:
        batch = GraphBatch.from_diagrams(diagrams)
        types = np.zeros((batch.num_nodes, NUM_ROOM_TYPES))
        types[np.arange(batch.num_nodes), batch.types] = 1.0
        return self.forward(np.concatenate([noise, types], axis=1), batch, trace)


def fit_rectangle(mask: np.ndarray, threshold: float = 0.5, room_type=RoomType.UNKNOWN,
                  canvas: Optional[int] = None) -> Optional[Rect]:
    """Tightest box around pixels ``>= threshold``; ``None`` when no pixel qualifies.

    With ``canvas`` set, mask pixels are scaled up to canvas pixels.
    """
    mask = np.asarray(mask)
    rows, cols = np.nonzero(mask >= threshold)
    if rows.size == 0:
        return None
    f = 1 if canvas is None else canvas // mask.shape[0]
    return Rect(cols.min() * f, rows.min() * f, (cols.max() + 1) * f - 1, (rows.max() + 1) * f - 1, room_type)


@dataclass
class GenerationResult:
    rooms: list[Rect]
    masks: np.ndarray
    trace: dict = field(default_factory=dict)


def masks_to_layout(masks: np.ndarray, types: Sequence, threshold: float = 0.5) -> list[Rect]:
    """One rectangle per mask; an empty mask falls back to its peak pixel."""
    rooms = []
    for m, t in zip(masks, types):
        r = fit_rectangle(m, threshold, t, canvas=CANVAS)
        if r is None:
            peak = np.zeros_like(m)
            peak[np.unravel_index(np.argmax(m), m.shape)] = 1.0
            r = fit_rectangle(peak, 0.5, t, canvas=CANVAS)
        rooms.append(r)
    return rooms


def generate(generator: Generator, g: BubbleDiagram, seed=0, noise: Optional[np.ndarray] = None,
             trace: bool = False) -> GenerationResult:
    """Masks and fitted rectangles for one diagram; deterministic per seed."""
    if noise is None:
        noise = sample_noise(len(g.nodes), generator.config.noise_dim, seed)
    tr: Optional[dict] = {} if trace else None
    masks = generator.generate_masks([g], noise, tr).data
    return GenerationResult(masks_to_layout(masks, g.nodes), masks, tr or {})
