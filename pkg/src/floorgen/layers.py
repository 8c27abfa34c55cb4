"""Graph message passing over per-room feature volumes.

Several graphs are processed at once by stacking their rooms along the node
axis; block-diagonal connectivity matrices keep graphs from mixing. Volumes
are ``(N, C, H, W)`` tensors. For attention a volume is viewed as an
``(H*W) x C`` matrix, so attention maps are ``(H*W) x (H*W)`` per node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .autodiff import Conv2d, Module, Tensor, parameter
from .autodiff import functional as F
from .autodiff.nn import kaiming_uniform
from .errors import ConfigurationError, DimensionError
from .graph import BubbleDiagram

VARIANTS = ("eq2", "eq3", "eq4", "transformer")
LEAK = 0.1


@dataclass(frozen=True)
class GraphBatch:
    """Connectivity of one or more diagrams stacked node-wise."""

    types: np.ndarray  # (N,) room-type codes
    graph_index: np.ndarray  # (N,) which diagram each node belongs to
    connected: np.ndarray  # (N, N) 0/1 adjacency
    nonconnected: np.ndarray  # (N, N) same diagram, not adjacent, not self
    num_graphs: int

    @classmethod
    def from_diagrams(cls, diagrams: Sequence[BubbleDiagram]) -> "GraphBatch":
        sizes = [len(d.nodes) for d in diagrams]
        n = sum(sizes)
        conn = np.zeros((n, n))
        same = np.zeros((n, n))
        index = np.zeros(n, dtype=np.int64)
        types = np.zeros(n, dtype=np.int64)
        start = 0
        for gi, (d, size) in enumerate(zip(diagrams, sizes)):
            sl = slice(start, start + size)
            conn[sl, sl] = d.adjacency()
            same[sl, sl] = 1.0
            index[sl] = gi
            types[sl] = [int(t) for t in d.nodes]
            start += size
        non = same - conn - np.eye(n)
        return cls(types, index, conn, non, len(diagrams))

    @property
    def num_nodes(self) -> int:
        return len(self.types)

    @property
    def card_connected(self) -> np.ndarray:
        return self.connected.sum(axis=1)

    @property
    def card_nonconnected(self) -> np.ndarray:
        return self.nonconnected.sum(axis=1)

    def normalized_adjacency(self) -> np.ndarray:
        """Row-normalized ``A + I``."""
        a = self.connected + np.eye(self.num_nodes)
        return a / a.sum(axis=1, keepdims=True)

    def membership(self) -> np.ndarray:
        """``(num_graphs, N)`` indicator used for per-graph sum pooling."""
        m = np.zeros((self.num_graphs, self.num_nodes))
        m[self.graph_index, np.arange(self.num_nodes)] = 1.0
        return m

    def slices(self) -> list[slice]:
        out = []
        for g in range(self.num_graphs):
            idx = np.flatnonzero(self.graph_index == g)
            out.append(slice(int(idx[0]), int(idx[-1]) + 1) if len(idx) else slice(0, 0))
        return out


def mix_nodes(x: Tensor, weights: np.ndarray) -> Tensor:
    """``out[n] = sum_m weights[n, m] * x[m]`` for volumes ``x`` of shape (N, ...)."""
    shape = x.shape
    flat = F.reshape(x, (shape[0], -1))
    return F.reshape(F.matmul(weights, flat), shape)


def pool(x: Tensor, members: np.ndarray) -> Tensor:
    """Sum-pool neighbor volumes; an empty neighbor set gives the zero volume."""
    return mix_nodes(x, members)


def _as_rows(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    return F.transpose(F.reshape(x, (n, c, h * w)), (0, 2, 1))


def _from_rows(x: Tensor, shape) -> Tensor:
    n, c, h, w = shape
    return F.reshape(F.transpose(x, (0, 2, 1)), (n, c, h, w))


def attention_maps(query: Tensor, pooled: Tensor, card: np.ndarray,
                   projections: Optional[Sequence[tuple[Tensor, Tensor]]] = None, heads: int = 1) -> list[Tensor]:
    """Row-stochastic ``(N, HW, HW)`` maps ``softmax(q p^T / sqrt(card))``, one per head.

    Without projections every head sees the raw features, so a single map is
    returned and reused for all heads.
    """
    q = _as_rows(query)
    p = _as_rows(pooled)
    inv = 1.0 / np.sqrt(np.maximum(card, 1.0))
    inv = inv.reshape(-1, 1, 1)
    maps = []
    pairs = projections if projections else [(None, None)]
    for wq, wk in pairs:
        qh = q if wq is None else F.matmul(q, wq)
        ph = p if wk is None else F.matmul(p, wk)
        logits = F.mul(F.matmul(qh, F.transpose(ph, (0, 2, 1))), inv)
        maps.append(F.softmax(logits, axis=-1))
    return maps


def node_attention(query: Tensor, pooled: Tensor, card: np.ndarray, gate: Tensor, heads: int,
                   projections: Optional[Sequence[tuple[Tensor, Tensor]]] = None,
                   record: Optional[list] = None) -> Tensor:
    """Gated multi-head attention of each node over its pooled neighbor volume.

    Returns ``gate * sum_heads(Att_h @ query)`` per node, and exactly zero for
    nodes whose neighbor set is empty.
    """
    if query.shape != pooled.shape:
        raise DimensionError(f"attention operands differ: {query.shape} vs {pooled.shape}")
    maps = attention_maps(query, pooled, card, projections, heads)
    if record is not None:
        record.append([m.data.copy() for m in maps])
    q = _as_rows(query)
    if projections:
        out = F.add_n([F.matmul(m, q) for m in maps])
    else:
        out = F.scale(F.matmul(maps[0], q), heads)
    present = (np.asarray(card) > 0).astype(np.float64).reshape(-1, 1, 1)
    out = F.mul(F.mul(out, present), gate)
    return _from_rows(out, query.shape)


def cna(g_r: Tensor, pooled_connected: Tensor, card: int, alpha: Tensor, heads: int = 2) -> Tensor:
    """Connected-node attention for one ``C x H x W`` volume."""
    out = node_attention(F.reshape(g_r, (1,) + g_r.shape), F.reshape(pooled_connected, (1,) + pooled_connected.shape),
                         np.array([card], dtype=float), alpha, heads)
    return F.reshape(out, g_r.shape)


def nna(g_r: Tensor, pooled_nonconnected: Tensor, card: int, beta: Tensor, heads: int = 2) -> Tensor:
    """Non-connected-node attention; same computation, gated by ``beta``."""
    return cna(g_r, pooled_nonconnected, card, beta, heads)


def gte_residual(g_r: Tensor, cna_out: Optional[Tensor], nna_out: Optional[Tensor]) -> Tensor:
    """Fuse the input volume with both attention branches by elementwise sum."""
    terms = [g_r] + [t for t in (cna_out, nna_out) if t is not None]
    if len(terms) == 1:
        return g_r
    return F.add_n(terms)


def gmb(nodes: Tensor, norm_adj: np.ndarray, weight: Tensor) -> Tensor:
    """Graph convolution ``GeLU(A_hat X P)`` applied at every spatial position."""
    n, c, h, w = nodes.shape
    if weight.shape != (c, c):
        raise DimensionError(f"GMB weight must be {c}x{c}, got {weight.shape}")
    mixed = mix_nodes(nodes, norm_adj)
    rows = _as_rows(mixed)
    return _from_rows(F.gelu(F.matmul(rows, weight)), (n, c, h, w))


class GraphTransformerEncoder(Module):
    """Stack of ``blocks`` (node attention, graph modeling) pairs for one branch.

    The stack produces the branch's additive update: it starts from zero and
    each block adds ``gate_b * sum_heads(Att(g + update, pooled) @ (g + update))``
    and then passes the update through the block's GMB. With every gate at its
    initial value 0 the update stays exactly zero.
    """

    def __init__(self, channels: int, blocks: int, heads: int, rng: np.random.Generator,
                 use_gmb: bool = True, use_projections: bool = False):
        self.heads = heads
        self.use_gmb = use_gmb
        self.gates = [parameter(np.zeros(())) for _ in range(blocks)]
        self.gmb_weights = [parameter(kaiming_uniform(rng, (channels, channels), channels)) for _ in range(blocks)] \
            if use_gmb else []
        self.projections = []
        if use_projections:
            for _ in range(blocks):
                self.projections.append([
                    parameter(kaiming_uniform(rng, (channels, channels), channels)) for _ in range(2 * heads)
                ])

    @property
    def blocks(self) -> int:
        return len(self.gates)

    def forward(self, g: Tensor, pooled: Tensor, card: np.ndarray, norm_adj: np.ndarray,
                record: Optional[list] = None) -> Tensor:
        update = None
        for b, gate in enumerate(self.gates):
            query = g if update is None else F.add(g, update)
            proj = None
            if self.projections:
                ws = self.projections[b]
                proj = [(ws[2 * h], ws[2 * h + 1]) for h in range(self.heads)]
            att = node_attention(query, pooled, card, gate, self.heads, proj, record)
            update = att if update is None else F.add(update, att)
            if self.use_gmb:
                update = gmb(update, norm_adj, self.gmb_weights[b])
        return update


@dataclass(frozen=True)
class MPNSettings:
    channels: int
    variant: str = "eq2"
    use_cna: bool = True
    use_nna: bool = True
    use_gmb: bool = True
    blocks: int = 8
    heads: int = 2
    use_projections: bool = False
    share_branch_weights: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown Conv-MPN variant {self.variant!r}; expected one of {VARIANTS}")
        if self.channels <= 0 or self.blocks <= 0 or self.heads <= 0:
            raise ConfigurationError("channels, blocks and heads must be positive")


class ConvMPN(Module):
    """One round of convolutional message passing with graph-Transformer branches."""

    def __init__(self, settings: MPNSettings, rng: np.random.Generator):
        self.settings = settings
        c = settings.channels
        make = lambda: GraphTransformerEncoder(c, settings.blocks, settings.heads, rng, settings.use_gmb,  # noqa: E731
                                               settings.use_projections)
        self.gte_connected = make() if settings.use_cna else None
        if settings.use_nna:
            shared = settings.share_branch_weights and self.gte_connected is not None
            self.gte_nonconnected = None if shared else make()
        else:
            self.gte_nonconnected = None
        if settings.variant == "transformer":
            self.ffn = [Conv2d(c, 2 * c, rng, k=1), Conv2d(2 * c, c, rng, k=1)]
        else:
            c_in = c if settings.variant == "eq4" else 3 * c
            self.cnn = [Conv2d(c_in, 2 * c, rng), Conv2d(2 * c, c, rng)]

    def _branch_nonconnected(self):
        if not self.settings.use_nna:
            return None
        if self.gte_nonconnected is None:
            return self.gte_connected
        return self.gte_nonconnected

    def forward(self, x: Tensor, batch: GraphBatch, record: Optional[dict] = None) -> Tensor:
        s = self.settings
        norm_adj = batch.normalized_adjacency()
        pooled_c = pool(x, batch.connected)
        pooled_n = pool(x, batch.nonconnected)
        rec_c = record.setdefault("connected", []) if record is not None else None
        rec_n = record.setdefault("nonconnected", []) if record is not None else None
        gte_c = self.gte_connected(x, pooled_c, batch.card_connected, norm_adj, rec_c) if s.use_cna else None
        branch_n = self._branch_nonconnected()
        gte_n = branch_n(x, pooled_n, batch.card_nonconnected, norm_adj, rec_n) if branch_n is not None else None

        if s.variant == "transformer":
            h = gte_residual(x, gte_c, gte_n)
            ff = F.leaky_relu(self.ffn[0](h), LEAK)
            return F.add(h, self.ffn[1](ff))
        if s.variant == "eq2":
            fused = gte_residual(x, gte_c, gte_n)
            inp = F.concat([fused, pooled_c, pooled_n], axis=1)
        elif s.variant == "eq3":
            terms = [t for t in (gte_c, gte_n) if t is not None]
            fused = F.add_n(terms) if terms else Tensor(np.zeros(x.shape))
            inp = F.concat([fused, pooled_c, pooled_n], axis=1)
        else:
            inp = gte_residual(x, gte_c, gte_n)
        h = F.leaky_relu(self.cnn[0](inp), LEAK)
        return F.leaky_relu(self.cnn[1](h), LEAK)
