import math

import numpy as np
import pytest

from floorgen.autodiff import Tensor, parameter
from floorgen.errors import ConfigurationError
from floorgen.generator import (
    Generator,
    GeneratorConfig,
    desk_generator_config,
    fit_rectangle,
    generate,
    init_node_features,
    masks_to_layout,
    sample_noise,
)
from floorgen.graph import BubbleDiagram, Rect, RoomType, one_hot
from floorgen.layers import (
    ConvMPN,
    GraphBatch,
    GraphTransformerEncoder,
    MPNSettings,
    attention_maps,
    cna,
    gmb,
    gte_residual,
    nna,
    node_attention,
)

gelu = lambda x: 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))  # noqa: E731


def tiny_config(**kw):
    base = dict(noise_dim=6, base_channels=4, mask_size=8, blocks=2, head_channels=(6, 4))
    base.update(kw)
    return GeneratorConfig(**base)


class TestNodeFeatures:
    def test_length_and_type_suffix(self):
        g = BubbleDiagram(["kitchen", "bedroom"], [(0, 1)])
        v = init_node_features(g, seed=3)
        assert v.shape == (2, 138)
        np.testing.assert_array_equal(v[1, 128:], one_hot(RoomType.BEDROOM))

    def test_deterministic_per_seed(self):
        g = BubbleDiagram(["kitchen"])
        assert np.array_equal(init_node_features(g, 5), init_node_features(g, 5))
        assert not np.array_equal(init_node_features(g, 5), init_node_features(g, 6))

    def test_noise_moments(self):
        z = sample_noise(10_000, 128, seed=0)
        assert abs(z.mean()) < 0.03
        assert abs(z.var() - 1.0) < 0.05


class TestExpand:
    def test_shape_and_sharing(self):
        gen = Generator(GeneratorConfig(blocks=1, head_channels=(8, 8)), np.random.default_rng(0))
        v = np.random.default_rng(1).normal(size=(1, 138))
        out = gen.expand_to_volume(np.vstack([v, v]))
        assert out.shape == (2, 16, 8, 8)
        assert np.array_equal(out.data[0], out.data[1])

    def test_zero_input_zero_bias(self):
        gen = Generator(tiny_config(), np.random.default_rng(0))
        out = gen.expand_to_volume(np.zeros((1, 16)))
        assert np.all(out.data == 0.0)


def manual_attention(g, p, card, alpha, heads):
    """Loop-level evaluation on 1-channel volumes flattened to vectors."""
    n = len(g)
    out = np.zeros(n)
    for i in range(n):
        logits = [g[i] * p[j] / math.sqrt(card) for j in range(n)]
        m = max(logits)
        w = [math.exp(v - m) for v in logits]
        z = sum(w)
        out[i] = alpha * heads * sum(w[j] / z * g[j] for j in range(n))
    return out


class TestAttention:
    g = np.array([1.0, 2.0, -1.0, 0.5])
    p = np.array([0.0, 1.0, 0.5, -2.0])

    def test_cna_hand_computation(self):
        out = cna(Tensor(self.g.reshape(1, 2, 2)), Tensor(self.p.reshape(1, 2, 2)), 2, parameter(0.7), heads=2)
        np.testing.assert_allclose(out.data.reshape(-1), manual_attention(self.g, self.p, 2, 0.7, 2),
                                   rtol=1e-12, atol=1e-14)

    def test_nna_mirrors_cna(self):
        out = nna(Tensor(self.p.reshape(1, 2, 2)), Tensor(self.g.reshape(1, 2, 2)), 3, parameter(-0.4), heads=2)
        np.testing.assert_allclose(out.data.reshape(-1), manual_attention(self.p, self.g, 3, -0.4, 2),
                                   rtol=1e-12, atol=1e-14)

    def test_zero_gate_gives_zero(self):
        rng = np.random.default_rng(0)
        out = cna(Tensor(rng.normal(size=(3, 2, 2))), Tensor(rng.normal(size=(3, 2, 2))), 4, parameter(0.0))
        assert np.all(out.data == 0.0)

    def test_empty_neighbourhood_gives_zero(self):
        rng = np.random.default_rng(1)
        out = nna(Tensor(rng.normal(size=(2, 3, 3))), Tensor(np.zeros((2, 3, 3))), 0, parameter(1.0))
        assert np.all(out.data == 0.0)

    def test_rows_are_stochastic(self):
        rng = np.random.default_rng(2)
        maps = attention_maps(Tensor(rng.normal(size=(3, 4, 3, 3))), Tensor(rng.normal(size=(3, 4, 3, 3))),
                              np.array([1.0, 2.0, 5.0]))
        np.testing.assert_allclose(maps[0].data.sum(axis=-1), 1.0, atol=1e-9)

    def test_projected_heads_are_summed(self):
        rng = np.random.default_rng(3)
        q, p = Tensor(rng.normal(size=(1, 2, 2, 2))), Tensor(rng.normal(size=(1, 2, 2, 2)))
        eye = [(Tensor(np.eye(2)), Tensor(np.eye(2)))] * 3
        projected = node_attention(q, p, np.array([1.0]), parameter(1.0), 3, eye)
        plain = node_attention(q, p, np.array([1.0]), parameter(1.0), 3)
        np.testing.assert_allclose(projected.data, plain.data, rtol=1e-12)


class TestResidualAndGMB:
    def test_residual_sum(self):
        rng = np.random.default_rng(0)
        a, b, c = (rng.normal(size=(2, 3, 4, 4)) for _ in range(3))
        out = gte_residual(Tensor(a), Tensor(b), Tensor(c))
        np.testing.assert_allclose(out.data, a + b + c, rtol=0, atol=1e-15)

    def test_zero_input_passes_branches(self):
        b = np.ones((1, 2, 2, 2))
        out = gte_residual(Tensor(np.zeros_like(b)), Tensor(b), Tensor(2 * b))
        np.testing.assert_array_equal(out.data, 3 * b)

    def test_single_node_identity_weight(self):
        x = np.array([-1.5, 0.2, 3.0]).reshape(1, 3, 1, 1)
        out = gmb(Tensor(x), np.array([[1.0]]), Tensor(np.eye(3)))
        np.testing.assert_allclose(out.data.reshape(-1), [gelu(v) for v in x.reshape(-1)], rtol=1e-14)

    def test_two_node_path(self):
        a_hat = GraphBatch.from_diagrams([BubbleDiagram([0, 1], [(0, 1)])]).normalized_adjacency()
        np.testing.assert_allclose(a_hat.sum(axis=1), 1.0, atol=1e-12)
        x = np.array([2.0, -1.0]).reshape(2, 1, 1, 1)
        out = gmb(Tensor(x), a_hat, Tensor(np.array([[0.8]])))
        expected = gelu(0.8 * (0.5 * 2.0 + 0.5 * -1.0))
        np.testing.assert_allclose(out.data.reshape(-1), [expected, expected], rtol=1e-14)


class TestIdentityAtInit:
    def test_gates_start_at_zero(self):
        enc = GraphTransformerEncoder(4, 8, 2, np.random.default_rng(0))
        assert enc.blocks == 8
        assert all(g.data.shape == () and g.data == 0.0 for g in enc.gates)

    @pytest.mark.parametrize("use_gmb", [True, False])
    def test_fusion_returns_input_bitwise(self, use_gmb):
        rng = np.random.default_rng(4)
        g = BubbleDiagram([0, 1, 2, 3], [(0, 1), (1, 2)])
        batch = GraphBatch.from_diagrams([g])
        mpn = ConvMPN(MPNSettings(channels=4, blocks=3, use_gmb=use_gmb), rng)
        x = Tensor(rng.normal(size=(4, 4, 4, 4)))
        pc = Tensor(batch.connected @ x.data.reshape(4, -1)).data.reshape(x.shape)
        pn = Tensor(batch.nonconnected @ x.data.reshape(4, -1)).data.reshape(x.shape)
        norm = batch.normalized_adjacency()
        upd_c = mpn.gte_connected(x, Tensor(pc), batch.card_connected, norm)
        upd_n = mpn.gte_nonconnected(x, Tensor(pn), batch.card_nonconnected, norm)
        fused = gte_residual(x, upd_c, upd_n)
        assert np.array_equal(fused.data, x.data)

    def test_isolated_node_eq4_reduces_to_cnn(self):
        rng = np.random.default_rng(5)
        mpn = ConvMPN(MPNSettings(channels=3, variant="eq4", blocks=2), rng)
        x = Tensor(rng.normal(size=(1, 3, 4, 4)))
        out = mpn(x, GraphBatch.from_diagrams([BubbleDiagram([2])]))
        from floorgen.autodiff import functional as F
        direct = F.leaky_relu(mpn.cnn[1](F.leaky_relu(mpn.cnn[0](x), 0.1)), 0.1)
        assert np.array_equal(out.data, direct.data)


class TestConvMPN:
    @pytest.mark.parametrize("variant", ["eq2", "eq3", "eq4", "transformer"])
    def test_channel_count_preserved(self, variant):
        rng = np.random.default_rng(0)
        mpn = ConvMPN(MPNSettings(channels=16, variant=variant, blocks=1), rng)
        batch = GraphBatch.from_diagrams([BubbleDiagram([0, 1, 2], [(0, 1)])])
        assert mpn(Tensor(rng.normal(size=(3, 16, 4, 4))), batch).shape == (3, 16, 4, 4)

    def test_unknown_variant(self):
        with pytest.raises(ConfigurationError):
            MPNSettings(channels=4, variant="eq7")

    def test_input_widths(self):
        rng = np.random.default_rng(0)
        assert ConvMPN(MPNSettings(channels=16, variant="eq2", blocks=1), rng).cnn[0].weight.shape[1] == 48
        assert ConvMPN(MPNSettings(channels=16, variant="eq4", blocks=1), rng).cnn[0].weight.shape[1] == 16

    def test_graphs_in_a_batch_do_not_mix(self):
        rng = np.random.default_rng(1)
        mpn = ConvMPN(MPNSettings(channels=3, blocks=1), rng)
        for g in mpn.gte_connected.gates + mpn.gte_nonconnected.gates:
            g.data = np.array(0.6)
        a, b = BubbleDiagram([0, 1], [(0, 1)]), BubbleDiagram([2, 3, 4], [(1, 2)])
        xa, xb = rng.normal(size=(2, 3, 4, 4)), rng.normal(size=(3, 3, 4, 4))
        joint = mpn(Tensor(np.concatenate([xa, xb])), GraphBatch.from_diagrams([a, b])).data
        alone = mpn(Tensor(xb), GraphBatch.from_diagrams([b])).data
        np.testing.assert_allclose(joint[2:], alone, rtol=0, atol=1e-12)


class TestGenerator:
    def test_shape_trace_full_size(self):
        cfg = GeneratorConfig(blocks=1, head_channels=(8, 8))
        gen = Generator(cfg, np.random.default_rng(0))
        r = generate(gen, BubbleDiagram([0, 2], [(0, 1)]), seed=0, trace=True)
        assert r.trace["volumes"] == [(2, 16, 8, 8), (2, 16, 16, 16), (2, 16, 32, 32), (2, 16, 32, 32)]
        assert r.masks.shape == (2, 32, 32)
        assert np.all((r.masks >= 0) & (r.masks <= 1))
        assert len(r.trace["attention"]) == 3

    def test_head_channels_default(self):
        gen = Generator(GeneratorConfig(blocks=1), np.random.default_rng(0))
        assert [c.weight.shape[0] for c in gen.head] == [256, 128, 1]

    def test_zero_head_gives_half(self):
        gen = Generator(tiny_config(), np.random.default_rng(0))
        for c in gen.head:
            c.weight.data[:] = 0.0
        r = generate(gen, BubbleDiagram([1]), seed=0)
        assert np.all(r.masks == 0.5)

    def test_deterministic_per_seed(self):
        gen = Generator(tiny_config(), np.random.default_rng(0))
        g = BubbleDiagram([0, 1, 2], [(0, 1), (1, 2)])
        assert np.array_equal(generate(gen, g, seed=4).masks, generate(gen, g, seed=4).masks)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        gen = Generator(tiny_config(), rng)
        for p in gen.parameters():
            if p.data.shape == ():
                p.data = np.array(0.5)
        g = BubbleDiagram([0, 1, 2, 3, 4], [(0, 1), (1, 2), (3, 4), (0, 4)])
        noise = rng.normal(size=(5, 6))
        order = [3, 0, 4, 2, 1]
        base = gen.generate_masks([g], noise).data
        perm = gen.generate_masks([g.permute(order)], noise[order]).data
        np.testing.assert_allclose(perm, base[order], rtol=0, atol=1e-9)

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            GeneratorConfig(mask_size=10)
        with pytest.raises(ConfigurationError):
            GeneratorConfig(conv_mpn_variant="eq9")

    def test_config_json_round_trip(self):
        cfg = desk_generator_config(use_nna=False)
        assert GeneratorConfig.from_json(cfg.to_json()) == cfg


class TestFitRectangle:
    def test_single_pixel(self):
        m = np.zeros((32, 32))
        m[5, 7] = 0.9
        assert fit_rectangle(m) == Rect(7, 5, 7, 5)

    def test_empty_is_none(self):
        assert fit_rectangle(np.full((8, 8), 0.49)) is None

    def test_bounding_box(self):
        m = np.zeros((8, 8))
        m[2, 3] = m[5, 1] = 1.0
        assert fit_rectangle(m, room_type="kitchen") == Rect(1, 2, 3, 5, "kitchen")

    def test_scaled_to_canvas(self):
        m = np.zeros((8, 8))
        m[1, 2] = 1.0
        assert fit_rectangle(m, canvas=32) == Rect(8, 4, 11, 7)

    def test_empty_mask_falls_back_to_peak(self):
        m = np.full((1, 8, 8), 0.1)
        m[0, 6, 6] = 0.3
        assert masks_to_layout(m, [RoomType.BEDROOM]) == [Rect(24, 24, 27, 27, RoomType.BEDROOM)]
