import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floorgen.errors import InputError
from floorgen.evaluation import (
    PALETTE,
    compatibility,
    diversity_proxy,
    evaluate_layouts,
    rasterize,
    read_pnm,
    type_histogram,
    write_pgm,
    write_ppm,
)
from floorgen.graph import BubbleDiagram, Rect, RoomType


def random_layout(rng, n):
    rooms = []
    for _ in range(n):
        x0, x1 = sorted(rng.integers(0, 32, 2))
        y0, y1 = sorted(rng.integers(0, 32, 2))
        rooms.append(Rect(x0, y0, x1, y1, int(rng.integers(10))))
    return rooms


class TestRasterize:
    def test_empty_is_white(self):
        assert np.all(rasterize([]) == 255)

    def test_full_canvas_room(self):
        img = rasterize([Rect(0, 0, 31, 31, RoomType.BATHROOM)])
        assert np.all(img == np.array(PALETTE[RoomType.BATHROOM], dtype=np.uint8))

    def test_smaller_room_on_top(self):
        big = Rect(0, 0, 19, 19, RoomType.LIVING_ROOM)
        small = Rect(10, 10, 24, 24, RoomType.CLOSET)
        for layout in ([big, small], [small, big]):
            img = rasterize(layout)
            assert tuple(img[15, 15]) == PALETTE[RoomType.CLOSET]  # overlap
            assert tuple(img[5, 5]) == PALETTE[RoomType.LIVING_ROOM]
            assert tuple(img[22, 22]) == PALETTE[RoomType.CLOSET]
            assert tuple(img[28, 28]) == (255, 255, 255)

    def test_equal_area_tie_break_by_type(self):
        a = Rect(0, 0, 9, 9, RoomType.KITCHEN)
        b = Rect(5, 5, 14, 14, RoomType.BEDROOM)
        # kitchen (code 1) paints first, bedroom (code 2) overdraws it
        assert tuple(rasterize([a, b])[7, 7]) == PALETTE[RoomType.BEDROOM]
        assert tuple(rasterize([b, a])[7, 7]) == PALETTE[RoomType.BEDROOM]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_order_independent(self, seed):
        rng = np.random.default_rng(seed)
        layout = random_layout(rng, 5)
        perm = list(rng.permutation(5))
        assert np.array_equal(rasterize(layout), rasterize([layout[i] for i in perm]))

    def test_palette_distinct_and_not_white(self):
        assert len(set(PALETTE)) == 10 and (255, 255, 255) not in PALETTE


class TestCompatibility:
    def test_ground_truth_scores_zero(self):
        layout = [Rect(0, 0, 15, 31, "bedroom"), Rect(16, 0, 31, 31, "kitchen")]
        g = BubbleDiagram(["bedroom", "kitchen"], [(0, 1)])
        assert compatibility(g, layout) == 0

    def test_missing_adjacency_costs_one(self):
        layout = [Rect(0, 0, 9, 31, "bedroom"), Rect(20, 0, 31, 31, "kitchen")]
        g = BubbleDiagram(["bedroom", "kitchen"], [(0, 1)])
        assert compatibility(g, layout) == 1

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_invariant_to_room_order(self, seed):
        rng = np.random.default_rng(seed)
        layout = random_layout(rng, 4)
        g = BubbleDiagram([int(t) for t in rng.integers(0, 10, 4)], [(0, 1), (2, 3)])
        perm = list(rng.permutation(4))
        assert compatibility(g, layout) == compatibility(g, [layout[i] for i in perm])

    def test_empty_layout_rejected(self):
        with pytest.raises(InputError):
            compatibility(BubbleDiagram([0]), [])


class TestDiversity:
    def test_identical_is_zero(self):
        img = rasterize([Rect(0, 0, 9, 9, "kitchen")])
        assert diversity_proxy([img, img, img]) == 0.0

    def test_duplication_invariance(self):
        rng = np.random.default_rng(0)
        imgs = [rasterize(random_layout(rng, 3)) for _ in range(4)]
        assert diversity_proxy(imgs + imgs) == pytest.approx(diversity_proxy(imgs), rel=1e-12)

    def test_hand_built_three_rasters(self):
        a = rasterize([Rect(0, 0, 31, 31, "living room")])  # living 100%
        b = rasterize([Rect(0, 0, 31, 15, "kitchen")])  # kitchen 50%, white 50%
        c = rasterize([])  # all white
        # histograms: a = e0, b = 0.5 e1, c = 0
        d_ab = np.sqrt(1 + 0.25)
        d_ac = 1.0
        d_bc = 0.5
        expected = 2 * (d_ab + d_ac + d_bc) / 9  # ordered pairs incl. self-pairs
        assert diversity_proxy([a, b, c]) == pytest.approx(expected, rel=1e-12)

    def test_histogram_bins(self):
        h = type_histogram(rasterize([Rect(0, 0, 7, 31, "balcony")]))
        assert h.shape == (10,)
        assert h[RoomType.BALCONY] == pytest.approx(0.25)

    def test_needs_two(self):
        with pytest.raises(InputError):
            diversity_proxy([rasterize([])])


def test_evaluate_layouts_report():
    g = BubbleDiagram(["bedroom", "kitchen"], [(0, 1)])
    good = [Rect(0, 0, 15, 31, "bedroom"), Rect(16, 0, 31, 31, "kitchen")]
    bad = [Rect(0, 0, 5, 5, "bedroom"), Rect(20, 20, 31, 31, "kitchen")]
    report = evaluate_layouts([g, g, g], [good, bad, good])
    assert report.compatibility == [0, 1, 0]
    assert report.mean_compatibility == pytest.approx(1 / 3)
    assert report.median_compatibility == 0
    doc = report.to_json()
    assert "not comparable to FID" in doc["diversity_note"]
    with pytest.raises(InputError):
        evaluate_layouts([g], [good, bad])


def test_pnm_round_trip(tmp_path):
    img = rasterize([Rect(3, 4, 20, 9, "corridor")])
    write_ppm(tmp_path / "a.ppm", img)
    assert np.array_equal(read_pnm(tmp_path / "a.ppm"), img)
    mask = np.linspace(0, 1, 64).reshape(8, 8)
    write_pgm(tmp_path / "m.pgm", mask)
    assert np.array_equal(read_pnm(tmp_path / "m.pgm"), np.round(mask * 255).astype(np.uint8))
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n32 32\n255\n")


def test_pairwise_mean_direct():
    rng = np.random.default_rng(5)
    imgs = [rasterize(random_layout(rng, 2)) for _ in range(3)]
    hs = [type_histogram(i) for i in imgs]
    direct = np.mean([np.linalg.norm(a - b) for a, b in itertools.product(hs, hs)])
    assert diversity_proxy(imgs) == pytest.approx(direct, rel=1e-12)
