import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reducemt.errors import InputDomainError
from reducemt.imagery import (
    BBox,
    BitMask,
    Raster,
    mask_count,
    mask_from_boxes,
    mask_intersection_count,
    mask_union_count,
    remove_included_boxes,
)


def brute_union_count(boxes, width, height):
    return sum(
        1
        for x, y in itertools.product(range(width), range(height))
        if any(b.x0 <= x < b.x1 and b.y0 <= y < b.y1 for b in boxes)
    )


def test_mask_from_one_box():
    m = mask_from_boxes([BBox(0, 0, 2, 2)], 4, 4)
    assert mask_count(m) == 4


def test_mask_from_overlapping_boxes_matches_enumeration():
    boxes = [BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)]
    expected = brute_union_count(boxes, 4, 4)
    assert expected == 7
    assert mask_count(mask_from_boxes(boxes, 4, 4)) == expected


def test_mask_from_no_boxes_is_empty():
    assert mask_count(mask_from_boxes([], 4, 4)) == 0


def test_mask_from_out_of_bounds_box_names_it():
    with pytest.raises(InputDomainError, match=r"\[2, 2, 5, 3\]"):
        mask_from_boxes([BBox(2, 2, 5, 3)], 4, 4)


def test_mask_count_examples():
    assert mask_count(BitMask.zeros(3, 3)) == 0
    assert mask_count(BitMask.ones(3, 3)) == 9
    checker = (np.add.outer(np.arange(4), np.arange(4)) % 2).astype(bool)
    assert mask_count(BitMask(checker)) == 8


def _halves():
    left = np.zeros((4, 4), bool)
    left[:, :2] = True
    top = np.zeros((4, 4), bool)
    top[:2, :] = True
    return BitMask(left), BitMask(top)


def test_intersection_and_union_of_halves():
    left, top = _halves()
    assert mask_intersection_count(left, top) == 4
    assert mask_union_count(left, top) == 12
    assert mask_intersection_count(left, left) == mask_count(left)
    assert mask_union_count(left, left) == mask_count(left)


def test_disjoint_masks():
    a = mask_from_boxes([BBox(0, 0, 2, 4)], 4, 4)
    b = mask_from_boxes([BBox(2, 0, 4, 4)], 4, 4)
    assert mask_intersection_count(a, b) == 0
    assert mask_union_count(a, b) == mask_count(a) + mask_count(b)


def test_dimension_mismatch():
    with pytest.raises(InputDomainError):
        mask_intersection_count(BitMask.zeros(3, 3), BitMask.zeros(4, 3))
    with pytest.raises(InputDomainError):
        mask_union_count(BitMask.zeros(3, 3), BitMask.zeros(3, 4))


masks_2d = st.tuples(st.integers(1, 12), st.integers(1, 12)).flatmap(
    lambda hw: st.tuples(
        st.lists(st.booleans(), min_size=hw[0] * hw[1], max_size=hw[0] * hw[1]),
        st.lists(st.booleans(), min_size=hw[0] * hw[1], max_size=hw[0] * hw[1]),
        st.just(hw),
    )
)


@settings(max_examples=200, deadline=None)
@given(masks_2d)
def test_inclusion_exclusion_against_brute_force(data):
    a_bits, b_bits, (h, w) = data
    a = BitMask(np.array(a_bits).reshape(h, w))
    b = BitMask(np.array(b_bits).reshape(h, w))
    inter = sum(1 for x, y in zip(a_bits, b_bits) if x and y)
    union = sum(1 for x, y in zip(a_bits, b_bits) if x or y)
    assert mask_intersection_count(a, b) == inter
    assert mask_union_count(a, b) == union
    assert mask_union_count(a, b) + mask_intersection_count(a, b) == mask_count(a) + mask_count(b)
    assert mask_intersection_count(a, a) == mask_count(a)


boxes_8x8 = st.lists(
    st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(1, 8), st.integers(1, 8))
    .filter(lambda t: t[0] < t[2] and t[1] < t[3])
    .map(lambda t: BBox(*t)),
    max_size=6,
)


@settings(max_examples=200, deadline=None)
@given(boxes_8x8)
def test_union_bounded_by_total_area(boxes):
    count = mask_count(mask_from_boxes(boxes, 8, 8))
    assert count == brute_union_count(boxes, 8, 8)
    total = sum(b.area for b in boxes)
    disjoint = all(
        max(a.x0, b.x0) >= min(a.x1, b.x1) or max(a.y0, b.y0) >= min(a.y1, b.y1)
        for a, b in itertools.combinations(boxes, 2)
    )
    assert count <= total
    assert (count == total) == disjoint


class TestRemoveIncludedBoxes:
    def test_larger_of_nested_pair_dropped(self):
        assert remove_included_boxes([BBox(0, 0, 50, 50), BBox(10, 10, 20, 20)]) == [BBox(10, 10, 20, 20)]

    def test_overlapping_non_nested_kept(self):
        boxes = [BBox(0, 0, 10, 10), BBox(5, 5, 15, 15)]
        assert remove_included_boxes(boxes) == boxes

    def test_duplicates_keep_first(self):
        a, b = BBox(1, 1, 4, 4), BBox(1, 1, 4, 4)
        out = remove_included_boxes([a, b])
        assert len(out) == 1 and out[0] is a

    def test_chain_keeps_innermost(self):
        boxes = [BBox(0, 0, 30, 30), BBox(5, 5, 25, 25), BBox(10, 10, 12, 12), BBox(40, 40, 45, 45)]
        assert remove_included_boxes(boxes) == [BBox(10, 10, 12, 12), BBox(40, 40, 45, 45)]

    @settings(max_examples=200, deadline=None)
    @given(boxes_8x8)
    def test_no_containment_survives_and_output_is_subset(self, boxes):
        out = remove_included_boxes(boxes)
        assert all(any(o is b for b in boxes) for o in out)
        for a, b in itertools.permutations(out, 2):
            assert not a.contains(b)
        order = [next(i for i, b in enumerate(boxes) if b is o) for o in out]
        assert order == sorted(order)


class TestBBox:
    def test_degenerate_rejected(self):
        with pytest.raises(InputDomainError):
            BBox(0, 0, 0, 0)
        with pytest.raises(InputDomainError):
            BBox(3, 0, 2, 4)

    def test_iou(self):
        assert BBox(0, 0, 2, 2).iou(BBox(0, 0, 2, 2)) == 1.0
        assert BBox(0, 0, 2, 2).iou(BBox(1, 0, 3, 2)) == pytest.approx(1 / 3)


class TestSerialization:
    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = Raster(rng.integers(0, 256, (7, 9, 3), dtype=np.uint8))
        path = tmp_path / "x.png"
        img.save_png(path)
        back = Raster.from_png(path)
        assert back == img
        assert (back.width, back.height) == (9, 7)

    def test_png_alpha_discarded(self, tmp_path):
        from PIL import Image

        rgba = np.zeros((2, 3, 4), np.uint8)
        rgba[..., 0] = 200
        rgba[..., 3] = 10
        Image.fromarray(rgba, "RGBA").save(tmp_path / "a.png")
        back = Raster.from_png(tmp_path / "a.png")
        assert back.pixels.shape == (2, 3, 3)
        assert (back.pixels[..., 0] == 200).all()

    def test_pbm_round_trip(self):
        rng = np.random.default_rng(0)
        m = BitMask(rng.random((5, 11)) > 0.5)
        data = m.to_pbm()
        assert data.startswith(b"P4\n11 5\n")
        assert BitMask.from_pbm(data) == m

    def test_values_are_immutable(self):
        img = Raster.filled(2, 2, (1, 2, 3))
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 9
        m = BitMask.zeros(2, 2)
        with pytest.raises(ValueError):
            m.bits[0, 0] = True

    def test_raster_shape_validation(self):
        with pytest.raises(InputDomainError):
            Raster(np.zeros((0, 4, 3), np.uint8))
        with pytest.raises(InputDomainError):
            Raster(np.zeros((4, 4), np.uint8))
