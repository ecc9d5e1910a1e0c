import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from compose_motion.decouple import (FILL_VALUE, AttentionMap, RegionGrid, RegionMask, apply_mask, attention_map,
                                     decouple_composite, region_average, top_fraction_mask)
from compose_motion.energy import energy_from_parts
from compose_motion.render import CameraConfig, render_frame
from compose_motion.skeleton import NEUTRAL_POSE

STANDING = NEUTRAL_POSE - NEUTRAL_POSE[0]


def one_joint(pix, e=1.0, shape=(32, 32)):
    return attention_map(np.array([pix], dtype=float), np.array([e]), shape)


def test_inverse_square_and_clamp():
    a = one_joint((10, 10)).values
    assert a[12, 10] == 0.25
    assert a[10, 10] == 1.0
    assert one_joint((10, 10)).values[10, 10] == 1.0
    wide = attention_map(np.array([[10.0, 10.0]]), np.array([1.0]), (32, 32), eps_pix=2.0).values
    assert wide[10, 10] == 0.25 and wide[10, 11] == 0.25


def test_two_joint_superposition():
    a = attention_map(np.array([[10.0, 10.0], [10.0, 13.0]]), np.array([1.0, 1.0]), (32, 32)).values
    assert a[11, 10] == 1.25


def test_monotone_decay_beyond_floor():
    a = one_joint((0, 0), shape=(1, 40)).values[0]
    assert np.all(np.diff(a[1:]) < 0)


@given(st.floats(0.01, 100))
def test_energy_scale_changes_values_not_mask(c):
    rng = np.random.default_rng(0)
    jp = rng.uniform(0, 32, size=(24, 2))
    e = rng.uniform(0, 1, size=24)
    a = attention_map(jp, e, (32, 32))
    b = attention_map(jp, c * e, (32, 32))
    assert np.allclose(b.values, c * a.values, rtol=1e-12)
    ma = top_fraction_mask(region_average(a, 8), 1 / 3)
    mb = top_fraction_mask(region_average(b, 8), 1 / 3)
    assert np.array_equal(ma.keep, mb.keep)


def test_attention_validation():
    with pytest.raises(ValueError):
        attention_map(np.zeros((1, 2)), np.array([-1.0]), (8, 8))
    with pytest.raises(ValueError):
        attention_map(np.zeros((2, 2)), np.array([1.0]), (8, 8))
    with pytest.raises(ValueError):
        AttentionMap(np.array([[np.inf]]))


def test_region_average_cases(rng):
    assert np.all(region_average(AttentionMap(np.full((16, 16), 3.0)), 4).values == 3.0)
    hot = np.zeros((16, 16))
    hot[5, 6] = 8.0
    assert region_average(AttentionMap(hot), 4).values[1, 1] == 8.0 / 16
    a = rng.uniform(size=(24, 16))
    g = region_average(AttentionMap(a), 8).values
    for i in range(3):
        for j in range(2):
            s = 0.0
            for r in range(8):
                for c in range(8):
                    s += a[i * 8 + r, j * 8 + c]
            assert abs(g[i, j] - s / 64) <= 1e-12
    with pytest.raises(ValueError):
        region_average(AttentionMap(a), 5)


def test_top_fraction_tie_break_and_sorting():
    eq = top_fraction_mask(RegionGrid(np.ones((3, 3)), 1), 1 / 3)
    assert eq.kept_indices == [0, 1, 2]
    dec = top_fraction_mask(RegionGrid(np.arange(9, 0, -1, dtype=float).reshape(3, 3), 1), 1 / 3)
    assert dec.kept_indices == [0, 1, 2]
    assert top_fraction_mask(RegionGrid(np.random.default_rng(0).random((4, 4)), 1), 1.0).keep.all()
    for bad in (0.0, 1.5):
        with pytest.raises(ValueError):
            top_fraction_mask(RegionGrid(np.ones((2, 2)), 1), bad)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(0, 10)),
       st.floats(0.01, 1.0))
def test_mask_cardinality_and_order(values, rho):
    m = top_fraction_mask(RegionGrid(values, 1), rho)
    k = math.ceil(rho * values.size)
    assert m.keep.sum() == k
    flat = values.ravel()
    oracle = sorted(range(flat.size), key=lambda i: (-flat[i], i))[:k]
    assert m.kept_indices == sorted(oracle)


def test_apply_mask_cases(rng):
    img = rng.uniform(size=(16, 16))
    full = RegionMask(np.ones((2, 2), bool), 1.0, 8)
    assert np.array_equal(apply_mask(img, full).pixels, img)
    none = RegionMask(np.zeros((2, 2), bool), 0.25, 8)
    assert np.all(apply_mask(img, none).pixels == FILL_VALUE)
    checker = RegionMask(np.array([[True, False], [False, True]]), 0.5, 8)
    out = apply_mask(img, checker).pixels
    for r in range(16):
        for c in range(16):
            kept = (r // 8 + c // 8) % 2 == 0
            assert out[r, c] == (img[r, c] if kept else FILL_VALUE)
    with pytest.raises(ValueError):
        apply_mask(np.zeros((8, 8)), checker)


def _part_energy(**parts):
    base = {"torso": 0.0, "left_arm": 0.0, "right_arm": 0.0, "left_leg": 0.0, "right_leg": 0.0}
    base.update(parts)
    return energy_from_parts(base).per_joint


def test_arm_and_leg_energies_select_disjoint_regions():
    frame = render_frame(STANDING, CameraConfig())
    arms = _part_energy(left_arm=1.0, right_arm=1.0)
    legs = _part_energy(left_leg=1.0, right_leg=1.0)
    # A quarter of the 8x8 grid is exactly the two patch rows the arms occupy.
    mi, mj = decouple_composite(frame, arms, legs, rho=0.25)
    assert not np.any(mi.mask.keep & mj.mask.keep)
    # Oracle: kept regions must include each limb's end joint's region.
    for mask, joints in ((mi.mask, (22, 23)), (mj.mask, (10, 11))):
        for j in joints:
            c, r = frame.joint_pixels[j]
            assert mask.keep[int(r) // 8, int(c) // 8]


def test_equal_energies_give_identical_masks():
    frame = render_frame(STANDING, CameraConfig())
    e = _part_energy(left_arm=0.3, right_leg=0.2)
    mi, mj = decouple_composite(frame, e, e)
    assert np.array_equal(mi.mask.keep, mj.mask.keep)
    assert np.array_equal(mi.pixels, mj.pixels)


def test_zero_energy_keeps_first_regions():
    frame = render_frame(STANDING, CameraConfig())
    _, mj = decouple_composite(frame, _part_energy(torso=1.0), np.zeros(24))
    k = math.ceil(64 / 3)
    assert mj.mask.kept_indices == list(range(k))
