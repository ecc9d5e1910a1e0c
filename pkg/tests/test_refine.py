import numpy as np
import pytest
from hypothesis import given, strategies as st

from compose_motion.decouple import MaskedImage, RegionMask, apply_mask, attention_map, region_average, top_fraction_mask
from compose_motion.energy import compute_part_energy
from compose_motion.generators import SubActionKind, generate_corpus, generate_sub_action
from compose_motion.refine import (MeanFill, PatchRegressor, dr_loss, inpaint, make_inpainter, refinement_pass,
                                   regressor_corpus)
from compose_motion.render import CameraConfig, normalize_frontal, render_frame
from compose_motion.skeleton import ActionLabel

CAM = CameraConfig()


def test_mean_fill_cases(rng):
    img = rng.uniform(size=(16, 16))
    full = RegionMask(np.ones((2, 2), bool), 1.0, 8)
    assert np.array_equal(inpaint(MeanFill(), apply_mask(img, full)), img)
    const = np.full((16, 16), 0.8)
    half = RegionMask(np.array([[True, False], [False, True]]), 0.5, 8)
    out = inpaint(MeanFill(), apply_mask(const, half))
    assert np.allclose(out, 0.8, atol=1e-15)


def test_mean_fill_is_idempotent(rng):
    img = rng.uniform(size=(16, 16))
    m = RegionMask(np.array([[True, False], [True, False]]), 0.5, 8)
    once = MeanFill().inpaint(apply_mask(img, m))
    twice = MeanFill().inpaint(MaskedImage(once, m))
    assert np.array_equal(once, twice)
    assert MeanFill.preserves_kept


def test_inpaint_shape_check():
    m = RegionMask(np.ones((2, 2), bool), 1.0, 8)
    with pytest.raises(ValueError):
        inpaint(MeanFill(), MaskedImage(np.zeros((8, 8)), m))
    with pytest.raises(ValueError):
        make_inpainter("mae")


def test_patch_regressor_stays_within_fit_residual():
    seqs = generate_corpus([SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK], 2, 8, np.random.default_rng(0))
    images, masks = regressor_corpus(seqs, CAM, 1 / 3, np.random.default_rng(0))
    model = PatchRegressor().fit(images, masks)
    assert model.residual_bound is not None
    for img, m in zip(images[:6], masks[:6]):
        out = inpaint(model, apply_mask(img, m))
        assert np.abs(out - img).max() <= model.residual_bound + 1e-12
        assert np.array_equal(out[m.pixel_mask()], img[m.pixel_mask()])


def test_patch_regressor_fit_is_deterministic():
    seqs = generate_corpus([SubActionKind.ARM_RAISE], 2, 8, np.random.default_rng(0))
    a = PatchRegressor().fit(*regressor_corpus(seqs, CAM, 1 / 3, np.random.default_rng(4)))
    b = PatchRegressor().fit(*regressor_corpus(seqs, CAM, 1 / 3, np.random.default_rng(4)))
    assert np.array_equal(a.weights, b.weights)
    with pytest.raises(RuntimeError):
        PatchRegressor().inpaint(apply_mask(np.zeros((64, 64)), RegionMask(np.ones((8, 8), bool), 1.0, 8)))


def test_loss_cases(rng):
    v = rng.uniform(size=(8, 8))
    assert dr_loss(v, v, v, v) == 0.0
    w = v.copy()
    w[3, 4] += 1.0
    assert dr_loss(w, v, v, v) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        dr_loss(v, v, v, np.zeros((4, 4)))


def test_loss_matches_pixel_loop(rng):
    a, b, c, d = rng.uniform(size=(4, 64, 64))
    total = 0.0
    for r in range(64):
        for col in range(64):
            total += (a[r, col] - b[r, col]) ** 2 + (c[r, col] - d[r, col]) ** 2
    assert abs(dr_loss(a, b, c, d) - total) <= 1e-9


@given(st.integers(0, 1000))
def test_loss_symmetry_and_sign(seed):
    a, b, c, d = np.random.default_rng(seed).uniform(size=(4, 8, 8))
    assert dr_loss(a, b, c, d) == dr_loss(c, d, a, b)
    assert dr_loss(a, b, c, d) > 0


def _pair():
    rng = np.random.default_rng(0)
    si = normalize_frontal(generate_sub_action(SubActionKind.ARM_WAVE_LEFT, 8, rng, label=ActionLabel(0, 2)))
    sj = normalize_frontal(generate_sub_action(SubActionKind.LEG_KICK, 8, rng, label=ActionLabel(1, 2)))
    return si, sj


def test_identical_composite_hits_self_reconstruction_floor():
    si, sj = _pair()
    ei = compute_part_energy(si).per_joint
    floor = 0.0
    for t in range(si.num_frames):
        frame = render_frame(si.joints[t], CAM)
        m = top_fraction_mask(region_average(attention_map(frame.joint_pixels, ei, CAM), 8), 1 / 3)
        floor += float(np.sum((MeanFill().inpaint(apply_mask(frame, m)) - frame.pixels) ** 2))
    floor /= si.num_frames
    res = refinement_pass(si, si, sj, ei, np.zeros(24), CAM, 1 / 3, MeanFill())
    assert res.branch_i <= floor + 1e-9


def test_refinement_is_deterministic_and_strided():
    si, sj = _pair()
    ei, ej = compute_part_energy(si), compute_part_energy(sj)
    comp = 0.5 * (si.joints + sj.joints)
    a = refinement_pass(comp, si, sj, ei, ej, CAM, 1 / 3, MeanFill(), stride=3)
    b = refinement_pass(comp, si, sj, ei, ej, CAM, 1 / 3, MeanFill(), stride=3)
    assert a == b and a.frames == (0, 3, 6)
    assert a.loss == pytest.approx(a.branch_i + a.branch_j)
    with pytest.raises(ValueError):
        refinement_pass(comp, si, sj, ei, ej, CAM, 1 / 3, MeanFill(), stride=0)
