import numpy as np
import pytest

from compose_motion.energy import compute_part_energy
from compose_motion.generators import (SubActionKind, generate_composite, generate_composite_corpus,
                                       generate_corpus, generate_sub_action)
from compose_motion.skeleton import DEFAULT_PARTITION, NEUTRAL_POSE


@pytest.mark.parametrize("kind", list(SubActionKind))
@pytest.mark.parametrize("T", [2, 3, 16, 60])
def test_declared_part_is_strict_energy_argmax(kind, T):
    seq = generate_sub_action(kind, T, np.random.default_rng(0))
    e = compute_part_energy(seq).per_part
    top = max(e, key=e.get)
    assert top == kind.dominant_part
    others = [v for k, v in e.items() if k != top]
    assert e[top] > max(others)


def test_leg_march_seed_seven_moves_legs_most():
    seq = generate_sub_action(SubActionKind.LEG_MARCH, 16, np.random.default_rng(7))
    assert compute_part_energy(seq).dominant_part() in ("left_leg", "right_leg")


@pytest.mark.parametrize("kind", list(SubActionKind))
def test_zero_amplitude_is_static(kind):
    seq = generate_sub_action(kind, 10, np.random.default_rng(0), amplitude=0.0, jitter=0.0)
    # Pivot subtraction and re-addition may round in the last bit.
    assert np.allclose(seq.joints, NEUTRAL_POSE, rtol=0, atol=1e-15)
    assert all(v < 1e-28 for v in compute_part_energy(seq).per_part.values())


def test_inactive_joints_stay_near_neutral():
    seq = generate_sub_action(SubActionKind.ARM_WAVE_LEFT, 30, np.random.default_rng(3))
    active = set(DEFAULT_PARTITION.parts["left_arm"])
    idle = [j for j in range(24) if j not in active]
    dev = np.abs(seq.joints[:, idle] - NEUTRAL_POSE[idle])
    assert dev.max() < 0.01  # jitter is 1 mm


def test_minimum_length_and_errors():
    assert generate_sub_action(SubActionKind.ARM_WAVE_LEFT, 2, np.random.default_rng(0)).num_frames == 2
    with pytest.raises(ValueError):
        generate_sub_action(SubActionKind.ARM_WAVE_LEFT, 1, np.random.default_rng(0))
    with pytest.raises(ValueError, match="unknown sub-action"):
        SubActionKind.parse("backflip")
    assert SubActionKind.parse("leg-kick") is SubActionKind.LEG_KICK


def test_corpus_labels_and_ids():
    kinds = [SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK]
    corpus = generate_corpus(kinds, 3, 8, np.random.default_rng(0), amplitude_spread=0.2)
    assert [s.class_id for s in corpus] == [0, 0, 0, 1, 1, 1]
    assert corpus[4].id == "leg_kick-0001"
    assert all(s.label.num_classes == 2 for s in corpus)


def test_generation_is_seeded():
    a = generate_corpus(list(SubActionKind), 2, 12, np.random.default_rng(5), phase_spread=0.4)
    b = generate_corpus(list(SubActionKind), 2, 12, np.random.default_rng(5), phase_spread=0.4)
    assert a == b


def test_composite_moves_both_parts():
    seq = generate_composite(SubActionKind.ARM_WAVE_LEFT, SubActionKind.LEG_KICK, 16, np.random.default_rng(0),
                             class_a=0, class_b=3, num_classes=4)
    e = compute_part_energy(seq).per_part
    ranked = sorted(e, key=e.get, reverse=True)[:2]
    assert set(ranked) == {"left_arm", "right_leg"}
    assert seq.label.weights.tolist() == [0.5, 0, 0, 0.5]


def test_composite_matches_single_kind_when_other_is_still():
    rng = np.random.default_rng(0)
    solo = generate_sub_action(SubActionKind.ARM_RAISE, 12, rng, jitter=0.0)
    both = generate_composite(SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK, 12, rng, class_a=0, class_b=1,
                              num_classes=2, params_b=(0.0, None, 0.0), jitter=0.0)
    assert np.allclose(solo.joints, both.joints, atol=1e-12)


def test_composite_corpus_layout():
    kinds = [SubActionKind.ARM_WAVE_LEFT, SubActionKind.ARM_RAISE, SubActionKind.LEG_MARCH]
    out = generate_composite_corpus(kinds, [(0, 2), (1, 2)], 3, 10, np.random.default_rng(0))
    assert len(out) == 6
    assert [s.label.classes for s in out] == [(0, 2)] * 3 + [(1, 2)] * 3
