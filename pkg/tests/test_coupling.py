import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compose_motion.coupling import (Beta, Fixed, Gaussian, PairingPolicy, Uniform, build_pseudo_dataset,
                                     couple_arrays, couple_labels, couple_sequences, format_dist, parse_dist,
                                     resample, sample_lambda, unit_energy)
from compose_motion.energy import compute_part_energy, energy_from_parts
from compose_motion.generators import SubActionKind, generate_corpus, generate_sub_action
from compose_motion.skeleton import DEFAULT_PARTITION, ActionLabel, MotionSequence


def test_fixed_and_concentrated_gaussian():
    rng = np.random.default_rng(0)
    assert all(sample_lambda(Fixed(0.3), rng) == 0.3 for _ in range(100))
    assert all(abs(sample_lambda(Gaussian(1e-9), rng) - 0.5) <= 1e-6 for _ in range(100))


def test_gaussian_rejection_keeps_support():
    rng = np.random.default_rng(0)
    draws = np.array([sample_lambda(Gaussian(0.6), rng) for _ in range(5000)])
    assert draws.min() >= 0.0 and draws.max() <= 1.0
    # Rejection (not clipping) leaves no atoms at the bounds.
    assert np.count_nonzero((draws == 0.0) | (draws == 1.0)) == 0


def test_beta_and_uniform_in_unit_interval():
    rng = np.random.default_rng(1)
    for dist in (Beta(0.4), Uniform()):
        d = [sample_lambda(dist, rng) for _ in range(2000)]
        assert 0.0 <= min(d) and max(d) <= 1.0


def test_distribution_validation_and_parsing():
    for bad in (lambda: Gaussian(0.0), lambda: Beta(-1.0), lambda: Fixed(1.5)):
        with pytest.raises(ValueError):
            bad()
    for text in ("gaussian:0.1", "beta:0.4", "uniform", "fixed:0.3"):
        assert format_dist(parse_dist(text)) == text
    with pytest.raises(ValueError):
        parse_dist("cauchy:1")


def test_label_coupling_cases():
    a, b = ActionLabel(0, 2), ActionLabel(1, 2)
    assert couple_labels(a, b, 1.0).weights.tolist() == [1.0, 0.0]
    w = couple_labels(ActionLabel(2, 12), ActionLabel(5, 12), 0.5).weights
    assert w[2] == w[5] == 0.5 and w.sum() == 1.0
    assert couple_labels(a, b, 0.3).weights.tolist() == [0.3, 0.7]
    with pytest.raises(ValueError):
        couple_labels(a, ActionLabel(0, 2), 0.5)


@given(st.floats(0, 1))
def test_label_mix_stays_on_simplex(lam):
    w = couple_labels(ActionLabel(1, 4), ActionLabel(3, 4), lam).weights
    assert np.all(w >= 0) and abs(w.sum() - 1.0) < 1e-12


def test_worked_example():
    yi = np.zeros((1, 24, 3))
    yi[0, 0] = (1, 0, 0)
    out = couple_arrays(yi, np.zeros((1, 24, 3)), np.full(24, 2.0), np.full(24, 1.0), 0.25)
    assert out[0, 0].tolist() == pytest.approx([0.4, 0.0, 0.0], abs=1e-15)


def test_equal_energies_give_midpoint(rng):
    yi, yj = rng.normal(size=(2, 5, 24, 3))
    e = np.full(24, 0.7)
    assert np.allclose(couple_arrays(yi, yj, e, e, 0.5), (yi + yj) / 2, atol=1e-15)


def test_zero_opposing_energy_recovers_source(rng):
    yi, yj = rng.normal(size=(2, 5, 24, 3))
    out = couple_arrays(yi, yj, np.full(24, 0.3), np.zeros(24), 0.7)
    assert np.array_equal(out, yi)


def test_both_static_falls_back_to_plain_mix(rng):
    yi, yj = rng.normal(size=(2, 3, 24, 3))
    out = couple_arrays(yi, yj, np.zeros(24), np.zeros(24), 0.3)
    assert np.allclose(out, 0.3 * yi + 0.7 * yj, atol=1e-15)


def test_length_mismatch_rejected(rng):
    a = MotionSequence(rng.normal(size=(4, 24, 3)), ActionLabel(0, 2))
    b = MotionSequence(rng.normal(size=(5, 24, 3)), ActionLabel(1, 2))
    e = unit_energy()
    with pytest.raises(ValueError, match="lengths differ"):
        couple_sequences(a, b, e, e, 0.5)


def test_dominant_part_is_preserved():
    rng = np.random.default_rng(2)
    si = generate_sub_action(SubActionKind.ARM_WAVE_LEFT, 20, rng, label=ActionLabel(0, 2))
    sj = generate_sub_action(SubActionKind.LEG_KICK, 20, rng, label=ActionLabel(1, 2))
    ei, ej = compute_part_energy(si), compute_part_energy(sj)
    assert ei.per_part["left_arm"] >= 10 * ej.per_part["left_arm"]
    out = couple_sequences(si, sj, ei, ej, 0.5)
    arm = list(DEFAULT_PARTITION.parts["left_arm"])
    d_i = np.linalg.norm(out[:, arm] - si.joints[:, arm])
    d_j = np.linalg.norm(out[:, arm] - sj.joints[:, arm])
    assert d_i < d_j


def test_resample_endpoints_and_identity(rng):
    j = rng.normal(size=(7, 24, 3))
    r = resample(j, 4)
    assert r.shape == (4, 24, 3)
    assert np.array_equal(r[0], j[0]) and np.array_equal(r[-1], j[-1])
    assert np.array_equal(resample(j, 7), j)


def _corpus(kinds, per_class=3, T=8, seed=0):
    return generate_corpus(kinds, per_class, T, np.random.default_rng(seed))


def test_single_pair_dataset():
    data = _corpus([SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK])
    comps = build_pseudo_dataset(data, PairingPolicy(full_class=True), 10, Gaussian(0.1), DEFAULT_PARTITION,
                                 np.random.default_rng(0))
    assert len(comps) == 10
    assert {c.pair for c in comps} == {(0, 1)}
    for c in comps:
        assert c.source_classes[0] != c.source_classes[1]
        assert 0 <= c.lam <= 1
        assert c.sequence.label == c.mixed_label


def test_policy_without_pairs_is_an_error():
    data = _corpus([SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK])
    with pytest.raises(ValueError, match="no class pairs"):
        build_pseudo_dataset(data, PairingPolicy.allow([(0, 5)]), 3, Gaussian(0.1), DEFAULT_PARTITION,
                             np.random.default_rng(0))


def test_pair_frequencies_are_uniform():
    kinds = [SubActionKind.ARM_WAVE_LEFT, SubActionKind.ARM_RAISE, SubActionKind.LEG_MARCH, SubActionKind.LEG_KICK]
    data = _corpus(kinds, per_class=2, T=4)
    comps = build_pseudo_dataset(data, PairingPolicy(full_class=True), 1000, Fixed(0.5), DEFAULT_PARTITION,
                                 np.random.default_rng(3))
    counts = {}
    for c in comps:
        counts[c.pair] = counts.get(c.pair, 0) + 1
    assert len(counts) == 6
    p = 1 / 6
    sigma = math.sqrt(1000 * p * (1 - p))
    for n in counts.values():
        assert abs(n - 1000 * p) <= 3 * sigma


def test_unequal_lengths_resampled_to_shorter():
    rng = np.random.default_rng(0)
    a = generate_sub_action(SubActionKind.ARM_RAISE, 10, rng, label=ActionLabel(0, 2), seq_id="a")
    b = generate_sub_action(SubActionKind.LEG_KICK, 6, rng, label=ActionLabel(1, 2), seq_id="b")
    comps = build_pseudo_dataset([a, b], PairingPolicy(full_class=True), 2, Fixed(0.5), DEFAULT_PARTITION, rng)
    assert all(c.sequence.num_frames == 6 for c in comps)


def test_unit_energy_dataset_is_plain_mix():
    data = _corpus([SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK])
    comps = build_pseudo_dataset(data, PairingPolicy(full_class=True), 5, Gaussian(0.1), DEFAULT_PARTITION,
                                 np.random.default_rng(0), use_energy=False)
    by_id = {s.id: s for s in data}
    for c in comps:
        yi, yj = (by_id[s].joints for s in c.source_ids)
        assert np.allclose(c.sequence.joints, c.lam * yi + (1 - c.lam) * yj, atol=1e-15)


def test_dataset_is_seeded():
    data = _corpus([SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK, SubActionKind.LEG_MARCH])
    args = (data, PairingPolicy(full_class=True), 20, Gaussian(0.1), DEFAULT_PARTITION)
    assert build_pseudo_dataset(*args, np.random.default_rng(9)) == build_pseudo_dataset(*args, np.random.default_rng(9))


def test_policy_round_trip(tmp_path):
    pol = PairingPolicy.allow([(2, 0), (1, 3)])
    assert pol.pairs == {(0, 2), (1, 3)}
    (tmp_path / "p.json").write_text(json.dumps(pol.to_dict()))
    assert PairingPolicy.load(tmp_path / "p.json") == pol
    with pytest.raises(ValueError, match="unknown"):
        PairingPolicy.from_dict({"pairs": [], "bogus": 1})
    with pytest.raises(ValueError, match="repeats"):
        PairingPolicy.allow([(1, 1)])
