import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from compose_motion import pipeline
from compose_motion.config import ARMS, RunConfig
from compose_motion.coupling import PairingPolicy, build_pseudo_dataset, couple_arrays, parse_dist
from compose_motion.energy import compute_part_energy
from compose_motion.evaluation import (ARM_SPECS, GaussianStats, HandcraftedExtractor, InvalidStateError,
                                       MetricsReport, TrainedClassifier, accuracy, bootstrap_halfwidth, diversity,
                                       fid, gaussian_stats, matrix_sqrt_psd, multimodality, run_ablation)
from compose_motion.generators import SubActionKind, generate_corpus
from compose_motion.skeleton import DEFAULT_PARTITION

DEMO = RunConfig.load(pipeline.__file__.replace("pipeline.py", "configs/demo.json"))


def _psd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T


# -- moments and Frechet distance ---------------------------------------------------


def test_stats_cases():
    s = gaussian_stats(np.tile([[1.0, -2.0, 3.0]], (4, 1)))
    assert np.all(s.cov == 0) and s.mean.tolist() == [1.0, -2.0, 3.0]
    x = np.array([[1.0, 2.0], [3.0, 1.0], [2.0, 6.0]])
    # Textbook: mean (2, 3); deviations (-1,-1), (1,-2), (0,3).
    s = gaussian_stats(x)
    assert s.mean.tolist() == [2.0, 3.0]
    assert np.allclose(s.cov, [[1.0, -0.5], [-0.5, 7.0]], atol=1e-15)
    assert np.array_equal(s.cov, s.cov.T)
    with pytest.raises(ValueError):
        gaussian_stats(np.ones((1, 3)))


def test_matrix_sqrt_cases(rng):
    assert np.allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
    assert np.allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    for k in range(50):
        d = int(rng.integers(1, 65))
        m = _psd(rng, d)
        r = matrix_sqrt_psd(m)
        assert np.linalg.norm(r @ r - m) / np.linalg.norm(m) < 1e-8
    with pytest.raises(ValueError, match="symmetric"):
        matrix_sqrt_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_negative_eigenvalue_clamp_warns(caplog):
    with caplog.at_level(logging.WARNING):
        r = matrix_sqrt_psd(np.diag([4.0, -1.0]))
    assert np.allclose(r, np.diag([2.0, 0.0]))
    assert "clamping" in caplog.text


def test_fid_cases():
    s = GaussianStats(np.zeros(2), np.eye(2))
    assert fid(s, s) <= 1e-9
    assert fid(s, GaussianStats(np.array([3.0, 4.0]), np.eye(2))) == pytest.approx(25.0, abs=1e-12)
    assert fid(GaussianStats(np.zeros(1), np.array([[4.0]])), GaussianStats(np.zeros(1), np.array([[1.0]]))) == \
        pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fid(s, GaussianStats(np.zeros(3), np.eye(3)))


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_fid_symmetry_and_sign(seed, d):
    r = np.random.default_rng(seed)
    a = GaussianStats(r.normal(size=d), _psd(r, d))
    b = GaussianStats(r.normal(size=d), _psd(r, d))
    assert fid(a, b) >= 0
    assert abs(fid(a, b) - fid(b, a)) <= 1e-9 * max(1.0, fid(a, b))


def test_fid_matches_non_symmetric_form(rng):
    from scipy.linalg import sqrtm
    a = GaussianStats(rng.normal(size=4), _psd(rng, 4))
    b = GaussianStats(rng.normal(size=4), _psd(rng, 4))
    ref = np.sum((a.mean - b.mean) ** 2) + np.trace(a.cov + b.cov - 2 * sqrtm(a.cov @ b.cov).real)
    assert fid(a, b) == pytest.approx(ref, rel=1e-8)


def test_same_generator_fid_bound():
    # Measured at <= 1e-3 over seeds 0-4 (200 samples per side); distinct
    # distributions (sources vs composites) sit near 0.12.
    ex = HandcraftedExtractor()
    a = ex.batch(pipeline.make_real_composites(DEMO, 0, 40, "A"))
    b = ex.batch(pipeline.make_real_composites(DEMO, 0, 40, "B"))
    assert fid(gaussian_stats(a), gaussian_stats(b)) < 2e-3


# -- diversity ----------------------------------------------------------------------


def test_diversity_cases(rng):
    assert diversity(np.ones((5, 3)), 50, rng) == 0.0
    assert diversity(np.array([[0.0, 0.0], [3.0, 4.0]]), 20, rng) == pytest.approx(5.0)
    x = rng.normal(size=(30, 4))
    exhaustive = np.mean([np.linalg.norm(x[i] - x[j]) for i, j in itertools.permutations(range(30), 2)])
    spread = np.std([np.linalg.norm(x[i] - x[j]) for i, j in itertools.permutations(range(30), 2)])
    n = 20_000
    assert abs(diversity(x, n, rng) - exhaustive) < 4 * spread / np.sqrt(n)
    with pytest.raises(ValueError):
        diversity(np.ones((1, 3)), 10, rng)


def test_multimodality(rng):
    groups = {(1, 2): np.array([[0.0], [2.0]]), (0, 1): np.array([[0.0], [4.0]])}
    assert multimodality(groups, 10, rng) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        multimodality({(0, 1): np.ones((1, 2))}, 10, rng)
    with pytest.raises(ValueError):
        multimodality({}, 10, rng)


def test_bootstrap_is_reproducible():
    x = np.random.default_rng(0).normal(size=100)
    stat = lambda idx: float(x[idx].mean())
    a = bootstrap_halfwidth(stat, 100, 200, np.random.default_rng(7))
    b = bootstrap_halfwidth(stat, 100, 200, np.random.default_rng(7))
    assert a == b
    # Roughly 1.96 standard errors.
    assert a == pytest.approx(1.96 * x.std() / 10, rel=0.25)
    assert bootstrap_halfwidth(stat, 100, 0, np.random.default_rng(0)) == 0.0


def test_report_validation():
    r = MetricsReport(1.0, 0.5, 2.0, 1.0)
    assert '"fid": 1.0' in r.to_json()
    with pytest.raises(ValueError):
        MetricsReport(float("nan"), 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        MetricsReport(1.0, 1.5, 1.0, 1.0)


# -- features and recognition -------------------------------------------------------


def test_handcrafted_features():
    seqs = generate_corpus([SubActionKind.ARM_RAISE, SubActionKind.LEG_MARCH], 2, 9, np.random.default_rng(0))
    ex = HandcraftedExtractor()
    feats = ex.batch(seqs)
    assert feats.shape == (4, 293) == (4, ex.dim)
    assert np.array_equal(ex(seqs[0]), ex(seqs[0]))
    energy = compute_part_energy(seqs[1])
    for k, name in enumerate(DEFAULT_PARTITION.names):
        assert abs(feats[1, 288 + k] - energy.per_part[name]) <= 1e-12


@pytest.fixture(scope="module")
def recognition_sets():
    train_set = pipeline.make_real_composites(DEMO, 0, 24, "classifier-data")
    test_set = pipeline.make_real_composites(DEMO, 0, 24, "test-data")
    return train_set, test_set


def _pair(s):
    return tuple(s.label.classes)


def test_classifier_fits_its_training_data(recognition_sets):
    train_set, _ = recognition_sets
    clf = TrainedClassifier(seed=0).fit(train_set, [_pair(s) for s in train_set])
    assert accuracy(clf, [(s, _pair(s)) for s in train_set]) >= 0.9
    assert clf.batch(train_set[:3]).shape == (3, clf.dim)


def test_random_label_classifier_is_near_chance(recognition_sets):
    train_set, test_set = recognition_sets
    pairs = [_pair(s) for s in train_set]
    scores = []
    for seed in range(4):
        shuffled = [pairs[k] for k in np.random.default_rng(seed).permutation(len(pairs))]
        clf = TrainedClassifier(seed=seed).fit(train_set, shuffled)
        scores.append(accuracy(clf, [(s, _pair(s)) for s in test_set]))
    assert abs(np.mean(scores) - 1 / 5) < 0.1


def test_classifier_state_errors(recognition_sets):
    clf = TrainedClassifier()
    with pytest.raises(InvalidStateError):
        clf.predict(recognition_sets[0][:1])
    with pytest.raises(ValueError):
        accuracy(TrainedClassifier(epochs=1).fit(recognition_sets[0], [_pair(s) for s in recognition_sets[0]]), [])


# -- ablation wiring ----------------------------------------------------------------


def test_arms_match_config():
    assert tuple(ARM_SPECS) == ARMS == tuple(DEMO.eval.arms)
    with pytest.raises(ValueError, match="unknown ablation arm"):
        run_ablation(DEMO, arms=["nope"])


def test_mask_arm_reduces_to_plain_mix():
    sources = pipeline.make_sources(DEMO, 0)
    comps = build_pseudo_dataset(sources, PairingPolicy(full_class=True), 5, parse_dist("gaussian:0.1"),
                                 DEFAULT_PARTITION, np.random.default_rng(3), use_energy=False)
    by_id = {s.id: s for s in sources}
    for c in comps:
        a, b = by_id[c.source_ids[0]].joints, by_id[c.source_ids[1]].joints
        assert np.allclose(c.sequence.joints, c.lam * a + (1 - c.lam) * b, atol=1e-12)
