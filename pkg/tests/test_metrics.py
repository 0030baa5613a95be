import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infinite_label.errors import ContractError
from infinite_label.metrics import (BinSpec, average_precision, distance_bins, hamming_loss, min_distances,
                                    miap, per_image_ap, ranking, report, topk_prf)
from oracles import ap_oracle, hamming_oracle, miap_oracle, random_instance, topk_oracle

TOL = 1e-12


def test_hamming_examples():
    truth = np.array([[1, -1, 1], [-1, -1, 1]])
    assert hamming_loss(truth, truth) == 0.0
    assert hamming_loss(-truth, truth) == 1.0
    pred = np.array([[-1, 1, 1], [-1, -1, 1]])
    assert hamming_loss(pred, truth) == pytest.approx(1 / 3, abs=1e-15)


def test_hamming_shape_mismatch():
    with pytest.raises(ContractError):
        hamming_loss(np.ones((2, 3)), np.ones((3, 2)))


def test_average_precision_examples():
    assert average_precision([0.9, 0.8, 0.7], [-1, 1, 1]) == pytest.approx(7 / 12, abs=1e-15)
    assert average_precision([0.1, 0.5, 0.3], [-1, 1, -1]) == 1.0
    assert average_precision([0.3, 0.2], [1, 1]) == 1.0
    with pytest.raises(ContractError):
        average_precision([0.3, 0.2], [-1, -1])


def test_miap_examples():
    scores = np.array([[0.9, 0.8, 0.7], [0.9, 0.8, 0.7]])
    truth = np.array([[1, -1, -1], [-1, 1, 1]])
    assert miap(scores, truth) == pytest.approx(19 / 24, abs=1e-15)
    assert miap(scores[::-1], truth[::-1]) == miap(scores, truth)
    assert miap(scores[1:], truth[1:]) == average_precision(scores[1], truth[1])


def test_miap_skips_images_without_relevant_labels():
    scores = np.array([[0.9, 0.1], [0.2, 0.4]])
    truth = np.array([[-1, -1], [-1, 1]])
    assert per_image_ap(scores, truth).tolist() == [1.0]
    with pytest.raises(ContractError):
        miap(scores, -np.ones((2, 2)))


def test_topk_examples():
    scores = np.array([[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]])
    truth = np.array([[1, -1, 1, 1, 1, -1]])
    p, r, f1 = topk_prf(scores, truth, k=3)
    assert (p, r) == pytest.approx((2 / 3, 1 / 2), abs=1e-15)
    assert f1 == pytest.approx(4 / 7, abs=1e-15)
    assert topk_prf(scores, np.array([[1, 1, 1, -1, -1, -1]]), k=3) == (1.0, 1.0, 1.0)
    with pytest.raises(ContractError):
        topk_prf(scores, truth, k=7)


def test_topk_ties_take_lowest_indices():
    scores = np.zeros((1, 5))
    assert ranking(scores[0]).tolist() == [0, 1, 2, 3, 4]
    assert topk_prf(scores, np.array([[1, 1, -1, -1, 1]]), k=2) == (1.0, 2 / 3, pytest.approx(0.8))


def test_distance_bins_paper_shape():
    rng = np.random.default_rng(0)
    groups = distance_bins(rng.standard_normal((10, 2)), rng.standard_normal((2990, 2)))
    assert [g.kind for g in groups] == ["seen"] + ["unseen"] * 6
    assert [g.indices.size for g in groups] == [10, 500, 500, 500, 500, 500, 490]
    means = [g.mean_distance for g in groups[1:]]
    assert means == sorted(means)
    assert np.array_equal(np.sort(np.concatenate([g.indices for g in groups])), np.arange(3000))


def test_distance_bins_edge_cases():
    seen = np.array([[0.0, 0.0], [5.0, 5.0]])
    unseen = np.array([[9.0, 9.0], [5.0, 5.0], [1.0, 0.0]])
    assert min_distances(seen, unseen)[1] == 0.0
    groups = distance_bins(seen, unseen, BinSpec(bin_size=1, include_seen_group=False))
    assert [g.indices.tolist() for g in groups] == [[3], [4], [2]]
    single = distance_bins(seen, unseen, BinSpec(bin_size=10))
    assert len(single) == 2 and single[1].indices.size == 3


def test_distance_ties_break_by_index():
    seen = np.zeros((1, 2))
    unseen = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    groups = distance_bins(seen, unseen, BinSpec(bin_size=1))
    assert [g.indices.tolist() for g in groups[1:]] == [[1], [2], [3]]


def test_metrics_match_rational_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        scores, truth = random_instance(rng)
        assert abs(miap(scores, truth) - float(miap_oracle(scores, truth))) <= TOL
        for m in range(scores.shape[0]):
            if np.any(truth[m] == 1):
                assert abs(average_precision(scores[m], truth[m]) - float(ap_oracle(scores[m], truth[m]))) <= TOL
        k = int(rng.integers(1, scores.shape[1] + 1))
        got = topk_prf(scores, truth, k)
        want = topk_oracle(scores, truth, k)
        assert all(abs(g - float(w)) <= TOL for g, w in zip(got, want))
        pred = np.where(scores > 0, 1, -1)
        assert abs(hamming_loss(pred, truth) - float(hamming_oracle(pred, truth))) <= TOL


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hamming_complement(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(rng.integers(1, 10, size=2))
    pred, truth = (np.where(rng.random(shape) < 0.5, 1, -1) for _ in range(2))
    assert abs(hamming_loss(pred, truth) + hamming_loss(-pred, truth) - 1.0) <= 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_label_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    m, l = int(rng.integers(1, 7)), int(rng.integers(3, 13))
    scores = rng.standard_normal((m, l))  # distinct scores, so no ties
    truth = np.where(rng.random((m, l)) < 0.4, 1, -1)
    truth[:, 0] = 1
    perm = rng.permutation(l)
    a, b = report(scores, truth, k=3), report(scores[:, perm], truth[:, perm], k=3)
    for name, value in a.to_dict().items():
        assert getattr(b, name) == pytest.approx(value, abs=1e-12)
        assert 0.0 <= value <= 1.0 or name == "k"
