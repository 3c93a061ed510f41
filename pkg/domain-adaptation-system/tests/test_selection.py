import numpy as np
import pytest

from app.core.exceptions import InvalidArgumentException
from app.core.numerics import make_rng, sigmoid
from app.schemas.adapt import SelectionPolicy
from app.services.selection_service import build_weights, pseudo_labels, selection_report, top_k


def test_top_k_orders_by_probability_with_lower_index_on_ties():
    assert top_k(np.array([0.1, 0.4, 0.4, 0.1]), 2) == [1, 2]
    assert top_k(np.array([0.25, 0.25, 0.25, 0.25]), 3) == [0, 1, 2]
    with pytest.raises(InvalidArgumentException):
        top_k(np.array([0.5, 0.5]), 3)


def test_top_k_matches_full_sort_oracle():
    rng = make_rng(0, 8)
    for _ in range(200):
        P = rng.dirichlet(np.ones(6))
        k = int(rng.integers(1, 7))
        oracle = sorted(range(6), key=lambda c: (-P[c], c))[:k]
        assert top_k(P, k) == oracle


def test_pseudo_labels_are_argmax():
    pl = pseudo_labels(np.array([[0.0, 2.0, 1.0], [3.0, 3.0, 0.0]]))
    assert pl.labels.tolist() == [1, 0]
    np.testing.assert_allclose(pl.probs.sum(axis=1), 1.0)
    with pytest.raises(InvalidArgumentException):
        pseudo_labels(np.zeros((2, 1)))


def test_hard_one_equals_single_label():
    Z = make_rng(1, 8).standard_normal((20, 5))
    pl = pseudo_labels(Z)
    assert np.array_equal(
        build_weights(pl, SelectionPolicy.hard(1)).to_dense(),
        build_weights(pl, SelectionPolicy.single_label()).to_dense(),
    )


def test_hard_weights_are_unit_on_top_k():
    Z = np.array([[0.0, 3.0, 2.0, 1.0]])
    W = build_weights(pseudo_labels(Z), SelectionPolicy.hard(2)).to_dense()
    assert W.tolist() == [[0.0, 1.0, 1.0, 0.0]]


def test_soft_weights_are_sigmoid_of_raw_logits():
    Z = np.array([[0.0, 3.0, -2.0, 1.0]])
    weights = build_weights(pseudo_labels(Z), SelectionPolicy.soft(3))
    assert weights.rows[0] == ((1, sigmoid(3.0)), (3, sigmoid(1.0)), (0, sigmoid(0.0)))


def test_soft_with_zero_logits_normalizes_like_hard():
    Z = np.zeros((4, 5))
    soft = build_weights(pseudo_labels(Z), SelectionPolicy.soft(3)).to_dense()
    hard = build_weights(pseudo_labels(Z), SelectionPolicy.hard(3)).to_dense()
    assert np.array_equal(soft > 0, hard > 0)
    for c in range(5):
        if hard[:, c].sum() > 0:
            assert np.array_equal(soft[:, c] / soft[:, c].sum(), hard[:, c] / hard[:, c].sum())


def test_ratio_threshold():
    # p1/p2 = e^1 ~ 2.72 for row 0, e^0.05 ~ 1.05 for row 1
    Z = np.array([[1.0, 0.0, -5.0], [0.05, 0.0, -5.0]])
    weights = build_weights(pseudo_labels(Z), SelectionPolicy.ratio(1.2))
    assert weights.nnz_per_row() == [1, 2]
    assert weights.rows[1] == ((0, 1.0), (1, 1.0))
    assert build_weights(pseudo_labels(Z), SelectionPolicy.ratio(3.0)).nnz_per_row() == [2, 2]


def test_k_larger_than_classes_is_invalid():
    with pytest.raises(InvalidArgumentException):
        build_weights(pseudo_labels(np.zeros((2, 3))), SelectionPolicy.hard(4))


def test_selection_report_histogram_and_mass():
    Z = np.array([[1.0, 0.0, -5.0], [0.05, 0.0, -5.0]])
    summary = selection_report(build_weights(pseudo_labels(Z), SelectionPolicy.ratio(1.2)))
    assert summary.clusters_per_sample == [0, 1, 1, 0]
    assert summary.class_mass == [2.0, 1.0, 0.0]
    assert summary.mean_clusters == 1.5


def test_policy_labels():
    assert SelectionPolicy.ratio(1.1).label == "RAM ratio=1.1"
    assert SelectionPolicy.hard(2).label == "HM k=2"
    assert SelectionPolicy.soft(3).label == "SM k=3"
    assert SelectionPolicy.single_label().label == "single-label"


def test_logits_far_below_the_maximum_keep_their_order():
    pl = pseudo_labels(np.array([[0.0, -700.0, -600.0]]))
    assert pl.labels.tolist() == [0]
    assert build_weights(pl, SelectionPolicy.hard(2)).rows == (((0, 1.0), (2, 1.0)),)
    assert build_weights(pl, SelectionPolicy.ratio(1.5)).rows == (((0, 1.0),),)


def test_selection_sets_are_invariant_to_a_per_row_logit_shift():
    rng = make_rng(4, 8)
    Z = rng.standard_normal((50, 6)) * 2
    shifted = Z + rng.integers(-20, 20, size=(50, 1)).astype(np.float64)
    a, b = pseudo_labels(Z), pseudo_labels(shifted)
    assert np.array_equal(a.labels, b.labels)

    def chosen(pl, policy):
        return [sorted(c for c, _ in row) for row in build_weights(pl, policy).rows]

    for policy in (SelectionPolicy.hard(3), SelectionPolicy.soft(2), SelectionPolicy.ratio(1.5)):
        assert chosen(a, policy) == chosen(b, policy)


def test_rows_reference_at_most_k_classes():
    pl = pseudo_labels(make_rng(5, 8).standard_normal((30, 7)))
    for k in (1, 2, 4, 7):
        for policy in (SelectionPolicy.hard(k), SelectionPolicy.soft(k)):
            counts = build_weights(pl, policy).nnz_per_row()
            assert max(counts) <= k
            assert (build_weights(pl, policy).to_dense() > 0).sum(axis=1).max() <= k
    assert max(build_weights(pl, SelectionPolicy.ratio(1.1)).nnz_per_row()) <= 2


def test_ratio_threshold_limits():
    # p1/p2 >= 1 always, so a threshold below 1 is always exceeded
    pl = pseudo_labels(make_rng(6, 8).standard_normal((40, 5)))
    assert build_weights(pl, SelectionPolicy.ratio(0.5)).nnz_per_row() == [1] * 40
    assert build_weights(pl, SelectionPolicy.ratio(1e9)).nnz_per_row() == [2] * 40
    assert np.array_equal(
        build_weights(pl, SelectionPolicy.ratio(0.5)).to_dense(),
        build_weights(pl, SelectionPolicy.single_label()).to_dense(),
    )
