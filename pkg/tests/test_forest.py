import json

import numpy as np
import pytest
from sklearn.base import clone

from ccforest.exceptions import DimensionMismatch, EmptyMatrix, SingleClassTraining
from ccforest.forest import DecisionTree, RandomForest, Tree, gini, train_forest

from forest_oracles import exhaustive_split, gini_of, tally_predict, walk


def separable():
    X = np.array([[0.0]] * 5 + [[10.0]] * 5)
    y = np.array([-1] * 5 + [1] * 5)
    return X, y


def test_separable_full_accuracy():
    X, y = separable()
    f = train_forest(X, y, n_trees=25, seed=1)
    assert (f.predict(X) == y).all()


def test_same_seed_identical_trees():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 5))
    y = np.where(X[:, 0] + X[:, 1] > 0, 1, -1)
    a = RandomForest(n_trees=10, seed=7).fit(X, y)
    b = RandomForest(n_trees=10, seed=7).fit(X, y)
    assert a.to_json() == b.to_json()
    c = RandomForest(n_trees=10, seed=8).fit(X, y)
    assert a.to_json() != c.to_json()


def test_tree_streams_independent_of_forest_size():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    y = np.where(X[:, 2] > 0.1, 1, -1)
    small = RandomForest(n_trees=3, seed=5).fit(X, y)
    big = RandomForest(n_trees=8, seed=5).fit(X, y)
    for a, b in zip(small.estimators_, big.estimators_):
        assert a.to_dict() == b.to_dict()


def test_root_split_matches_oracle_on_bootstrap():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 2)).round(2)
    y = np.where(X[:, 0] - 0.5 * X[:, 1] > 0, 1, -1)
    f = RandomForest(n_trees=1, max_features=None, seed=3).fit(X, y)
    sample = f.estimators_samples_[0]
    Xs, ys = X[sample].tolist(), y[sample].tolist()
    feat, thr, _ = exhaustive_split(Xs, ys)
    tree = f.estimators_[0]
    assert (tree.feature[0], tree.threshold[0]) == (feat, thr)


def test_every_split_optimal_with_all_features():
    rng = np.random.default_rng(4)
    X = rng.integers(0, 4, size=(25, 3)).astype(float)
    y = np.where(rng.random(25) < 0.4, 1, -1)
    tree = DecisionTree(max_features=None).fit(X, y).tree_

    def check(node, idx):
        if tree.feature[node] < 0:
            return
        sub_X = [X[i].tolist() for i in idx]
        sub_y = [int(y[i]) for i in idx]
        feat, thr, _ = exhaustive_split(sub_X, sub_y)
        assert (tree.feature[node], tree.threshold[node]) == (feat, thr)
        mask = X[idx, feat] <= thr
        check(tree.left[node], idx[mask])
        check(tree.right[node], idx[~mask])

    check(0, np.arange(25))


def test_leaf_counts_and_labels():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 3))
    y = np.where(rng.random(30) < 0.5, 1, -1)
    tree = DecisionTree(max_depth=2).fit(X, y).tree_
    leaves = tree.feature < 0
    assert tree.counts[leaves].sum() == 30
    assert (tree.counts.sum(axis=1) >= 1).all()
    for i in np.flatnonzero(leaves):
        p, fcount = tree.counts[i]
        assert tree.label[i] == (1 if fcount >= p else -1)
    internal = ~leaves
    assert (tree.feature[internal] < 3).all()


def test_max_depth_and_min_samples_split():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 2))
    y = np.where(rng.random(50) < 0.5, 1, -1)
    stump = DecisionTree(max_depth=1).fit(X, y).tree_
    assert stump.node_count == 3
    assert DecisionTree(min_samples_split=51).fit(X, y).tree_.node_count == 1


def test_predict_votes_conservation_and_tally():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 4))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1, -1)
    f = RandomForest(n_trees=11, seed=2).fit(X, y)
    rows = rng.normal(size=(50, 4))
    votes = f.predict_votes(rows)
    assert (votes.sum(axis=1) == 11).all()
    pred = f.predict(rows)
    for row, v, p in zip(rows, votes, pred):
        expected, fail = tally_predict(f, row)
        assert (p, v[0]) == (expected, fail)


def _leaf_tree(label):
    return Tree(
        feature=np.array([-1]), threshold=np.array([0.0]), left=np.array([-1]),
        right=np.array([-1]), counts=np.array([[0, 1] if label == 1 else [1, 0]]),
        label=np.array([label]),
    )


def _forest_of(labels, d=2):
    f = RandomForest(n_trees=len(labels))
    f.estimators_ = [_leaf_tree(v) for v in labels]
    f.n_features_in_ = d
    f.classes_ = np.array([-1, 1])
    return f


def test_single_failing_leaf_votes_failing():
    f = _forest_of([1])
    assert f.predict(np.random.default_rng(0).normal(size=(5, 2))).tolist() == [1] * 5


def test_majority_and_tie():
    assert _forest_of([-1, -1, 1]).predict([[0, 0]]).tolist() == [-1]
    assert _forest_of([-1, 1]).predict([[0, 0]]).tolist() == [1]
    assert _forest_of([1] * 10).predict_votes([[0, 0]]).tolist() == [[10, 0]]


def test_bootstrap_cardinality():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(17, 2))
    y = np.r_[[1] * 5, [-1] * 12]
    f = RandomForest(n_trees=6).fit(X, y)
    assert all(len(s) == 17 for s in f.estimators_samples_)
    assert len(f.estimators_) == f.n_trees


def test_errors():
    X, y = separable()
    with pytest.raises(SingleClassTraining):
        RandomForest().fit(X, np.ones(10))
    with pytest.raises(EmptyMatrix):
        RandomForest().fit(np.zeros((0, 2)), [])
    with pytest.raises(EmptyMatrix):
        RandomForest().fit(np.zeros((3, 0)), [1, -1, 1])
    with pytest.raises(ValueError):
        RandomForest().fit(X, np.r_[[0] * 5, [1] * 5])
    f = RandomForest(n_trees=3).fit(X, y)
    with pytest.raises(DimensionMismatch):
        f.predict([[1.0, 2.0]])


def test_max_features_resolution():
    X = np.random.default_rng(0).normal(size=(10, 10))
    y = np.r_[[1] * 5, [-1] * 5]
    assert RandomForest(n_trees=1).fit(X, y).max_features_ == 4
    assert RandomForest(n_trees=1, max_features=50).fit(X, y).max_features_ == 10
    assert RandomForest(n_trees=1, max_features=None).fit(X, y).max_features_ == 10


def test_balanced_class_weight_changes_leaf_vote():
    # 1 failing row hidden among 3 identical passing rows
    X = np.zeros((4, 1))
    y = np.array([1, -1, -1, -1])
    plain = DecisionTree().fit(X, y).predict([[0.0]])
    balanced = DecisionTree(class_weight="balanced").fit(X, y).predict([[0.0]])
    assert plain.tolist() == [-1] and balanced.tolist() == [1]


def test_gini_helper_matches_oracle():
    for p, f in [(0, 0), (3, 0), (2, 2), (1, 4)]:
        assert gini(p, f) == pytest.approx(gini_of([-1] * p + [1] * f))


def test_json_dump_and_estimator_api():
    X, y = separable()
    f = RandomForest(n_trees=2, seed=4).fit(X, y)
    doc = json.loads(f.to_json())
    assert len(doc["trees"]) == 2 and doc["dimension"] == 1
    root = doc["trees"][0]
    assert root["type"] in ("split", "leaf")
    assert clone(f).get_params() == f.get_params()
    assert f.score(X, y) == 1.0
    walked = [walk(f.estimators_[0], row) for row in X]
    assert walked == f.estimators_[0].predict(X).tolist()
