"""Random forest of CART trees with Gini splits, written for determinism.

Labels are verdict codes: -1 (passing) and +1 (failing).  Every tree draws
from its own PCG64 stream keyed by ``(seed, tree_index)``, so a forest is
fully determined by the data, the hyperparameters and the seed, regardless
of the order in which trees are built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DimensionMismatch, EmptyMatrix, SingleClassTraining

__all__ = ["Tree", "DecisionTree", "RandomForest", "train_forest", "tree_rng", "gini"]

PASS, FAIL = -1, 1
_TOL = 1e-12


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """PCG64 generator for tree ``index`` of a forest seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def gini(n_pass: float, n_fail: float) -> float:
    n = n_pass + n_fail
    if n == 0:
        return 0.0
    return 1.0 - (n_pass / n) ** 2 - (n_fail / n) ** 2


def _resolve_max_features(max_features, d: int) -> int:
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if max_features == "log2":
        return max(1, math.ceil(math.log2(d))) if d > 1 else 1
    if isinstance(max_features, float) and 0 < max_features <= 1:
        return max(1, math.ceil(max_features * d))
    m = int(max_features)
    if m < 1:
        raise ValueError(f"max_features must be positive, got {max_features}")
    return min(m, d)


@dataclass(frozen=True)
class Tree:
    """Flat array form of a fitted tree.

    Node 0 is the root.  ``feature[i] == -1`` marks a leaf; ``counts[i]``
    holds (passing, failing) training sample counts reaching node ``i``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    label: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row of ``X`` lands in."""
        node = np.zeros(len(X), dtype=np.intp)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.label[self.apply(X)]

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {
                "type": "leaf",
                "label": int(self.label[node]),
                "class_counts": [int(c) for c in self.counts[node]],
            }
        return {
            "type": "split",
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }


@njit(cache=True)
def _grow(X, y, w, rng, max_features, max_depth, min_samples_split):
    """Grow one tree depth-first; returns flat node arrays.

    Candidate splits are scanned in (feature ascending, threshold ascending)
    order and a candidate replaces the incumbent only if its score beats it
    by more than ``_TOL``; the score is the sum over children of squared
    class mass over child mass, so maximising it minimises weighted Gini.
    ``max_depth < 0`` means unlimited.
    """
    n, d = X.shape
    cap = 2 * n - 1
    feature = np.full(cap, -1, dtype=np.intp)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.intp)
    right = np.full(cap, -1, dtype=np.intp)
    counts = np.zeros((cap, 2), dtype=np.int64)
    label = np.zeros(cap, dtype=np.int64)
    start = np.zeros(cap, dtype=np.intp)
    end = np.zeros(cap, dtype=np.intp)
    depth = np.zeros(cap, dtype=np.intp)
    samples = np.arange(n)
    fail_w = np.where(y == 1, w, 0.0)

    end[0] = n
    node_count = 1
    stack = np.empty(cap, dtype=np.intp)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = end[node]
        tot_w = 0.0
        tot_f = 0.0
        n_fail = 0
        for i in range(s, e):
            tot_w += w[samples[i]]
            tot_f += fail_w[samples[i]]
            if y[samples[i]] == 1:
                n_fail += 1
        counts[node, 0] = e - s - n_fail
        counts[node, 1] = n_fail
        label[node] = 1 if tot_f >= tot_w - tot_f else -1
        if n_fail == 0 or n_fail == e - s:
            continue
        if max_depth >= 0 and depth[node] >= max_depth:
            continue
        if e - s < min_samples_split:
            continue

        perm = rng.permutation(d)
        best_f = -1
        best_score = -np.inf
        best_thr = 0.0
        vals = np.empty(e - s)
        for blk in range(0, d, max_features):
            feats = np.sort(perm[blk:min(blk + max_features, d)])
            for f in feats:
                for i in range(s, e):
                    vals[i - s] = X[samples[i], f]
                order = np.argsort(vals, kind="mergesort")
                ln = 0.0
                lf = 0.0
                for i in range(e - s - 1):
                    j = samples[s + order[i]]
                    ln += w[j]
                    lf += fail_w[j]
                    lo = vals[order[i]]
                    hi = vals[order[i + 1]]
                    if hi <= lo:
                        continue
                    lp = ln - lf
                    rn = tot_w - ln
                    rf = tot_f - lf
                    rp = rn - rf
                    score = (lf * lf + lp * lp) / ln + (rf * rf + rp * rp) / rn
                    if score > best_score + _TOL:
                        best_score = score
                        best_f = f
                        thr = 0.5 * (lo + hi)
                        if not (lo <= thr and thr < hi):
                            thr = lo
                        best_thr = thr
            # draw further features only when every sampled one is constant
            if best_f >= 0:
                break
        if best_f < 0:
            continue

        # stable in-place partition of samples[s:e]
        buf = samples[s:e].copy()
        k = s
        for i in range(e - s):
            if X[buf[i], best_f] <= best_thr:
                samples[k] = buf[i]
                k += 1
        mid = k
        for i in range(e - s):
            if X[buf[i], best_f] > best_thr:
                samples[k] = buf[i]
                k += 1

        feature[node] = best_f
        threshold[node] = best_thr
        lc = node_count
        rc = node_count + 1
        node_count += 2
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = mid
        start[rc] = mid
        end[rc] = e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        stack[sp] = rc
        stack[sp + 1] = lc
        sp += 2

    return (feature[:node_count], threshold[:node_count], left[:node_count],
            right[:node_count], counts[:node_count], label[:node_count])


def _build_tree(X, y, w, rng, max_features, max_depth, min_samples_split) -> Tree:
    arrays = _grow(
        np.ascontiguousarray(X, dtype=np.float64), np.ascontiguousarray(y, dtype=np.int64),
        np.ascontiguousarray(w, dtype=np.float64), rng, int(max_features),
        -1 if max_depth is None else int(max_depth), int(min_samples_split),
    )
    return Tree(*arrays)


def _validate_training(X, y):
    X = np.asarray(X, dtype=np.float64)
    if np.ndim(X) != 2 or np.shape(X)[0] == 0 or np.shape(X)[1] == 0:
        raise EmptyMatrix(f"training matrix must be non-empty 2-D, got shape {np.shape(X)}")
    X, y = check_X_y(X, y, dtype=np.float64)
    y = y.astype(np.int64)
    labels = set(np.unique(y).tolist())
    if not labels <= {PASS, FAIL}:
        raise ValueError(f"labels must be -1/+1, got {sorted(labels)}")
    if len(labels) < 2:
        raise SingleClassTraining("training labels contain a single class")
    return X, y


def _sample_weights(y, class_weight):
    if class_weight is None:
        return np.ones(len(y))
    if class_weight == "balanced":
        n_fail = np.count_nonzero(y == FAIL)
        n_pass = len(y) - n_fail
        return np.where(y == FAIL, len(y) / (2.0 * n_fail), len(y) / (2.0 * n_pass))
    raise ValueError(f"class_weight must be None or 'balanced', got {class_weight!r}")


class _TreeClassifierMixin(ClassifierMixin):
    def _check_predict_input(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64, ensure_2d=False)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X


class DecisionTree(_TreeClassifierMixin, BaseEstimator):
    """Single CART tree over verdict labels, trained on the full sample."""

    def __init__(self, max_features=None, max_depth=None, min_samples_split=2,
                 class_weight=None, seed=0):
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.class_weight = class_weight
        self.seed = seed

    def fit(self, X, y):
        X, y = _validate_training(X, y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([PASS, FAIL])
        self.max_features_ = _resolve_max_features(self.max_features, X.shape[1])
        self.tree_ = _build_tree(
            X, y, _sample_weights(y, self.class_weight), tree_rng(self.seed, 0),
            self.max_features_, self.max_depth, self.min_samples_split,
        )
        return self

    def predict(self, X):
        return self.tree_.predict(self._check_predict_input(X))


class RandomForest(_TreeClassifierMixin, BaseEstimator):
    """Bagged CART trees with per-split feature subsampling and majority vote.

    Parameters
    ----------
    n_trees : int, default=100
    max_features : int, float, "sqrt", "log2" or None, default="sqrt"
        Features sampled per split; "sqrt" means ``ceil(sqrt(d))``.
    max_depth : int or None, default=None
    min_samples_split : int, default=2
    class_weight : None or "balanced", default=None
    bootstrap : bool, default=True
        Train each tree on ``n`` draws with replacement.
    seed : int, default=0

    Attributes
    ----------
    estimators_ : list of Tree
    estimators_samples_ : list of ndarray
        Row indices (with repetition) each tree was trained on.
    """

    def __init__(self, n_trees=100, max_features="sqrt", max_depth=None,
                 min_samples_split=2, class_weight=None, bootstrap=True, seed=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.class_weight = class_weight
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        X, y = _validate_training(X, y)
        n, d = X.shape
        self.n_features_in_ = d
        self.classes_ = np.array([PASS, FAIL])
        self.max_features_ = _resolve_max_features(self.max_features, d)
        w_all = _sample_weights(y, self.class_weight)
        self.estimators_ = []
        self.estimators_samples_ = []
        for t in range(self.n_trees):
            rng = tree_rng(self.seed, t)
            sample = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.estimators_samples_.append(sample)
            self.estimators_.append(_build_tree(
                X[sample], y[sample], w_all[sample], rng,
                self.max_features_, self.max_depth, self.min_samples_split,
            ))
        return self

    def predict_votes(self, X) -> np.ndarray:
        """Per-row tree tallies as an ``(n_rows, 2)`` array of (fail, pass)."""
        X = self._check_predict_input(X)
        fail = np.zeros(len(X), dtype=np.int64)
        for tree in self.estimators_:
            fail += tree.predict(X) == FAIL
        return np.column_stack([fail, len(self.estimators_) - fail])

    def predict(self, X):
        votes = self.predict_votes(X)
        # exact ties resolve to failing
        return np.where(votes[:, 0] >= votes[:, 1], FAIL, PASS)

    def to_json(self, **kwargs) -> str:
        check_is_fitted(self, "estimators_")
        doc = {
            "params": self.get_params(),
            "dimension": self.n_features_in_,
            "trees": [t.to_dict() for t in self.estimators_],
        }
        return json.dumps(doc, sort_keys=True, **kwargs)


def train_forest(X, y, **params) -> RandomForest:
    return RandomForest(**params).fit(X, y)
