"""Combo-k count features over execution traces, and PCA projection.

A combo-k key is a run of ``k`` consecutive statement ids in a trace; a test's
feature value for that key is how many times the run occurs (overlapping
windows count separately).  Columns are ordered lexicographically by key.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateInput, DimensionMismatch
from .spectra import CoverageRun

__all__ = [
    "combo_counts",
    "ComboVectorizer",
    "FeatureMatrix",
    "build_features",
    "PrincipalComponents",
    "fit_pca",
    "PCA_MODES",
]

ComboKey = tuple  # tuple of k statement ids

PCA_MODES = ("variance", "dims")


def combo_counts(sequence: Sequence[int], k: int) -> Counter:
    """Count the length-``k`` sliding windows of ``sequence``."""
    if k not in (1, 2, 3):
        raise ValueError(f"combo size must be 1, 2 or 3, got {k}")
    seq = tuple(sequence)
    return Counter(zip(*(seq[i:] for i in range(k))))


def key_name(key: ComboKey) -> str:
    return "|".join(str(s) for s in key)


class ComboVectorizer(TransformerMixin, BaseEstimator):
    """Turn statement traces into combo-k count vectors.

    ``fit`` learns the column vocabulary from the training traces; keys
    that only appear at ``transform`` time are ignored.

    Parameters
    ----------
    k : int, default=1
        Window length (1, 2 or 3).
    """

    def __init__(self, k=1):
        self.k = k

    def fit(self, traces: Iterable[Sequence[int]], y=None):
        keys = set()
        for seq in traces:
            keys.update(combo_counts(seq, self.k))
        self.columns_ = tuple(sorted(keys))
        self.vocabulary_ = {key: i for i, key in enumerate(self.columns_)}
        self.n_features_out_ = len(self.columns_)
        return self

    def transform(self, traces: Iterable[Sequence[int]]) -> np.ndarray:
        check_is_fitted(self, "vocabulary_")
        traces = list(traces)
        out = np.zeros((len(traces), len(self.columns_)), dtype=np.int64)
        vocab = self.vocabulary_
        for row, seq in enumerate(traces):
            for key, n in combo_counts(seq, self.k).items():
                col = vocab.get(key)
                if col is not None:
                    out[row, col] = n
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.asarray([key_name(key) for key in self.columns_], dtype=object)


@dataclass(frozen=True)
class FeatureMatrix:
    """Combo-k counts for every test of a run, rows in run order."""

    test_ids: tuple[str, ...]
    columns: tuple[ComboKey, ...]
    values: np.ndarray
    k: int

    @property
    def column_index(self) -> dict:
        return {key: i for i, key in enumerate(self.columns)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["test_id", *(key_name(c) for c in self.columns)])
        for tid, row in zip(self.test_ids, self.values):
            w.writerow([tid, *(int(v) for v in row)])
        return buf.getvalue()


def build_features(run: CoverageRun, k: int) -> FeatureMatrix:
    vec = ComboVectorizer(k=k)
    traces = [t.sequence for t in run.tests]
    values = vec.fit_transform(traces)
    return FeatureMatrix(run.test_ids, vec.columns_, values, k)


def _n_dims(fraction: float, d: int) -> int:
    # guard against 0.6 * 5 == 3.0000000000000004
    return max(1, math.ceil(fraction * d - 1e-9))


class PrincipalComponents(TransformerMixin, BaseEstimator):
    """PCA keeping a fraction of the variance or of the input dimensions.

    Parameters
    ----------
    mode : {"variance", "dims"}, default="variance"
        ``"variance"`` keeps the shortest prefix of components whose
        cumulative explained-variance ratio reaches ``fraction``;
        ``"dims"`` keeps ``ceil(fraction * n_features)`` components.
    fraction : float in (0, 1], default=0.6

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    components_ : ndarray of shape (n_components, n_features)
        Orthonormal principal directions, sign-normalised so the entry of
        largest magnitude is positive.
    explained_variance_ : ndarray of shape (n_components,)
    explained_variance_ratio_ : ndarray of shape (n_components,)
    """

    def __init__(self, mode="variance", fraction=0.6):
        self.mode = mode
        self.fraction = fraction

    def fit(self, X, y=None):
        if self.mode not in PCA_MODES:
            raise ValueError(f"mode must be one of {PCA_MODES}, got {self.mode!r}")
        if not 0 < self.fraction <= 1:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        X = check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
        n, d = X.shape
        if n < 2:
            raise DegenerateInput(f"PCA needs at least 2 rows, got {n}")
        self.n_features_in_ = d
        self.mean_ = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        pivot = np.argmax(np.abs(vt), axis=1)
        signs = np.sign(vt[np.arange(vt.shape[0]), pivot])
        signs[signs == 0] = 1.0
        vt = vt * signs[:, None]
        variance = s**2 / (n - 1)
        total = variance.sum()

        if self.mode == "dims":
            keep = _n_dims(self.fraction, d)
        elif total <= 0.0:
            keep = 1
        else:
            cumulative = np.cumsum(variance) / total
            keep = int(np.searchsorted(cumulative, self.fraction - 1e-12) + 1)
        keep = min(keep, vt.shape[0])

        self.components_ = vt[:keep]
        self.explained_variance_ = variance[:keep]
        self.explained_variance_ratio_ = (
            variance[:keep] / total if total > 0 else np.ones(keep) / keep
        )
        self.n_components_ = keep
        return self

    def _check_width(self, X):
        check_is_fitted(self, "components_")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[-1]}"
            )
        return X

    def transform(self, X):
        X = self._check_width(X)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self, "components_")
        return np.asarray(Z, dtype=np.float64) @ self.components_ + self.mean_


def fit_pca(X, mode="variance", fraction=0.6) -> PrincipalComponents:
    if isinstance(X, FeatureMatrix):
        X = X.values
    return PrincipalComponents(mode=mode, fraction=fraction).fit(X)
