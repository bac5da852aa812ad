"""Independent pure-Python oracles for the forest tests."""


def gini_of(labels):
    n = len(labels)
    if n == 0:
        return 0.0
    f = sum(1 for v in labels if v == 1) / n
    return 1.0 - f * f - (1 - f) * (1 - f)


def exhaustive_split(X, y, features=None, tol=1e-12):
    """Best (feature, threshold) by weighted Gini over midpoints of distinct values.

    Ties go to the lowest feature, then the lowest threshold.
    """
    n = len(y)
    d = len(X[0])
    candidates = []
    for f in (range(d) if features is None else sorted(features)):
        vals = sorted({row[f] for row in X})
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            if not lo <= thr < hi:
                thr = lo
            left = [y[i] for i in range(n) if X[i][f] <= thr]
            right = [y[i] for i in range(n) if X[i][f] > thr]
            imp = len(left) / n * gini_of(left) + len(right) / n * gini_of(right)
            candidates.append((imp, f, thr))
    if not candidates:
        return None
    best = min(c[0] for c in candidates)
    for imp, f, thr in candidates:
        if imp <= best + tol:
            return f, thr, imp


def walk(tree, row):
    node = 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if row[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
    return int(tree.label[node])


def tally_predict(forest, row):
    votes = [walk(t, row) for t in forest.estimators_]
    fail = votes.count(1)
    return (1 if fail >= len(votes) - fail else -1), fail
