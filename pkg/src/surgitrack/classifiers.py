"""Desk-scale skill classifiers: linear, SVM, random forest and MLP.

All four are trained from scratch (no external ML dependency), standardize
features with training-set statistics, and are fully deterministic under a
seed. "linear" is multinomial logistic regression; the SVM is a linear
soft-margin machine trained one-vs-rest by subgradient descent; the forest
uses CART trees over bootstrap samples with random feature subsets; the MLP
has one hidden layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("linear", "svm", "rf", "mlp")

_DEFAULTS = {
    "linear": {"epochs": 500, "lr": 0.1, "l2": 1e-4},
    "svm": {"epochs": 500, "lr": 0.1, "l2": 1e-3},
    "rf": {"n_trees": 50, "max_depth": 12, "min_leaf": 1},
    "mlp": {"epochs": 500, "lr": 1e-2, "hidden_units": 16, "l2": 1e-4},
}


@dataclass
class ClassifierModel:
    kind: str
    classes: list
    mu: np.ndarray
    sigma: np.ndarray
    params: dict = field(default_factory=dict)
    feature_mask: np.ndarray | None = None
    seed: int = 0


def _standardize_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return mu, sigma


def _prepare(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    if model.feature_mask is not None:
        X = X[:, model.feature_mask]
    return (X - model.mu) / model.sigma


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(
    kind: str,
    X,
    y,
    seed: int = 0,
    feature_mask=None,
    **params,
) -> ClassifierModel:
    """Fit one classifier; a single-class training set yields a constant model."""
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y)
    if Xa.ndim != 2 or Xa.shape[0] != ya.shape[0]:
        raise ValueError("X must be (n_samples, n_features) aligned with y")
    if Xa.shape[0] == 0:
        raise ValueError("empty training set")
    mask = None
    if feature_mask is not None:
        mask = np.asarray(feature_mask)
        if mask.dtype != bool:
            idx = mask
            mask = np.zeros(Xa.shape[1], dtype=bool)
            mask[idx] = True
        Xa = Xa[:, mask]
    classes = sorted(set(ya.tolist()), key=repr)
    mu, sigma = _standardize_fit(Xa)
    model = ClassifierModel(kind=kind, classes=classes, mu=mu, sigma=sigma,
                            feature_mask=mask, seed=seed)
    if len(classes) == 1:
        model.params = {"constant": classes[0]}
        return model
    opts = dict(_DEFAULTS[kind])
    opts.update(params)
    Xs = (Xa - mu) / sigma
    yi = np.array([classes.index(v) for v in ya.tolist()], dtype=np.int64)
    rng = np.random.default_rng(seed)
    if kind == "linear":
        model.params = _fit_logistic(Xs, yi, len(classes), **opts)
    elif kind == "svm":
        model.params = _fit_svm(Xs, yi, len(classes), **opts)
    elif kind == "rf":
        model.params = _fit_forest(Xs, yi, len(classes), rng, **opts)
    else:
        model.params = _fit_mlp(Xs, yi, len(classes), rng, **opts)
    return model


def predict(model: ClassifierModel, x):
    """Predict labels for one feature vector or a matrix of them."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if "constant" in model.params:
        out = [model.params["constant"]] * arr.shape[0]
        return out[0] if single else np.array(out)
    Xs = _prepare(model, arr)
    kind = model.kind
    if kind == "linear":
        scores = Xs @ model.params["W"].T + model.params["b"]
    elif kind == "svm":
        scores = Xs @ model.params["W"].T + model.params["b"]
    elif kind == "mlp":
        hidden = np.tanh(Xs @ model.params["W1"] + model.params["b1"])
        scores = hidden @ model.params["W2"] + model.params["b2"]
    else:
        votes = np.zeros((Xs.shape[0], len(model.classes)))
        for tree in model.params["trees"]:
            pred = _tree_predict(tree, Xs)
            for i, c in enumerate(pred):
                votes[i, c] += 1.0
        scores = votes
    idx = np.argmax(scores, axis=1)  # ties resolve to the lowest class index
    out = np.array([model.classes[i] for i in idx])
    return out[0] if single else out


def accuracy(model: ClassifierModel, X, y) -> float:
    pred = predict(model, np.asarray(X, dtype=np.float64))
    ya = np.asarray(y)
    return float(np.mean(pred == ya))


# -- gradient-trained models ---------------------------------------------------


def _fit_logistic(Xs, yi, n_classes, epochs, lr, l2):
    n, d = Xs.shape
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), yi] = 1.0
    for _ in range(epochs):
        probs = _softmax(Xs @ W.T + b)
        err = probs - onehot
        W -= lr * (err.T @ Xs / n + l2 * W)
        b -= lr * err.mean(axis=0)
    return {"W": W, "b": b}


def _fit_svm(Xs, yi, n_classes, epochs, lr, l2):
    n, d = Xs.shape
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    for c in range(n_classes):
        t = np.where(yi == c, 1.0, -1.0)
        w = np.zeros(d)
        bc = 0.0
        for _ in range(epochs):
            margins = t * (Xs @ w + bc)
            active = margins < 1.0
            grad_w = l2 * w - (t[active, None] * Xs[active]).sum(axis=0) / n
            grad_b = -t[active].sum() / n
            w -= lr * grad_w
            bc -= lr * grad_b
        W[c] = w
        b[c] = bc
    return {"W": W, "b": b}


def _fit_mlp(Xs, yi, n_classes, rng, epochs, lr, hidden_units, l2):
    n, d = Xs.shape
    W1 = rng.normal(0.0, 1.0 / math.sqrt(d), (d, hidden_units))
    b1 = np.zeros(hidden_units)
    W2 = rng.normal(0.0, 1.0 / math.sqrt(hidden_units), (hidden_units, n_classes))
    b2 = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), yi] = 1.0
    for _ in range(epochs):
        hidden = np.tanh(Xs @ W1 + b1)
        probs = _softmax(hidden @ W2 + b2)
        err = probs - onehot  # (n, C)
        gW2 = hidden.T @ err / n + l2 * W2
        gb2 = err.mean(axis=0)
        dh = (err @ W2.T) * (1.0 - hidden * hidden)
        gW1 = Xs.T @ dh / n + l2 * W1
        gb1 = dh.mean(axis=0)
        W2 -= lr * gW2
        b2 -= lr * gb2
        W1 -= lr * gW1
        b1 -= lr * gb1
    return {"W1": W1, "b1": b1, "W2": W2, "b2": b2}


# -- random forest ---------------------------------------------------------------


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float((p * p).sum())


def _build_tree(Xs, yi, n_classes, rng, depth, max_depth, min_leaf, n_sub):
    counts = np.bincount(yi, minlength=n_classes)
    if depth >= max_depth or len(yi) <= min_leaf or _gini(counts) == 0.0:
        return {"leaf": int(np.argmax(counts))}
    d = Xs.shape[1]
    feats = np.sort(rng.choice(d, size=min(n_sub, d), replace=False))
    best = None  # (impurity, feature, threshold)
    for f in feats:
        vals = np.unique(Xs[:, f])
        if len(vals) < 2:
            continue
        thresholds = (vals[:-1] + vals[1:]) / 2.0
        for thr in thresholds:
            left = Xs[:, f] < thr
            nl = int(left.sum())
            nr = len(yi) - nl
            if nl == 0 or nr == 0:
                continue
            cl = np.bincount(yi[left], minlength=n_classes)
            cr = counts - cl
            score = (nl * _gini(cl) + nr * _gini(cr)) / len(yi)
            if best is None or score < best[0]:
                best = (score, int(f), float(thr))
    if best is None:
        return {"leaf": int(np.argmax(counts))}
    _, f, thr = best
    left = Xs[:, f] < thr
    return {
        "feature": f,
        "threshold": thr,
        "left": _build_tree(Xs[left], yi[left], n_classes, rng, depth + 1, max_depth, min_leaf, n_sub),
        "right": _build_tree(Xs[~left], yi[~left], n_classes, rng, depth + 1, max_depth, min_leaf, n_sub),
    }


def _fit_forest(Xs, yi, n_classes, rng, n_trees, max_depth, min_leaf):
    n, d = Xs.shape
    n_sub = max(1, int(math.sqrt(d)))
    trees = []
    for _ in range(n_trees):
        idx = rng.integers(0, n, n)
        trees.append(
            _build_tree(Xs[idx], yi[idx], n_classes, rng, 0, max_depth, min_leaf, n_sub)
        )
    return {"trees": trees}


def _tree_predict(tree, Xs) -> list[int]:
    out = []
    for row in Xs:
        node = tree
        while "leaf" not in node:
            node = node["left"] if row[node["feature"]] < node["threshold"] else node["right"]
        out.append(node["leaf"])
    return out
