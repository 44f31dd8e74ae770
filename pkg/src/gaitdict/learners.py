"""Training-side machinery: oversampling, classifiers, persistence.

The authenticator is a binary genuine/impostor model. Five classifier
kinds are supported, each with one fixed hyperparameter setting:

* ``knn``: 5 nearest neighbors, Euclidean;
* ``logistic``: L2-regularized logistic regression (penalty weight 1e-2,
  i.e. C = 100), up to 500 iterations;
* ``svm``: RBF kernel, C = 1, tolerance 1e-3, gamma = 1 / (n_features *
  mean per-feature variance) on the standardized training block;
* ``mlp``: one hidden layer of 50 relu units, SGD, learning rate 1e-3,
  up to 500 epochs;
* ``random_forest``: 100 gini trees, sqrt feature subsets, bootstrap.

Features are standardized inside fit (constant columns map to 0), and
training rows are sorted into a canonical order first so that fitting is
invariant to the order the caller assembled them in.
"""

from __future__ import annotations

import base64
import json
import pickle
import warnings
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.ensemble import RandomForestClassifier
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.neighbors import KNeighborsClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .features import GEN, IMP

CLASSIFIER_KINDS = ("knn", "logistic", "svm", "mlp", "random_forest")

SMOTE_NEIGHBORS = 5


def smote_oversample(
    X: np.ndarray, target_count: int, k: int = SMOTE_NEIGHBORS, rng=None
) -> np.ndarray:
    """Grow a minority block to exactly target_count rows.

    The originals are returned verbatim (first, in input order), followed
    by synthetic rows x + lam * (x_nn - x) with lam ~ U[0, 1] and x_nn one
    of the k nearest minority neighbors of x. With a single input row the
    synthetic rows are copies of it.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a non-empty 2-D array")
    n = X.shape[0]
    if target_count < n:
        raise ValueError(f"target_count {target_count} is below the {n} existing rows")
    rng = np.random.default_rng(rng)
    n_new = target_count - n
    if n_new == 0:
        return X.copy()

    if n == 1:
        neighbors = np.zeros((1, 1), dtype=np.intp)
    else:
        k_eff = min(k, n - 1)
        d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]

    rows = np.empty((n_new, X.shape[1]))
    for i in range(n_new):
        base = int(rng.integers(n))
        nn = X[neighbors[base, int(rng.integers(neighbors.shape[1]))]]
        lam = rng.uniform()
        rows[i] = X[base] + lam * (nn - X[base])
    return np.vstack([X, rows])


def build_classifier(kind: str, seed: int, gamma: float | None = None):
    """A fresh unfitted sklearn estimator for one of the five kinds."""
    # sklearn only accepts 32-bit random states; derived seeds are wider
    seed = int(seed) % (2**32)
    if kind == "knn":
        return KNeighborsClassifier(n_neighbors=5, metric="euclidean")
    if kind == "logistic":
        return LogisticRegression(C=100.0, penalty="l2", solver="lbfgs", max_iter=500)
    if kind == "svm":
        return SVC(kernel="rbf", C=1.0, tol=1e-3, gamma="scale" if gamma is None else gamma)
    if kind == "mlp":
        return MLPClassifier(
            hidden_layer_sizes=(50,),
            activation="relu",
            solver="sgd",
            learning_rate_init=1e-3,
            max_iter=500,
            random_state=seed,
        )
    if kind == "random_forest":
        return RandomForestClassifier(
            n_estimators=100,
            criterion="gini",
            max_features="sqrt",
            bootstrap=True,
            random_state=seed,
        )
    raise ValueError(f"unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}")


def _canonical_order(X: np.ndarray, y_codes: np.ndarray) -> np.ndarray:
    """Row permutation sorting by label then feature values, left to right."""
    keys = tuple(X[:, j] for j in reversed(range(X.shape[1]))) + (y_codes,)
    return np.lexsort(keys)


class GaitAuthenticator(BaseEstimator, ClassifierMixin):
    """Per-user genuine/impostor classifier over window features."""

    def __init__(self, kind: str = "random_forest", seed: int = 0):
        self.kind = kind
        self.seed = seed

    def fit(self, X, y):
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(
                f"unknown classifier kind {self.kind!r}; expected one of {CLASSIFIER_KINDS}"
            )
        X, y = check_X_y(X, y, dtype=np.float64)
        present = set(np.unique(y))
        if present != {GEN, IMP}:
            raise ValueError(f"training labels must contain both {GEN!r} and {IMP!r}")

        codes = (y == IMP).astype(np.intp)
        order = _canonical_order(X, codes)
        Xs, ys = X[order], y[order]

        self.scaler_ = StandardScaler().fit(Xs)
        Z = self.scaler_.transform(Xs)

        gamma = None
        if self.kind == "svm":
            var = float(Z.var())
            gamma = 1.0 / (Z.shape[1] * var) if var > 0 else 1.0
        self.classifier_ = build_classifier(self.kind, self.seed, gamma=gamma)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            self.classifier_.fit(Z, ys)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.unique(ys)
        return self

    def predict(self, X):
        check_is_fitted(self, "classifier_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, model was fit on {self.n_features_in_}"
            )
        return self.classifier_.predict(self.scaler_.transform(X))

    def genuine_rate(self, X) -> float:
        """Fraction of rows the model accepts as genuine."""
        pred = self.predict(X)
        return float(np.mean(pred == GEN))


MODEL_FORMAT = "gait-auth-model"


def model_filename(user: str, combo: str, kind: str) -> str:
    return f"{user}__{combo}__{kind}.json"


def save_model(model: GaitAuthenticator, path, metadata: dict | None = None) -> None:
    """Persist a fitted authenticator as JSON with a pickled payload."""
    check_is_fitted(model, "classifier_")
    doc = {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "seed": model.seed,
        "n_features": int(model.n_features_in_),
        "metadata": metadata or {},
        "payload": base64.b64encode(pickle.dumps(model)).decode("ascii"),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_model(path) -> tuple[GaitAuthenticator, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read model file {path}: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a {MODEL_FORMAT} file")
    model = pickle.loads(base64.b64decode(doc["payload"]))
    if not isinstance(model, GaitAuthenticator):
        raise ValueError(f"{path} payload is not an authenticator")
    return model, doc.get("metadata", {})
