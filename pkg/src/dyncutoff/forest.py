"""Random forests stored as plain arrays, with a portable binary model format.

Fitting is delegated to scikit-learn (bootstrap samples, random feature
subsets per split, Gini impurity); each fitted tree is then copied into a
:class:`DecisionTree` holding split features, thresholds and per-leaf class
counts. Prediction, probability estimation and serialization use only
these arrays.
"""

from __future__ import annotations

import io
import json
import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"DYNCUTRF"
MODEL_VERSION = 1


@dataclass
class DecisionTree:
    """Binary tree; ``feature[i] < 0`` marks a leaf. Samples go left when x <= threshold."""

    feature: np.ndarray    # int32 [nodes]
    threshold: np.ndarray  # float64 [nodes]
    left: np.ndarray       # int32 [nodes]
    right: np.ndarray      # int32 [nodes]
    counts: np.ndarray     # float64 [nodes, classes], class counts of training samples

    def leaves(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def leaf_proba(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaves(X)]
        return c / c.sum(axis=1, keepdims=True)


@dataclass
class Forest:
    trees: list[DecisionTree]
    n_classes: int
    n_features: int
    metadata: dict = field(default_factory=dict)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"feature vector length {X.shape[1]} != model's {self.n_features}")
        total = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            total += tree.leaf_proba(X)
        return total / len(self.trees)

    def predict(self, X) -> np.ndarray:
        # argmax takes the first maximum, so ties go to the lowest class
        return self.predict_proba(X).argmax(axis=1)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    seed: int = 20160717
    n_jobs: int = 1  # parallel fitting; results do not depend on it

    def max_features(self, n_features: int) -> int:
        return max(1, math.ceil(math.sqrt(n_features)))


def constant_forest(cls: int, n_classes: int, n_features: int, metadata=None) -> Forest:
    counts = np.zeros((1, n_classes))
    counts[0, cls] = 1.0
    tree = DecisionTree(np.array([-1], dtype=np.int32), np.zeros(1),
                        np.array([-1], dtype=np.int32), np.array([-1], dtype=np.int32), counts)
    return Forest([tree], n_classes, n_features, dict(metadata or {}, constant_class=cls))


def train_forest(X, y, params: ForestParams = ForestParams(), n_classes: int | None = None,
                 oob: bool = False) -> Forest:
    """Fit a forest on integer labels ``0 .. n_classes-1``."""
    from sklearn.ensemble import RandomForestClassifier

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    n_classes = n_classes or int(y.max()) + 1
    meta = {
        "algorithm": "random-forest",
        "criterion": "gini",
        "bootstrap": "n_samples",
        "n_trees": params.n_trees,
        "max_depth": params.max_depth,
        "min_leaf": params.min_leaf,
        "max_features": params.max_features(X.shape[1]),
        "seed": params.seed,
        "n_samples": len(X),
    }
    present = np.unique(y)
    if len(present) == 1:
        warnings.warn(f"single-class training set (class {present[0]}); using a constant model",
                      stacklevel=2)
        return constant_forest(int(present[0]), n_classes, X.shape[1], meta)

    rf = RandomForestClassifier(
        n_estimators=params.n_trees,
        criterion="gini",
        max_depth=params.max_depth,
        min_samples_leaf=params.min_leaf,
        max_features=params.max_features(X.shape[1]),
        bootstrap=True,
        oob_score=oob,
        random_state=params.seed,
        n_jobs=params.n_jobs,
    )
    rf.fit(X, y)
    if oob:
        meta["oob_accuracy"] = float(rf.oob_score_)
    trees = [_from_sklearn(est.tree_, rf.classes_, n_classes) for est in rf.estimators_]
    return Forest(trees, n_classes, X.shape[1], meta)


def _from_sklearn(t, classes, n_classes: int) -> DecisionTree:
    # tree_.value holds per-node class fractions; scale back to bootstrap counts
    frac = t.value[:, 0, :]
    weight = t.weighted_n_node_samples[:, None]
    counts = np.zeros((t.node_count, n_classes))
    counts[:, classes] = np.rint(frac * weight)
    leaf = t.children_left < 0
    return DecisionTree(
        feature=np.where(leaf, -1, t.feature).astype(np.int32),
        threshold=np.where(leaf, 0.0, t.threshold).astype(np.float64),
        left=t.children_left.astype(np.int32),
        right=t.children_right.astype(np.int32),
        counts=counts,
    )


# -- model files ------------------------------------------------------------
#
# MAGIC | u32 version | u32 header length | JSON header (utf-8, sorted keys) | payload
# The header lists every forest with its trees' node counts; the payload is,
# per tree in order: feature <i4, threshold <f8, left <i4, right <i4,
# counts <f8 [nodes, classes].

def _forest_header(f: Forest) -> dict:
    return {
        "n_classes": f.n_classes,
        "n_features": f.n_features,
        "metadata": f.metadata,
        "nodes": [len(t.feature) for t in f.trees],
    }


def _write_tree(buf: io.BytesIO, t: DecisionTree):
    for arr, dt in ((t.feature, "<i4"), (t.threshold, "<f8"), (t.left, "<i4"),
                    (t.right, "<i4"), (t.counts, "<f8")):
        buf.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def _read(buf: memoryview, pos: int, dtype: str, count: int) -> tuple[np.ndarray, int]:
    size = np.dtype(dtype).itemsize * count
    arr = np.frombuffer(buf[pos:pos + size], dtype=dtype).astype(np.dtype(dtype).newbyteorder("="))
    return arr, pos + size


def dump_models(forests: dict[str, Forest], extra: dict | None = None) -> bytes:
    header = {"format": "dyncutoff-forest", "version": MODEL_VERSION,
              "forests": {k: _forest_header(f) for k, f in forests.items()},
              "order": list(forests), "extra": extra or {}}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", MODEL_VERSION, len(hbytes)))
    buf.write(hbytes)
    for key in forests:
        for t in forests[key].trees:
            _write_tree(buf, t)
    return buf.getvalue()


def load_models(data: bytes) -> tuple[dict[str, Forest], dict]:
    if not data.startswith(MAGIC):
        raise ValueError("not a dyncutoff model file")
    version, hlen = struct.unpack_from("<II", data, len(MAGIC))
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    start = len(MAGIC) + 8
    header = json.loads(data[start:start + hlen].decode())
    view = memoryview(data)
    pos = start + hlen
    forests = {}
    for key in header["order"]:
        fh = header["forests"][key]
        trees = []
        for n in fh["nodes"]:
            feature, pos = _read(view, pos, "<i4", n)
            threshold, pos = _read(view, pos, "<f8", n)
            left, pos = _read(view, pos, "<i4", n)
            right, pos = _read(view, pos, "<i4", n)
            counts, pos = _read(view, pos, "<f8", n * fh["n_classes"])
            trees.append(DecisionTree(feature, threshold, left, right,
                                      counts.reshape(n, fh["n_classes"])))
        forests[key] = Forest(trees, fh["n_classes"], fh["n_features"], fh["metadata"])
    if pos != len(data):
        raise ValueError("trailing bytes in model file")
    return forests, header["extra"]
