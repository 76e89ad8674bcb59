"""Left-to-right cascade of binary forests predicting an ordinal cutoff class."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .forest import Forest, ForestParams, dump_models, load_models, train_forest
from .labeling import CutoffGrid, multiclass_to_binary

DEFAULT_T = 0.75
T_GRID = (0.75, 0.80, 0.85)


class ManifestMismatchError(ValueError):
    pass


@dataclass
class CascadeModel:
    stages: list[Forest]
    grid: CutoffGrid
    t: float = DEFAULT_T
    manifest_hash: str = ""

    def __post_init__(self):
        if len(self.stages) != self.grid.c - 1:
            raise ValueError(f"{len(self.stages)} stages for a grid of {self.grid.c} cutoffs")

    def stage_proba(self, X) -> np.ndarray:
        """Pr(class 0) of every stage: shape (n, c-1)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.column_stack([f.predict_proba(X)[:, 0] for f in self.stages])

    def predict(self, X, t: float | None = None) -> np.ndarray:
        return cascade_classes(self.stage_proba(X), self.t if t is None else t)

    def check_manifest(self, manifest_hash: str):
        if self.manifest_hash and manifest_hash != self.manifest_hash:
            raise ManifestMismatchError(
                f"feature manifest {manifest_hash[:12]} does not match model's "
                f"{self.manifest_hash[:12]}")


def cascade_classes(p0: np.ndarray, t: float) -> np.ndarray:
    """Vectorised exit rule over stage probabilities ``p0`` of shape (n, c-1).

    A stage fires when its prediction is class 0 (Pr(0) >= 0.5, ties to
    the lower class) and Pr(0) > t. The class is the first firing stage,
    or c when none fires.
    """
    if not 0 <= t < 1:
        raise ValueError("t must lie in [0, 1)")
    p0 = np.atleast_2d(p0)
    fire = (p0 >= 0.5) & (p0 > t)
    c = p0.shape[1] + 1
    return np.where(fire.any(axis=1), fire.argmax(axis=1) + 1, c)


def lr_cascade_predict(model: CascadeModel, x, t: float | None = None) -> int:
    t = model.t if t is None else t
    if not 0 <= t < 1:
        raise ValueError("t must lie in [0, 1)")
    x = np.asarray(x, dtype=np.float64)[None, :]
    for i, stage in enumerate(model.stages, 1):
        p0 = float(stage.predict_proba(x)[0, 0])
        if p0 >= 0.5 and p0 > t:
            return i
    return model.grid.c


def train_cascade(X, labels: Sequence[int], grid: CutoffGrid,
                  params: ForestParams = ForestParams(), t: float = DEFAULT_T,
                  manifest_hash: str = "") -> CascadeModel:
    binary = multiclass_to_binary(labels, grid.c)
    stages = []
    for i, y in enumerate(binary):
        stage_params = dataclasses.replace(params, seed=params.seed + i)
        stages.append(train_forest(X, y, stage_params, n_classes=2))
    return CascadeModel(stages, grid, t, manifest_hash)


def train_multilabel(X, labels: Sequence[int], c: int,
                     params: ForestParams = ForestParams()) -> Forest:
    return train_forest(X, np.asarray(labels) - 1, params, n_classes=c)


def predict_multilabel(model: Forest, X) -> np.ndarray:
    return model.predict(np.atleast_2d(X)) + 1


def save_cascade(model: CascadeModel, path):
    extra = {"kind": "lr-cascade", "knob": model.grid.knob, "grid": list(model.grid.values),
             "t": model.t, "manifest_hash": model.manifest_hash}
    forests = {f"stage{i}": f for i, f in enumerate(model.stages, 1)}
    Path(path).write_bytes(dump_models(forests, extra))


def load_cascade(path) -> CascadeModel:
    forests, extra = load_models(Path(path).read_bytes())
    if extra.get("kind") != "lr-cascade":
        raise ValueError(f"{path} is not a cascade model")
    stages = [forests[f"stage{i}"] for i in range(1, len(forests) + 1)]
    return CascadeModel(stages, CutoffGrid(extra["knob"], tuple(extra["grid"])),
                        extra["t"], extra["manifest_hash"])
