"""Regression tasks, the Iris dataset and nearest-target classification."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .flow import measure_outputs
from .graph import Topology

MAX_ROW_SUM = 0.75
SPECIES = ("setosa", "versicolor", "virginica")
IRIS_COLUMNS = ("sepal_length", "sepal_width", "petal_length", "petal_width", "species")


@dataclass(frozen=True)
class RegressionTask:
    """Linear map ``yhat = amplification * M @ x`` with M of shape (n_out, n_in)."""

    M: np.ndarray
    amplification: float = 1.0

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if np.any(M < 0):
            raise ValueError("task matrix entries must be non-negative")
        if not self.amplification > 0:
            raise ValueError("amplification must be positive")
        object.__setattr__(self, "M", M)

    @property
    def n_inputs(self) -> int:
        return self.M.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.M.shape[0]


def gen_regression_task(n_inputs: int, n_outputs: int, seed: int) -> RegressionTask:
    """Uniform [0, 1] entries; rows summing above 0.75 are rescaled to 0.75."""
    if n_inputs < 1 or n_outputs < 1:
        raise ValueError("task dimensions must be at least 1")
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.0, 1.0, (n_outputs, n_inputs))
    sums = M.sum(axis=1)
    scale = np.where(sums > MAX_ROW_SUM, MAX_ROW_SUM / np.where(sums > 0, sums, 1.0), 1.0)
    return RegressionTask(M * scale[:, None])


def desired_output(task: RegressionTask, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return task.amplification * (x @ task.M.T)


# --- Iris -------------------------------------------------------------------


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # (n, 4) attributes in cm
    labels: np.ndarray  # (n,) species index into SPECIES

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.labels[idx])

    def class_means(self) -> np.ndarray:
        return np.stack([self.X[self.labels == c].mean(axis=0) for c in range(len(SPECIES))])


def _read_iris_text(source) -> tuple[str, str]:
    if source is None:
        ref = resources.files("beastal") / "data" / "iris.csv"
        return ref.read_text(), "bundled iris.csv"
    path = Path(source)
    return path.read_text(), str(path)


def load_iris(source=None) -> Dataset:
    """Parse and validate an Iris CSV (4 numeric columns + species name).

    Raises
    ------
    DatasetError
        On a malformed row (message carries the line number), an unknown
        species, or counts other than 150 rows / 50 per species.
    """
    text, name = _read_iris_text(source)
    reader = csv.reader(io.StringIO(text))
    rows, labels = [], []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip() == IRIS_COLUMNS[0]:
            continue
        if len(row) != 5:
            raise DatasetError(f"{name}:{lineno}: expected 5 fields, got {len(row)}")
        try:
            rows.append([float(v) for v in row[:4]])
        except ValueError:
            raise DatasetError(f"{name}:{lineno}: non-numeric attribute in {row[:4]}") from None
        species = row[4].strip().lower().removeprefix("iris-")
        if species not in SPECIES:
            raise DatasetError(f"{name}:{lineno}: unknown species {row[4]!r}")
        labels.append(SPECIES.index(species))

    labels = np.array(labels, dtype=int)
    counts = np.bincount(labels, minlength=3) if labels.size else np.zeros(3, int)
    if len(labels) != 150 or np.any(counts != 50):
        raise DatasetError(f"{name}: expected 150 rows with 50 per species, got {len(labels)} rows, counts {counts.tolist()}")
    return Dataset(np.array(rows), labels)


def split_dataset(dataset: Dataset, n_train: int = 30, seed: int = 0, stratified: bool = False) -> tuple[Dataset, Dataset]:
    """Random train/test partition without replacement."""
    n = len(dataset)
    if not 0 < n_train < n:
        raise ValueError(f"n_train must be in (0, {n}), got {n_train}")
    rng = np.random.default_rng(seed)
    if stratified:
        n_classes = len(SPECIES)
        if n_train % n_classes:
            raise ValueError("stratified split needs n_train divisible by the number of species")
        train_idx = np.concatenate([
            rng.choice(np.flatnonzero(dataset.labels == c), n_train // n_classes, replace=False)
            for c in range(n_classes)
        ])
    else:
        train_idx = rng.permutation(n)[:n_train]
    test_mask = np.ones(n, dtype=bool)
    test_mask[train_idx] = False
    return dataset.subset(np.sort(train_idx)), dataset.subset(np.flatnonzero(test_mask))


@dataclass(frozen=True)
class ClassificationTask:
    """Iris train/test split plus the set the targets are averaged over.

    The targets are built from the full dataset by default (every sample is
    passed through the network at each refresh); ``target_source="train"``
    restricts them to the training split.
    """

    dataset: Dataset
    train: Dataset
    test: Dataset
    target_source: str = "all"

    @property
    def n_inputs(self) -> int:
        return self.dataset.X.shape[1]

    @property
    def n_outputs(self) -> int:
        return len(SPECIES)

    @property
    def target_set(self) -> Dataset:
        if self.target_source == "all":
            return self.dataset
        if self.target_source == "train":
            return self.train
        raise ValueError(f"unknown target source {self.target_source!r}")


@dataclass(frozen=True)
class ClassificationTargets:
    vectors: np.ndarray  # (n_species, n_outputs)
    computed_at: int


def tokenize_targets(topology: Topology, R, dataset: Dataset, step: int = 0) -> ClassificationTargets:
    """Per-species target = network output for that species' mean attributes.

    For a linear network this equals the mean of the per-sample outputs.
    """
    return ClassificationTargets(measure_outputs(topology, R, dataset.class_means()), step)


def classify(y, targets) -> np.ndarray | int:
    """Index of the nearest target in L2; ties go to the lowest index."""
    T = targets.vectors if isinstance(targets, ClassificationTargets) else np.asarray(targets)
    y = np.asarray(y, dtype=float)
    d2 = ((np.atleast_2d(y)[:, None, :] - T[None, :, :]) ** 2).sum(axis=-1)
    pred = np.argmin(d2, axis=1)  # argmin returns the first minimum
    return pred if y.ndim == 2 else int(pred[0])


def accuracy(topology: Topology, R, test: Dataset, targets) -> float:
    Y = measure_outputs(topology, R, test.X)
    return float(np.mean(classify(Y, targets) == test.labels))
