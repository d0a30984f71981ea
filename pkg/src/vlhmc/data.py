"""Dataset ingestion and classifier evaluation for the BLR experiments.

CSV loading with missing-value row dropping, feature standardization,
stratified splitting, and posterior-predictive evaluation (accuracy and
AUC). Datasets are immutable after load.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .rngs import as_generator

logger = logging.getLogger(__name__)

MISSING_TOKENS = {"", "?", "na", "nan", "null"}


class AucUndefinedError(ValueError):
    """AUC is undefined on a single-class test set; carries the accuracy."""

    def __init__(self, accuracy: float):
        super().__init__(
            f"AUC undefined: test set contains a single class (accuracy={accuracy:.4f})"
        )
        self.accuracy = accuracy


@dataclass
class Dataset:
    """Feature matrix with binary labels."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        n = self.features.shape[0]
        if n != self.labels.shape[0]:
            raise ValueError("feature/label row mismatch")
        if n < 2:
            raise ValueError(f"dataset {self.name!r} has fewer than 2 rows")
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"dataset {self.name!r} contains non-finite features")
        classes = np.unique(self.labels)
        if not np.array_equal(classes, [0, 1]):
            raise ValueError(
                f"dataset {self.name!r} must contain both classes, found {classes}"
            )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def load_csv(
    path,
    label_column,
    positive_label: str,
    name: str | None = None,
    has_header: bool | None = None,
) -> Dataset:
    """Load a comma-separated file into a Dataset.

    ``label_column`` is a header name (str) or a 0-based column index (int;
    negative indices count from the end). Cells equal to ``positive_label``
    (string comparison after stripping) map to 1, every other label token to
    0 — more than two distinct label tokens is an error. Rows containing
    missing or unparseable feature cells are dropped and counted.
    ``has_header=None`` auto-detects by trying to parse the first row.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such dataset file: {path}")
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise ValueError(f"empty dataset file {path}")

    def _numeric(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    header: list[str] | None = None
    first_numericish = all(
        _numeric(c.strip()) or c.strip().lower() in MISSING_TOKENS for c in rows[0]
    )
    if has_header or (has_header is None and not first_numericish):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"dataset file {path} has a header but no data rows")
    width = len(header) if header is not None else len(rows[0])
    if isinstance(label_column, str):
        if header is None or label_column not in header:
            raise ValueError(f"label column {label_column!r} not present in {path}")
        label_pos = header.index(label_column)
    else:
        label_pos = int(label_column)
        if not -width <= label_pos < width:
            raise ValueError(f"label column index {label_pos} out of range for width {width}")
        label_pos %= width

    features, label_tokens, dropped = [], [], 0
    for row in rows:
        cells = [c.strip() for c in row]
        if len(cells) != width:
            dropped += 1
            continue
        label = cells[label_pos]
        feat_cells = [c for i, c in enumerate(cells) if i != label_pos]
        if any(c.lower() in MISSING_TOKENS for c in feat_cells) or not all(
            _numeric(c) for c in feat_cells
        ):
            dropped += 1
            continue
        features.append([float(c) for c in feat_cells])
        label_tokens.append(label)
    if not features:
        raise ValueError(f"no usable rows in {path} ({dropped} dropped)")
    distinct = sorted(set(label_tokens))
    if len(distinct) > 2:
        raise ValueError(f"non-binary labels in {path}: {distinct[:5]}")
    if positive_label not in distinct:
        raise ValueError(
            f"positive label {positive_label!r} absent from {path}; labels are {distinct}"
        )
    labels = np.array([1 if t == positive_label else 0 for t in label_tokens])
    if dropped:
        logger.info("dropped %d rows with missing/unparseable cells from %s", dropped, path)
    return Dataset(
        name=name or path.stem,
        features=np.asarray(features, dtype=np.float64),
        labels=labels,
        dropped_rows=dropped,
    )


def normalize(ds: Dataset) -> Dataset:
    """Standardize each feature column to zero mean and unit variance.

    Population standard deviation (divide by N). Constant columns are
    dropped (and logged); a dataset of only constant columns is an error.
    Idempotent on already standardized data.
    """
    std = ds.features.std(axis=0)
    keep = std > 0
    if not np.any(keep):
        raise ValueError(f"all feature columns of {ds.name!r} are constant")
    if not np.all(keep):
        logger.info(
            "dropping %d constant feature column(s) from %s", int((~keep).sum()), ds.name
        )
    x = ds.features[:, keep]
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    return Dataset(name=ds.name, features=x, labels=ds.labels, dropped_rows=ds.dropped_rows)


def split(ds: Dataset, test_fraction: float, rng) -> tuple[Dataset, Dataset]:
    """Stratified random split preserving the class ratio within one sample.

    Raises:
        ValueError: when the requested fraction would leave either side of
            any class empty.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    gen, _ = as_generator(rng)
    test_idx = []
    for cls in (0, 1):
        idx = np.nonzero(ds.labels == cls)[0]
        n_test = int(round(test_fraction * idx.size))
        if n_test == 0 or n_test == idx.size:
            raise ValueError(
                f"class {cls} would be emptied by test_fraction={test_fraction} "
                f"({idx.size} rows)"
            )
        test_idx.append(gen.permutation(idx)[:n_test])
    test_mask = np.zeros(ds.n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    train = Dataset(
        name=f"{ds.name}/train",
        features=ds.features[~test_mask],
        labels=ds.labels[~test_mask],
    )
    test = Dataset(
        name=f"{ds.name}/test",
        features=ds.features[test_mask],
        labels=ds.labels[test_mask],
    )
    return train, test


def evaluate_classifier(
    posterior_samples: np.ndarray, test: Dataset
) -> tuple[float, float]:
    """Posterior-predictive accuracy and AUC on a test set.

    The predictive score of row n is the posterior mean of
    ``sigmoid(w . phi_n)`` over the weight samples; accuracy thresholds the
    score at 0.5, AUC is the Mann-Whitney rank statistic with ties counted
    half.

    Raises:
        AucUndefinedError: single-class test set (the exception carries the
            accuracy, which is still well defined).
    """
    w = np.atleast_2d(np.asarray(posterior_samples, dtype=np.float64))
    if w.shape[0] < 1:
        raise ValueError("need at least one posterior sample")
    if w.shape[1] != test.dim:
        raise ValueError(
            f"posterior sample dimension {w.shape[1]} != test feature dimension {test.dim}"
        )
    logits = test.features @ w.T
    scores = _sigmoid(logits).mean(axis=1)
    accuracy = float(np.mean((scores > 0.5) == (test.labels == 1)))
    n_pos = int((test.labels == 1).sum())
    n_neg = test.n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise AucUndefinedError(accuracy)
    ranks = rankdata(scores)
    auc = (ranks[test.labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    return accuracy, float(auc)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def add_intercept(ds: Dataset) -> Dataset:
    """Append a constant-1 column (bias term) to the features."""
    return Dataset(
        name=ds.name,
        features=np.hstack([ds.features, np.ones((ds.n, 1))]),
        labels=ds.labels,
        dropped_rows=ds.dropped_rows,
    )
