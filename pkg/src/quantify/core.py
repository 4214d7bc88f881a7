"""Shared data model: datasets, score functions, CSV ingestion, seeding."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DataError(Exception):
    """Malformed input data or schema (file level, not statistical)."""


class EstimationError(Exception):
    """A statistical contract was violated (degenerate groups, no convergence...)."""


def rng_from(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator for ``seed`` and an optional derivation path.

    Every randomized routine in the package receives its generator through
    here, so replicate b of a study can use ``rng_from(seed, b)`` and stay
    independent of (and unaffected by) every other replicate.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _as_2d_float(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RawDataset:
    """Feature-level sample of one labeled and one unlabeled population.

    Rows with ``set_indicator == 1`` belong to the labeled population and
    must carry a class label.  Rows with ``set_indicator == 0`` belong to
    the population whose class prevalence is unknown; their labels are
    optional (``-1`` when absent) and are never used by the estimators,
    only by evaluation code that holds ground truth.
    """

    features: np.ndarray
    labels: np.ndarray
    set_indicator: np.ndarray
    covariate: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        features = _as_2d_float(self.features, "features")
        labels = np.asarray(self.labels, dtype=int)
        sets = np.asarray(self.set_indicator, dtype=int)
        n = features.shape[0]
        if labels.shape != (n,) or sets.shape != (n,):
            raise DataError("features, labels and set_indicator must agree in length")
        if not np.all(np.isfinite(features)):
            raise DataError("features contain non-finite values")
        if not np.all((sets == 0) | (sets == 1)):
            raise DataError("set indicator entries must be 0 or 1")
        if np.any(labels < -1):
            raise DataError("labels must be -1 (missing) or nonnegative")
        if np.any((sets == 1) & (labels < 0)):
            raise DataError("labeled rows must carry a class label")
        observed = np.unique(labels[labels >= 0])
        if observed.size and not np.array_equal(observed, np.arange(observed.size)):
            raise DataError(f"non-contiguous labels {observed.tolist()}; classes must be 0..k")
        covariate = self.covariate
        if covariate is not None:
            covariate = np.asarray(covariate, dtype=float)
            if covariate.shape != (n,):
                raise DataError("covariate must be one value per row")
            if not np.all(np.isfinite(covariate)):
                raise DataError("covariate contains non-finite values")
        for arr in (features, labels, sets, covariate):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "set_indicator", sets)
        object.__setattr__(self, "covariate", covariate)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        labels = self.labels[self.labels >= 0]
        return int(labels.max()) + 1 if labels.size else 0

    def labeled_class_indices(self, label: int) -> np.ndarray:
        return np.flatnonzero((self.set_indicator == 1) & (self.labels == label))

    def unlabeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.set_indicator == 0)


@dataclass(frozen=True)
class ScoredDataset:
    """Score values grouped by population: one unlabeled block, one per class."""

    unlabeled: np.ndarray
    classes: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        unlabeled = _as_2d_float(self.unlabeled, "unlabeled scores")
        classes = tuple(_as_2d_float(c, "class scores") for c in self.classes)
        m = unlabeled.shape[1]
        if any(c.shape[1] != m for c in classes):
            raise DataError("all score blocks must share the same dimension")
        for arr in (unlabeled, *classes):
            arr.setflags(write=False)
        object.__setattr__(self, "unlabeled", unlabeled)
        object.__setattr__(self, "classes", classes)

    @property
    def n_unlabeled(self) -> int:
        return self.unlabeled.shape[0]

    @property
    def class_counts(self) -> tuple[int, ...]:
        return tuple(c.shape[0] for c in self.classes)

    @property
    def n_score_dims(self) -> int:
        return self.unlabeled.shape[1]


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for :func:`load_csv`.

    ``score_columns`` marks columns that already hold classifier outputs, so
    no model has to be fitted; they are kept in the feature matrix and can be
    selected with :meth:`ExternalScore.from_names`.  When ``feature_columns``
    is ``None`` every column not claimed by another role is a feature.
    """

    set_column: str
    label_column: str | None = None
    feature_columns: tuple[str, ...] | None = None
    score_columns: tuple[str, ...] = ()
    covariate_column: str | None = None


def load_csv(path: str, schema: CsvSchema) -> RawDataset:
    """Read a CSV file into a :class:`RawDataset` according to ``schema``.

    Raises :class:`DataError` for a missing file, unknown schema columns,
    non-numeric feature entries, labeled rows without a label, or set
    indicators outside {0, 1}.
    """
    try:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty file")
            fieldnames = list(reader.fieldnames)
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    claimed = {schema.set_column}
    for column in (schema.set_column, schema.label_column, schema.covariate_column):
        if column is not None and column not in fieldnames:
            raise DataError(f"{path}: column {column!r} not found")
    if schema.label_column:
        claimed.add(schema.label_column)
    if schema.covariate_column:
        claimed.add(schema.covariate_column)

    if schema.feature_columns is None:
        feature_names = [c for c in fieldnames if c not in claimed]
    else:
        feature_names = list(schema.feature_columns)
    for column in schema.score_columns:
        if column not in feature_names:
            feature_names.append(column)
    for column in feature_names:
        if column not in fieldnames:
            raise DataError(f"{path}: column {column!r} not found")
    if not feature_names:
        raise DataError(f"{path}: no feature columns left after applying the schema")

    n = len(rows)
    features = np.empty((n, len(feature_names)))
    labels = np.empty(n, dtype=int)
    sets = np.empty(n, dtype=int)
    covariate = np.empty(n) if schema.covariate_column else None
    for i, row in enumerate(rows):
        line = i + 2  # header is line 1
        try:
            features[i] = [float(row[c]) for c in feature_names]
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}:{line}: non-numeric feature value") from exc
        raw_set = (row.get(schema.set_column) or "").strip()
        if raw_set not in ("0", "1"):
            raise DataError(f"{path}:{line}: set indicator must be 0 or 1, got {raw_set!r}")
        sets[i] = int(raw_set)
        raw_label = (row.get(schema.label_column) or "").strip() if schema.label_column else ""
        if raw_label == "":
            if sets[i] == 1:
                raise DataError(f"{path}:{line}: labeled row (set indicator 1) has no label")
            labels[i] = -1
        else:
            try:
                labels[i] = int(raw_label)
            except ValueError as exc:
                raise DataError(f"{path}:{line}: non-integer label {raw_label!r}") from exc
        if covariate is not None:
            try:
                covariate[i] = float(row[schema.covariate_column])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{line}: non-numeric covariate value") from exc

    return RawDataset(
        features=features,
        labels=labels,
        set_indicator=sets,
        covariate=covariate,
        feature_names=tuple(feature_names),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class ScoreFunction:
    """Maps a feature matrix to an ``(n, m)`` block of score values."""

    kind = "abstract"

    def scores(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(payload: dict) -> "ScoreFunction":
        kinds = {
            "external": ExternalScore,
            "logistic": LogisticScore,
            "rkhs": KernelScore,
        }
        try:
            cls = kinds[payload["kind"]]
        except KeyError as exc:
            raise DataError(f"unknown score function kind {payload.get('kind')!r}") from exc
        return cls._from_dict(payload)


@dataclass(frozen=True)
class ExternalScore(ScoreFunction):
    """Score columns that were computed outside the package."""

    columns: tuple[int, ...]
    kind = "external"

    @staticmethod
    def from_names(names: Sequence[str], data: RawDataset) -> "ExternalScore":
        if data.feature_names is None:
            raise DataError("dataset has no column names to resolve score columns against")
        indices = []
        for name in names:
            if name not in data.feature_names:
                raise DataError(f"score column {name!r} not found")
            indices.append(data.feature_names.index(name))
        return ExternalScore(columns=tuple(indices))

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = _as_2d_float(features, "features")
        bad = [c for c in self.columns if c >= features.shape[1]]
        if bad:
            raise DataError(f"score column index {bad[0]} out of range")
        return features[:, list(self.columns)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "columns": list(self.columns)}

    @classmethod
    def _from_dict(cls, payload: dict) -> "ExternalScore":
        return cls(columns=tuple(int(c) for c in payload["columns"]))


@dataclass(frozen=True)
class LogisticScore(ScoreFunction):
    """Posterior class probabilities from one or more logistic fits.

    ``coef`` has one row per score dimension, so a binary fit yields a single
    probability column and a one-vs-rest fit yields one column per class.
    """

    coef: np.ndarray
    intercept: np.ndarray
    kind = "logistic"

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = _as_2d_float(features, "features")
        coef = np.atleast_2d(np.asarray(self.coef, dtype=float))
        intercept = np.atleast_1d(np.asarray(self.intercept, dtype=float))
        return _sigmoid(features @ coef.T + intercept)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "coef": np.atleast_2d(self.coef).tolist(),
            "intercept": np.atleast_1d(self.intercept).tolist(),
        }

    @classmethod
    def _from_dict(cls, payload: dict) -> "LogisticScore":
        return cls(
            coef=np.asarray(payload["coef"], dtype=float),
            intercept=np.asarray(payload["intercept"], dtype=float),
        )


@dataclass(frozen=True)
class KernelScore(ScoreFunction):
    """Kernel expansion g(x) = sum_i w_i K(x, anchor_i) over labeled anchors."""

    weights: np.ndarray
    anchors: np.ndarray
    kernel: "object"  # KernelSpec; typed loosely to avoid a circular import

    kind = "rkhs"

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = _as_2d_float(features, "features")
        gram = self.kernel.matrix(features, self.anchors)
        return (gram @ np.asarray(self.weights, dtype=float)).reshape(-1, 1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": np.asarray(self.weights, dtype=float).tolist(),
            "anchors": np.asarray(self.anchors, dtype=float).tolist(),
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def _from_dict(cls, payload: dict) -> "KernelScore":
        from .rkhs import KernelSpec

        return cls(
            weights=np.asarray(payload["weights"], dtype=float),
            anchors=np.asarray(payload["anchors"], dtype=float),
            kernel=KernelSpec.from_dict(payload["kernel"]),
        )


def score_dataset(data: RawDataset, g: ScoreFunction) -> ScoredDataset:
    """Apply ``g`` to every row and group the results by population and class."""
    k_plus_one = data.n_classes
    if k_plus_one < 2:
        raise EstimationError("need at least two observed classes to quantify")
    unlabeled_idx = data.unlabeled_indices()
    if unlabeled_idx.size == 0:
        raise EstimationError("no unlabeled rows to quantify")
    all_scores = g.scores(data.features)
    blocks = []
    for label in range(k_plus_one):
        idx = data.labeled_class_indices(label)
        if idx.size == 0:
            raise EstimationError(f"class {label} has no labeled rows")
        blocks.append(all_scores[idx])
    return ScoredDataset(unlabeled=all_scores[unlabeled_idx], classes=tuple(blocks))


def _logistic_nll(beta: np.ndarray, design: np.ndarray, y: np.ndarray, ridge: float) -> float:
    eta = design @ beta
    softplus = np.logaddexp(0.0, eta)
    return float(np.sum(softplus - y * eta) + 0.5 * ridge * beta @ beta)


def fit_logistic(
    data: RawDataset,
    max_iter: int = 100,
    tol: float = 1e-6,
    _targets: np.ndarray | None = None,
) -> LogisticScore:
    """Fit a binary logistic model on the labeled rows by damped Newton steps.

    A small ridge penalty (1e-6) keeps the Hessian invertible on separable
    data.  The fit is deterministic; convergence means the gradient norm of
    the penalized likelihood dropped below ``tol``.
    """
    ridge = 1e-6
    labeled = np.flatnonzero(data.set_indicator == 1)
    if labeled.size == 0:
        raise EstimationError("no labeled rows to fit on")
    x = data.features[labeled]
    y = data.labels[labeled].astype(float) if _targets is None else _targets
    if _targets is None and data.n_classes != 2:
        raise EstimationError(f"binary logistic fit needs 2 classes, found {data.n_classes}")
    if np.all(y == y[0]):
        raise EstimationError("labels are all identical; logistic fit is degenerate")

    design = np.hstack([x, np.ones((x.shape[0], 1))])
    beta = np.zeros(design.shape[1])
    value = _logistic_nll(beta, design, y, ridge)
    grad_norm = np.inf
    for _ in range(max_iter):
        p = _sigmoid(design @ beta)
        grad = design.T @ (p - y) + ridge * beta
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        hessian = (design * w[:, None]).T @ design + ridge * np.eye(design.shape[1])
        step = np.linalg.solve(hessian, grad)
        scale = 1.0
        while scale > 2.0**-40:
            candidate = beta - scale * step
            candidate_value = _logistic_nll(candidate, design, y, ridge)
            if candidate_value <= value - 1e-4 * scale * float(grad @ step):
                break
            scale /= 2.0
        beta = beta - scale * step
        value = _logistic_nll(beta, design, y, ridge)
    else:
        raise EstimationError(
            f"logistic fit did not converge in {max_iter} iterations "
            f"(gradient norm {grad_norm:.3e})"
        )
    return LogisticScore(coef=beta[:-1].reshape(1, -1), intercept=beta[-1:].copy())


def fit_logistic_ovr(data: RawDataset, max_iter: int = 100, tol: float = 1e-6) -> LogisticScore:
    """One-vs-rest logistic fits giving P(Y = j | x) for the first k of k+1 classes."""
    k_plus_one = data.n_classes
    if k_plus_one < 2:
        raise EstimationError("one-vs-rest fit needs at least two classes")
    labeled = np.flatnonzero(data.set_indicator == 1)
    labels = data.labels[labeled]
    coefs, intercepts = [], []
    for target in range(k_plus_one - 1):
        fit = fit_logistic(data, max_iter=max_iter, tol=tol, _targets=(labels == target).astype(float))
        coefs.append(fit.coef[0])
        intercepts.append(fit.intercept[0])
    return LogisticScore(coef=np.array(coefs), intercept=np.array(intercepts))
