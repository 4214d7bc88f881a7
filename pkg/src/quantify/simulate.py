"""Synthetic scenarios and Monte Carlo studies over the estimators.

Scenario kinds fall into three groups: score-level binary scenarios that
draw the score values themselves from named class-conditional laws
(gaussian, exponential, gaussian_exponential, beta, and resampling from a
scored corpus), a feature-level multiclass scenario (isotropic Gaussian
bumps in ten dimensions, scored by one-vs-rest logistic fits), and a
covariate scenario whose unlabeled prevalence follows a sine curve in z.

Every study is deterministic given its seed: replicate r of cell c uses a
generator derived from (seed, c, r) and never touches shared state, so the
work may be distributed across processes (capped by QUANTIFY_THREADS)
without changing any number in the report.
"""

from __future__ import annotations

import csv
import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    EstimationError,
    ExternalScore,
    RawDataset,
    ScoredDataset,
    fit_logistic_ovr,
    rng_from,
    score_dataset,
)
from .estimators import (
    classify_and_count,
    combined_estimate,
    em_estimate,
    multiclass_ratio,
    ratio_ci,
    ratio_estimate,
    ratio_variance,
)
from .regression import cc_regress, ratio_regress
from .shift_test import shift_test

SCENARIO_KINDS = (
    "gaussian",
    "exponential",
    "gaussian_exponential",
    "beta",
    "multiclass_gaussian",
    "regression_sine",
    "resample",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic scenario.

    Only the fields relevant to ``kind`` are read.  ``gamma`` moves the
    unlabeled class-0 law away from its labeled counterpart (location for
    the gaussian kinds, rate for the exponential, first shape parameter for
    the beta); ``None`` keeps the two laws equal, under which the mixture
    assumption holds exactly.
    """

    kind: str
    n_unlabeled: int
    n_class: tuple[int, ...]
    theta: float = 0.6
    gamma: float | None = None
    # gaussian / gaussian_exponential locations and common sd
    mean0: float = 0.0
    mean1: float = 2.0
    sd: float = 1.0
    # exponential rates (class 1 also used by gaussian_exponential)
    rate0: float = 1.0
    rate1: float = 5.0
    # beta shapes
    a0: float = 1.0
    b0: float = 1.0
    a1: float = 1.0
    b1: float = 10.0
    # multiclass: one isotropic Gaussian bump per class at level * ones(dim)
    levels: tuple[float, ...] = (0.0, 0.75, 1.25)
    dim: int = 10
    target_priors: tuple[float, ...] = (0.25, 0.10, 0.65)
    # regression: score separation and sine cycles of the prevalence curve
    mu: float = 1.0
    cycles: int = 1
    corpus: RawDataset | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise EstimationError(f"unknown scenario kind {self.kind!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise EstimationError(f"theta must be in [0, 1], got {self.theta}")
        if self.n_unlabeled < 1 or any(n < 1 for n in self.n_class):
            raise EstimationError("all group sizes must be at least 1")

    def meta(self) -> dict:
        payload = dataclasses.asdict(self)
        payload.pop("corpus", None)
        payload["n_class"] = list(self.n_class)
        return payload


def table_scenario(
    kind: str,
    n_unlabeled: int = 300,
    n_class: tuple[int, int] = (150, 150),
    gamma: float | None = None,
    theta: float = 0.6,
) -> ScenarioSpec:
    """Canonical parameterization of the four binary test scenarios."""
    common = dict(kind=kind, n_unlabeled=n_unlabeled, n_class=n_class, gamma=gamma, theta=theta)
    if kind == "gaussian":
        return ScenarioSpec(mean0=0.0, mean1=2.0, sd=1.0, **common)
    if kind == "exponential":
        return ScenarioSpec(rate0=1.0, rate1=5.0, **common)
    if kind == "gaussian_exponential":
        return ScenarioSpec(mean0=1.0, sd=1.0, rate1=1.0, **common)
    if kind == "beta":
        return ScenarioSpec(a0=1.0, b0=1.0, a1=1.0, b1=10.0, **common)
    raise EstimationError(f"no canonical test parameterization for kind {kind!r}")


def symmetric_gaussian(
    theta: float,
    n_unlabeled: int,
    n_class: tuple[int, int],
    mu: float = 1.0,
) -> ScenarioSpec:
    """Estimation scenario with score laws N(-mu, 1) and N(+mu, 1), no shift."""
    return ScenarioSpec(
        kind="gaussian",
        n_unlabeled=n_unlabeled,
        n_class=n_class,
        theta=theta,
        mean0=-mu,
        mean1=mu,
        sd=1.0,
    )


def null_gamma(spec: ScenarioSpec) -> float:
    """The gamma value under which the unlabeled class-0 law is unshifted."""
    if spec.kind in ("gaussian", "gaussian_exponential"):
        return spec.mean0
    if spec.kind == "exponential":
        return spec.rate0
    if spec.kind == "beta":
        return spec.a0
    raise EstimationError(f"kind {spec.kind!r} has no shift parameter")


def _binary_law_samplers(spec: ScenarioSpec):
    """(labeled class 0, class 1, unlabeled class 0) samplers for score kinds."""
    gamma = spec.gamma

    if spec.kind == "gaussian":
        unlabeled_mean0 = spec.mean0 if gamma is None else gamma
        return (
            lambda rng, n: rng.normal(spec.mean0, spec.sd, n),
            lambda rng, n: rng.normal(spec.mean1, spec.sd, n),
            lambda rng, n: rng.normal(unlabeled_mean0, spec.sd, n),
        )
    if spec.kind == "exponential":
        unlabeled_rate0 = spec.rate0 if gamma is None else gamma
        if min(spec.rate0, spec.rate1, unlabeled_rate0) <= 0:
            raise EstimationError("exponential rates must be positive")
        return (
            lambda rng, n: rng.exponential(1.0 / spec.rate0, n),
            lambda rng, n: rng.exponential(1.0 / spec.rate1, n),
            lambda rng, n: rng.exponential(1.0 / unlabeled_rate0, n),
        )
    if spec.kind == "gaussian_exponential":
        unlabeled_mean0 = spec.mean0 if gamma is None else gamma
        if spec.rate1 <= 0:
            raise EstimationError("exponential rate must be positive")
        return (
            lambda rng, n: rng.normal(spec.mean0, spec.sd, n),
            lambda rng, n: rng.exponential(1.0 / spec.rate1, n),
            lambda rng, n: rng.normal(unlabeled_mean0, spec.sd, n),
        )
    if spec.kind == "beta":
        unlabeled_a0 = spec.a0 if gamma is None else gamma
        if min(spec.a0, spec.b0, spec.a1, spec.b1, unlabeled_a0) <= 0:
            raise EstimationError("beta shape parameters must be positive")
        return (
            lambda rng, n: rng.beta(spec.a0, spec.b0, n),
            lambda rng, n: rng.beta(spec.a1, spec.b1, n),
            lambda rng, n: rng.beta(unlabeled_a0, spec.b0, n),
        )
    raise EstimationError(f"kind {spec.kind!r} is not a binary score scenario")


def _assemble_binary(
    labeled0: np.ndarray,
    labeled1: np.ndarray,
    unlabeled: np.ndarray,
    unlabeled_labels: np.ndarray,
    covariate_labeled: np.ndarray | None = None,
    covariate_unlabeled: np.ndarray | None = None,
) -> RawDataset:
    n0, n1, n_u = labeled0.size, labeled1.size, unlabeled.size
    features = np.concatenate([labeled0, labeled1, unlabeled]).reshape(-1, 1)
    labels = np.concatenate(
        [np.zeros(n0, dtype=int), np.ones(n1, dtype=int), unlabeled_labels]
    )
    sets = np.concatenate([np.ones(n0 + n1, dtype=int), np.zeros(n_u, dtype=int)])
    covariate = None
    if covariate_labeled is not None:
        covariate = np.concatenate([covariate_labeled, covariate_unlabeled])
    return RawDataset(features=features, labels=labels, set_indicator=sets, covariate=covariate)


def _proportional_counts(total: int, priors: tuple[float, ...]) -> np.ndarray:
    """Largest-remainder rounding of total * priors to integer counts."""
    raw = np.asarray(priors, dtype=float) * total
    counts = np.floor(raw).astype(int)
    remainder = total - counts.sum()
    order = np.argsort(raw - np.floor(raw))[::-1]
    counts[order[:remainder]] += 1
    return counts


def generate(spec: ScenarioSpec, seed: int) -> RawDataset:
    """Draw one dataset with exact group sizes per class.

    The unlabeled class counts are the largest-remainder rounding of
    n_unlabeled * (1 - theta, theta), presented in shuffled row order; only
    corpus resampling and the covariate scenario flip per-row coins.
    Unlabeled rows keep their true class label in the dataset (the
    estimators never read labels of set-0 rows; evaluation and the combined
    estimator do).  The same spec and seed give a bit-identical dataset.
    """
    rng = rng_from(seed)
    if spec.kind in ("gaussian", "exponential", "gaussian_exponential", "beta"):
        sample0, sample1, sample_unlabeled0 = _binary_law_samplers(spec)
        n0, n1 = spec.n_class[0], spec.n_class[1]
        labeled0 = sample0(rng, n0)
        labeled1 = sample1(rng, n1)
        counts = _proportional_counts(spec.n_unlabeled, (1.0 - spec.theta, spec.theta))
        unlabeled = np.concatenate(
            [sample_unlabeled0(rng, counts[0]), sample1(rng, counts[1])]
        )
        labels_u = np.repeat(np.arange(2), counts)
        order = rng.permutation(spec.n_unlabeled)
        return _assemble_binary(labeled0, labeled1, unlabeled[order], labels_u[order])

    if spec.kind == "multiclass_gaussian":
        k_plus_one = len(spec.levels)
        if len(spec.n_class) != k_plus_one or len(spec.target_priors) != k_plus_one:
            raise EstimationError("levels, n_class and target_priors must agree in length")
        if abs(sum(spec.target_priors) - 1.0) > 1e-9:
            raise EstimationError("target priors must sum to 1")
        means = np.asarray(spec.levels, dtype=float)[:, None] * np.ones(spec.dim)
        blocks, labels = [], []
        for label, count in enumerate(spec.n_class):
            blocks.append(rng.standard_normal((count, spec.dim)) + means[label])
            labels.append(np.full(count, label))
        counts_u = _proportional_counts(spec.n_unlabeled, spec.target_priors)
        labels_u = rng.permutation(np.repeat(np.arange(k_plus_one), counts_u))
        blocks.append(rng.standard_normal((spec.n_unlabeled, spec.dim)) + means[labels_u])
        labels.append(labels_u)
        n_labeled = sum(spec.n_class)
        sets = np.concatenate(
            [np.ones(n_labeled, dtype=int), np.zeros(spec.n_unlabeled, dtype=int)]
        )
        return RawDataset(
            features=np.vstack(blocks), labels=np.concatenate(labels), set_indicator=sets
        )

    if spec.kind == "regression_sine":
        # Labeled prevalence is flat at 1/2; the unlabeled prevalence follows
        # theta(z) = (sin(2 pi z cycles) + 1) / 2 over z ~ U(0, 1).
        n_labeled = sum(spec.n_class)
        z_labeled = rng.random(n_labeled)
        y_labeled = (rng.random(n_labeled) < 0.5).astype(int)
        x_labeled = rng.standard_normal(n_labeled) + np.where(y_labeled == 1, spec.mu, -spec.mu)
        z_u = rng.random(spec.n_unlabeled)
        theta_z = 0.5 * (np.sin(2.0 * np.pi * z_u * spec.cycles) + 1.0)
        y_u = (rng.random(spec.n_unlabeled) < theta_z).astype(int)
        x_u = rng.standard_normal(spec.n_unlabeled) + np.where(y_u == 1, spec.mu, -spec.mu)
        return _assemble_binary(
            x_labeled[y_labeled == 0],
            x_labeled[y_labeled == 1],
            x_u,
            y_u,
            covariate_labeled=np.concatenate(
                [z_labeled[y_labeled == 0], z_labeled[y_labeled == 1]]
            ),
            covariate_unlabeled=z_u,
        )

    if spec.kind == "resample":
        return _resample(spec, rng)
    raise EstimationError(f"unknown scenario kind {spec.kind!r}")


def _resample(spec: ScenarioSpec, rng: np.random.Generator) -> RawDataset:
    corpus = spec.corpus
    if corpus is None:
        raise EstimationError("resample scenario needs a corpus")
    pools = [rng.permutation(np.flatnonzero(corpus.labels == j)) for j in (0, 1)]
    n0, n1 = spec.n_class[0], spec.n_class[1]
    from_class1 = rng.random(spec.n_unlabeled) < spec.theta
    need = (n0 + int((~from_class1).sum()), n1 + int(from_class1.sum()))
    if need[0] > pools[0].size or need[1] > pools[1].size:
        raise EstimationError(
            f"corpus too small: need {need[0]}/{need[1]} rows per class, "
            f"have {pools[0].size}/{pools[1].size}"
        )
    labeled_idx = np.concatenate([pools[0][:n0], pools[1][:n1]])
    unlabeled_idx = np.empty(spec.n_unlabeled, dtype=int)
    unlabeled_idx[~from_class1] = pools[0][n0 : need[0]]
    unlabeled_idx[from_class1] = pools[1][n1 : need[1]]
    order = np.concatenate([labeled_idx, unlabeled_idx])
    sets = np.concatenate(
        [np.ones(n0 + n1, dtype=int), np.zeros(spec.n_unlabeled, dtype=int)]
    )
    covariate = corpus.covariate[order] if corpus.covariate is not None else None
    return RawDataset(
        features=corpus.features[order],
        labels=corpus.labels[order],
        set_indicator=sets,
        covariate=covariate,
        feature_names=corpus.feature_names,
    )


@dataclass(frozen=True)
class ExperimentReport:
    """Study output: aggregated cells plus the per-replicate table behind them.

    ``columns``/``rows`` hold one aggregate row per cell; ``raw_columns``/
    ``raw_rows`` hold the tidy per-replicate records the aggregates were
    reduced from.  ``to_csv`` writes the tidy table (fit for external
    plotting), ``to_dict`` the aggregate summary.
    """

    study: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    seed: int
    meta: dict
    raw_columns: tuple[str, ...] = ()
    raw_rows: tuple[tuple, ...] = ()

    def to_csv(self, path: str) -> None:
        columns = self.raw_columns or self.columns
        rows = self.raw_rows if self.raw_columns else self.rows
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow(["" if v is None else v for v in row])

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows],
            "seed": self.seed,
            "meta": self.meta,
        }

    def cell(self, **filters) -> tuple:
        matches = [
            row
            for row in self.rows
            if all(row[self.columns.index(k)] == v for k, v in filters.items())
        ]
        if len(matches) != 1:
            raise KeyError(f"{len(matches)} rows match {filters}")
        return matches[0]

    def value(self, column: str, **filters) -> float:
        return self.cell(**filters)[self.columns.index(column)]


def _mean_and_halfwidth(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, float("nan")
    half = 1.96 * float(values.std(ddof=1)) / float(np.sqrt(values.size))
    return mean, half


def _study_estimate(method: str, scored: ScoredDataset, spec: ScenarioSpec) -> float:
    if method == "ratio":
        return ratio_estimate(scored).theta
    if method == "cc":
        # threshold at the midpoint of the labeled class score means: the
        # natural plug-in decision boundary for a one-dimensional score.
        mid = (float(scored.classes[0].mean()) + float(scored.classes[1].mean())) / 2.0
        return classify_and_count(scored, threshold=mid).theta
    if method == "em":
        n0, n1 = scored.class_counts
        return em_estimate(scored, theta_train=n1 / (n0 + n1)).theta
    raise EstimationError(f"unknown method {method!r}")


def run_mse_study(
    spec: ScenarioSpec,
    thetas,
    methods,
    replicates: int,
    seed: int,
) -> ExperimentReport:
    """Monte Carlo MSE of point estimators across target prevalences.

    Feature column 0 is the score (binary score-level scenarios only).
    Reports a normal-approximation half-width for each MSE cell.
    """
    methods = list(methods)
    for method in methods:
        if method not in ("ratio", "cc", "em"):
            raise EstimationError(f"unknown method {method!r}")
    score = ExternalScore(columns=(0,))
    rows, raw = [], []
    for t_index, theta in enumerate(thetas):
        cell_spec = dataclasses.replace(spec, theta=float(theta))
        errors: dict[str, list[float]] = {m: [] for m in methods}
        for r in range(replicates):
            data = generate(cell_spec, seed=_child_seed(seed, t_index, r))
            scored = score_dataset(data, score)
            for method in methods:
                estimate = _study_estimate(method, scored, cell_spec)
                errors[method].append((estimate - theta) ** 2)
                raw.append((spec.kind, method, float(theta), r, estimate))
        for method in methods:
            mse, half = _mean_and_halfwidth(np.array(errors[method]))
            rows.append((float(theta), method, replicates, mse, half))
    return ExperimentReport(
        study="mse",
        columns=("theta", "method", "replicates", "mse", "half_width"),
        rows=tuple(rows),
        seed=seed,
        meta=spec.meta(),
        raw_columns=("scenario", "method", "theta", "replicate", "estimate"),
        raw_rows=tuple(raw),
    )


def run_coverage_study(
    spec: ScenarioSpec,
    thetas,
    level: float,
    replicates: int,
    seed: int,
    regime: str = "auto",
) -> ExperimentReport:
    """Coverage of the normal interval for the ratio estimate, per prevalence."""
    score = ExternalScore(columns=(0,))
    rows, raw = [], []
    for t_index, theta in enumerate(thetas):
        cell_spec = dataclasses.replace(spec, theta=float(theta))
        hits, widths = [], []
        for r in range(replicates):
            data = generate(cell_spec, seed=_child_seed(seed, t_index, r))
            scored = score_dataset(data, score)
            est = ratio_estimate(scored)
            n0, n1 = scored.class_counts
            est = ratio_variance(
                est,
                n_total=scored.n_unlabeled + n0 + n1,
                n_labeled=n0 + n1,
                n0=n0,
                n1=n1,
                regime=regime,
            )
            lo, hi, _ = ratio_ci(est, level=level).ci
            covered = 1 if lo <= theta <= hi else 0
            hits.append(float(covered))
            widths.append(hi - lo)
            raw.append((spec.kind, float(theta), r, est.theta, lo, hi, covered))
        rows.append(
            (
                float(theta),
                replicates,
                float(np.mean(hits)),
                float(np.mean(widths)),
            )
        )
    return ExperimentReport(
        study="coverage",
        columns=("theta", "replicates", "coverage", "mean_width"),
        rows=tuple(rows),
        seed=seed,
        meta={**spec.meta(), "level": level, "regime": regime},
        raw_columns=("scenario", "theta", "replicate", "estimate", "lower", "upper", "covered"),
        raw_rows=tuple(raw),
    )


def _child_seed(seed: int, *path: int) -> int:
    """A fresh 63-bit seed derived deterministically from (seed, path)."""
    return int(rng_from(seed, *path).integers(0, 2**63 - 1))


def _power_replicate(payload) -> tuple[float, float]:
    spec, test_replicates, grid_size, data_seed, test_seed = payload
    data = generate(spec, seed=data_seed)
    scored = score_dataset(data, ExternalScore(columns=(0,)))
    result = shift_test(scored, replicates=test_replicates, seed=test_seed, grid_size=grid_size)
    return result.p_value, result.statistic


def _threads() -> int:
    raw = os.environ.get("QUANTIFY_THREADS", "0")
    try:
        requested = int(raw)
    except ValueError:
        requested = 0
    if requested <= 0:
        requested = os.cpu_count() or 1
    return max(1, requested)


def _parallel_map(func, payloads: list) -> list:
    workers = min(_threads(), len(payloads)) if payloads else 1
    if workers <= 1:
        return [func(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, payloads, chunksize=max(1, len(payloads) // (4 * workers))))


def run_power_study(
    spec: ScenarioSpec,
    gammas,
    alpha: float,
    replicates: int,
    test_replicates: int = 200,
    seed: int = 0,
    grid_size: int = 201,
) -> ExperimentReport:
    """Rejection rate of the shift test across shift magnitudes.

    ``grid_size`` defaults to a coarser mixing grid than the single-shot
    test uses: the statistic is 1-Lipschitz in the mixing weight, so a
    0.005-resolution grid perturbs it by at most 0.0025 while keeping a
    full power curve affordable.  Rejection means p-value <= alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise EstimationError(f"alpha must be in (0, 1), got {alpha}")
    rows, raw = [], []
    for g_index, gamma in enumerate(gammas):
        cell_spec = dataclasses.replace(spec, gamma=float(gamma))
        payloads = [
            (
                cell_spec,
                test_replicates,
                grid_size,
                _child_seed(seed, g_index, r),
                _child_seed(seed, g_index, r, 1),
            )
            for r in range(replicates)
        ]
        outcomes = _parallel_map(_power_replicate, payloads)
        rejected = [1 if p <= alpha else 0 for p, _ in outcomes]
        raw.extend(
            (spec.kind, float(gamma), r, stat, p, rej)
            for r, ((p, stat), rej) in enumerate(zip(outcomes, rejected))
        )
        rows.append(
            (
                float(gamma),
                replicates,
                test_replicates,
                float(np.mean(rejected)),
                1.0 if float(gamma) == null_gamma(cell_spec) else 0.0,
            )
        )
    return ExperimentReport(
        study="power",
        columns=("gamma", "replicates", "test_replicates", "rejection_rate", "is_null"),
        rows=tuple(rows),
        seed=seed,
        meta={**spec.meta(), "alpha": alpha, "grid_size": grid_size},
        raw_columns=("scenario", "gamma", "replicate", "statistic", "p_value", "rejected"),
        raw_rows=tuple(raw),
    )


def run_combined_study(
    spec: ScenarioSpec,
    label_counts,
    replicates: int,
    seed: int,
    regime: str = "auto",
) -> ExperimentReport:
    """MSE of the ratio, labels-only, and combined estimators.

    For each replicate the first ``m`` unlabeled rows (their true labels are
    carried by the generator) play the role of a labeled subsample of the
    target population.  ``m = 0`` reports the ratio arm alone.
    """
    score = ExternalScore(columns=(0,))
    theta = spec.theta
    label_counts = [int(m) for m in label_counts]
    if any(m < 0 or m > spec.n_unlabeled for m in label_counts):
        raise EstimationError("label counts must lie in [0, n_unlabeled]")
    errors: dict[int, dict[str, list[float]]] = {
        m: {"ratio": [], "labels": [], "combined": []} for m in label_counts
    }
    raw = []
    for r in range(replicates):
        data = generate(spec, seed=_child_seed(seed, 0, r))
        scored = score_dataset(data, score)
        est = ratio_estimate(scored)
        n0, n1 = scored.class_counts
        est = ratio_variance(
            est,
            n_total=scored.n_unlabeled + n0 + n1,
            n_labeled=n0 + n1,
            n0=n0,
            n1=n1,
            regime=regime,
        )
        unlabeled_labels = data.labels[data.unlabeled_indices()]
        for m in label_counts:
            errors[m]["ratio"].append((est.theta - theta) ** 2)
            raw.append((spec.kind, "ratio", m, r, est.theta))
            if m == 0:
                continue
            combined = combined_estimate(est, unlabeled_labels[:m])
            errors[m]["labels"].append((combined.theta_labels - theta) ** 2)
            errors[m]["combined"].append((combined.theta - theta) ** 2)
            raw.append((spec.kind, "labels", m, r, combined.theta_labels))
            raw.append((spec.kind, "combined", m, r, combined.theta))
    rows = []
    for m in label_counts:
        mse_ratio, _ = _mean_and_halfwidth(np.array(errors[m]["ratio"]))
        if m == 0:
            rows.append((m, replicates, mse_ratio, None, None))
        else:
            mse_labels, _ = _mean_and_halfwidth(np.array(errors[m]["labels"]))
            mse_combined, _ = _mean_and_halfwidth(np.array(errors[m]["combined"]))
            rows.append((m, replicates, mse_ratio, mse_labels, mse_combined))
    return ExperimentReport(
        study="combined",
        columns=("target_labels", "replicates", "mse_ratio", "mse_labels", "mse_combined"),
        rows=tuple(rows),
        seed=seed,
        meta=spec.meta(),
        raw_columns=("scenario", "method", "target_labels", "replicate", "estimate"),
        raw_rows=tuple(raw),
    )


def run_multiclass_study(
    spec: ScenarioSpec,
    sizes,
    replicates: int,
    seed: int,
) -> ExperimentReport:
    """Vector MSE of the multiclass ratio estimate along a sample-size ladder.

    At each ladder point n, the labeled sample has n rows split across
    classes proportionally to ``spec.n_class`` and the unlabeled sample has
    n rows.  Scores are one-vs-rest logistic probabilities fit per
    replicate.  Reports raw and simplex-projected MSE (squared Euclidean
    distance to the true prior vector).
    """
    if spec.kind != "multiclass_gaussian":
        raise EstimationError("multiclass study needs the multiclass_gaussian kind")
    base = np.asarray(spec.n_class, dtype=float)
    priors_labeled = tuple(base / base.sum())
    truth = np.asarray(spec.target_priors, dtype=float)
    rows, raw = [], []
    for s_index, size in enumerate(sizes):
        counts = _proportional_counts(int(size), priors_labeled)
        if np.any(counts < 1):
            raise EstimationError(f"ladder size {size} leaves an empty class")
        cell_spec = dataclasses.replace(
            spec, n_class=tuple(int(c) for c in counts), n_unlabeled=int(size)
        )
        raw_errors, proj_errors = [], []
        for r in range(replicates):
            data = generate(cell_spec, seed=_child_seed(seed, s_index, r))
            scores = score_dataset(data, fit_logistic_ovr(data))
            result = multiclass_ratio(scores)
            raw_errors.append(float(np.sum((result.theta_raw - truth) ** 2)))
            proj_errors.append(float(np.sum((result.theta - truth) ** 2)))
            raw.append((spec.kind, "raw", int(size), r, raw_errors[-1]))
            raw.append((spec.kind, "projected", int(size), r, proj_errors[-1]))
        mse_raw, half_raw = _mean_and_halfwidth(np.array(raw_errors))
        mse_proj, half_proj = _mean_and_halfwidth(np.array(proj_errors))
        rows.append((int(size), replicates, mse_raw, half_raw, mse_proj, half_proj))
    return ExperimentReport(
        study="multiclass",
        columns=(
            "size",
            "replicates",
            "mse_raw",
            "half_width_raw",
            "mse_projected",
            "half_width_projected",
        ),
        rows=tuple(rows),
        seed=seed,
        meta=spec.meta(),
        raw_columns=("scenario", "method", "size", "replicate", "sq_error"),
        raw_rows=tuple(raw),
    )


def run_regression_study(
    spec: ScenarioSpec,
    grid: np.ndarray,
    replicates: int,
    seed: int,
    threshold: float = 0.0,
) -> ExperimentReport:
    """Integrated squared error of the ratio and classify-and-count curves.

    The scenario's score is the raw feature (column 0); the
    classify-and-count curve thresholds it at ``threshold``.  The truth is
    the scenario's sine prevalence curve evaluated on the grid.
    """
    if spec.kind != "regression_sine":
        raise EstimationError("regression study needs the regression_sine kind")
    grid = np.asarray(grid, dtype=float)
    truth = 0.5 * (np.sin(2.0 * np.pi * grid * spec.cycles) + 1.0)
    score = ExternalScore(columns=(0,))
    raw = []
    for r in range(replicates):
        data = generate(spec, seed=_child_seed(seed, 0, r))
        ratio_curve = ratio_regress(data, score, grid)
        cc_curve = cc_regress(data, score, grid, threshold=threshold)
        mise_ratio = float(np.mean((ratio_curve.values - truth) ** 2))
        mise_cc = float(np.mean((cc_curve.values - truth) ** 2))
        sup_gap = float(np.max(np.abs(ratio_curve.values - cc_curve.values)))
        raw.append((spec.kind, r, mise_ratio, mise_cc, sup_gap))
    table = np.asarray([row[2:] for row in raw], dtype=float)
    mise_r, half_r = _mean_and_halfwidth(table[:, 0])
    mise_c, half_c = _mean_and_halfwidth(table[:, 1])
    summary = (
        replicates,
        mise_r,
        half_r,
        mise_c,
        half_c,
        float(table[:, 2].mean()),
        float(table[:, 2].max()),
    )
    return ExperimentReport(
        study="regression",
        columns=(
            "replicates",
            "mise_ratio",
            "half_width_ratio",
            "mise_cc",
            "half_width_cc",
            "mean_sup_gap",
            "max_sup_gap",
        ),
        rows=(summary,),
        seed=seed,
        meta={**spec.meta(), "threshold": threshold, "grid_points": int(grid.size)},
        raw_columns=("scenario", "replicate", "mise_ratio", "mise_cc", "sup_gap"),
        raw_rows=tuple(raw),
    )
