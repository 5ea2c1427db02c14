"""Bayes-rule classifier with one density model per class.

The score of class ``z`` at ``x`` is ``log P(z) + log p(x | z)``; the label is
the arg-max. With a rejection threshold enabled, points whose likelihood is
below every class's threshold are left unclassified.

Features are standardized with statistics of the whole training set before
any density is fitted, so every class's log-likelihood carries the same
Jacobian offset, which cancels in the arg-max and in the posterior.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .data.preprocessing import Scaler, fit_scaler
from .flow import FlowTrainConfig, MafArch, maf_log_density, maf_train
from .gmm import EmConfig, GaussianComponent, GmmModel, em_fit, mixture_logpdf
from .numkit.linalg import logsumexp
from .numkit.random import Rng

UNCLASSIFIED = "unclassified"


class EmptyClass(ValueError):
    pass


class UnknownClass(KeyError):
    pass


class DimensionMismatch(ValueError):
    pass


class DensityFitError(RuntimeError):
    """A per-class density failed to fit; ``label`` names the class."""

    def __init__(self, label, cause):
        super().__init__(f"fitting class {label!r} failed: {cause}")
        self.label = label


@dataclass
class ClassPrior:
    labels: list
    log_priors: np.ndarray

    def __post_init__(self):
        self.log_priors = np.asarray(self.log_priors, dtype=float)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("class labels must be distinct")
        if abs(np.exp(self.log_priors).sum() - 1.0) > 1e-12:
            raise ValueError("priors must sum to one")


def estimate_priors(labels, classes=None) -> ClassPrior:
    """Empirical class frequencies ``n_j / n``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyClass("no labels given")
    classes = sorted(np.unique(labels).tolist()) if classes is None else list(classes)
    counts = np.array([np.sum(labels == c) for c in classes], dtype=float)
    if np.any(counts == 0):
        missing = [c for c, k in zip(classes, counts) if k == 0]
        raise EmptyClass(f"no instances of class(es) {missing}")
    return ClassPrior(classes, np.log(counts) - np.log(counts.sum()))


@dataclass
class GmmSpec:
    k: int = 3
    max_iters: int = 500
    tol: float = 1e-6
    reg_epsilon: float = 1e-6
    init: str = "kmeans++"
    seed: int = 0
    pooled_covariance: bool = False  # k=1 only: shared covariance gives the linear rule
    kind: str = field(default="gmm", init=False)

    def em_config(self, seed) -> EmConfig:
        return EmConfig(self.k, self.max_iters, self.tol, self.reg_epsilon, self.init, seed)


@dataclass
class MafSpec:
    arch: MafArch = field(default_factory=MafArch)
    train: FlowTrainConfig = field(default_factory=FlowTrainConfig)
    kind: str = field(default="maf", init=False)


@dataclass
class GenerativeClassifier:
    prior: ClassPrior
    densities: list
    kind: str
    scaler: Scaler
    reject_log_threshold: np.ndarray | None = None
    traces: list = field(default_factory=list, repr=False)

    @property
    def classes(self) -> list:
        return self.prior.labels

    @property
    def d(self) -> int:
        return self.scaler.means.shape[0]

    def log_likelihoods(self, x) -> np.ndarray:
        """(n, |C|) per-class log-likelihoods in standardized units."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} features, got shape {x.shape}")
        if x.shape[0] == 0:
            return np.zeros((0, len(self.classes)))
        z = self.scaler.transform(x)
        if self.kind == "gmm":
            cols = [mixture_logpdf(z, m) for m in self.densities]
        else:
            cols = [maf_log_density(m, z) for m in self.densities]
        return np.column_stack(cols)


@dataclass
class Prediction:
    index: np.ndarray  # class index per row, -1 when unclassified
    log_joint: np.ndarray
    log_posterior: np.ndarray
    log_likelihood: np.ndarray
    classes: list

    @property
    def unclassified(self) -> np.ndarray:
        return self.index < 0

    @property
    def labels(self) -> list:
        return [UNCLASSIFIED if i < 0 else self.classes[i] for i in self.index]


def spec_seed(spec) -> int:
    return spec.train.seed if spec.kind == "maf" else spec.seed


def _fit_density(x, spec, seed):
    if spec.kind == "gmm":
        res = em_fit(x, spec.em_config(seed))
        return res.model, {"log_likelihood": res.trace}
    res = maf_train(x, spec.arch, dataclasses.replace(spec.train, seed=seed))
    return res.model, {"train_nll": res.train_nll, "val_nll": res.val_nll,
                       "best_epoch": res.best_epoch}


def _pool_covariances(models, counts, reg_epsilon):
    """Replace each single-Gaussian covariance by the count-weighted average."""
    d = models[0].dim
    eye = np.eye(d)
    pooled = sum(n * (m.components[0].cov - reg_epsilon * eye) for m, n in zip(models, counts))
    pooled = pooled / np.sum(counts) + reg_epsilon * eye
    pooled = 0.5 * (pooled + pooled.T)
    return [GmmModel([GaussianComponent(m.components[0].mean, pooled)], [1.0]) for m in models]


def fit(x, labels, spec, classes=None, reject_percentile=0.1) -> GenerativeClassifier:
    """Fit one density per class on that class's rows.

    The rejection threshold of each class is the ``reject_percentile``-th
    percentile of its own training log-likelihoods.
    """
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    prior = estimate_priors(labels, classes)
    scaler = fit_scaler(x)
    z = scaler.transform(x)
    if spec.kind == "gmm":
        min_rows = max(spec.k, 2)
        if spec.pooled_covariance and spec.k != 1:
            raise ValueError("pooled covariance is only defined for k=1")
    else:
        min_rows = 20
    seeds = [r.seed for r in Rng(spec_seed(spec)).spawn(len(prior.labels))]
    densities, traces, counts = [], [], []
    for label, seed in zip(prior.labels, seeds):
        rows = z[labels == label]
        if rows.shape[0] < min_rows:
            raise DensityFitError(label, f"{rows.shape[0]} rows, need at least {min_rows}")
        try:
            model, trace = _fit_density(rows, spec, seed)
        except Exception as exc:  # annotate with the class, keep the original as cause
            raise DensityFitError(label, exc) from exc
        densities.append(model)
        traces.append(trace)
        counts.append(rows.shape[0])
    if spec.kind == "gmm" and spec.pooled_covariance:
        densities = _pool_covariances(densities, counts, spec.reg_epsilon)

    clf = GenerativeClassifier(prior, densities, spec.kind, scaler, None, traces)
    ll = clf.log_likelihoods(x)
    clf.reject_log_threshold = np.array(
        [np.percentile(ll[labels == c, j], reject_percentile) for j, c in enumerate(prior.labels)]
    )
    return clf


def class_scores(model: GenerativeClassifier, x) -> np.ndarray:
    """``log P(class) + log p(x | class)`` for every row and class."""
    return model.log_likelihoods(x) + model.prior.log_priors


def predict(model: GenerativeClassifier, x, use_threshold=False) -> Prediction:
    ll = model.log_likelihoods(x)
    joint = ll + model.prior.log_priors
    if joint.shape[0]:
        post = joint - logsumexp(joint, axis=1)[:, None]
    else:
        post = joint.copy()
    # argmax returns the first maximum, so ties go to the lower class index
    index = np.argmax(joint, axis=1) if joint.shape[0] else np.zeros(0, dtype=int)
    if use_threshold:
        if model.reject_log_threshold is None:
            raise ValueError("model has no rejection threshold")
        rejected = np.all(ll < model.reject_log_threshold, axis=1)
        index = np.where(rejected, -1, index)
    return Prediction(index.astype(int), joint, post, ll, list(model.classes))


def outlier_score(model: GenerativeClassifier, x, label) -> np.ndarray:
    """Log-likelihood of ``x`` under the density of class ``label``; lower is more anomalous."""
    if label not in model.classes:
        raise UnknownClass(label)
    return model.log_likelihoods(x)[:, model.classes.index(label)]
