"""Stratified k-fold evaluation of a generative classifier.

Each fold gets its own seed spawned from the master seed, so folds are
independent of evaluation order. Inside a fold the non-test rows are split
80/20 (stratified) when tuning: candidates are fitted on the 80 part and
ranked by accuracy on the 20 part; the winner is refitted on all non-test
rows. Flows additionally hold out their own 20% for early stopping.
"""

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .classifier import GmmSpec, MafSpec, fit, predict
from .data.dataset import Dataset
from .data.folds import stratified_kfold, stratified_split
from .data.metrics import AggregateMetrics, compute_metrics
from .flow import MafArch
from .numkit.random import Rng

INNER_VALIDATION_FRACTION = 0.2


def with_seed(spec, seed):
    if spec.kind == "maf":
        return dataclasses.replace(spec, train=dataclasses.replace(spec.train, seed=seed))
    return dataclasses.replace(spec, seed=seed)


def gmm_grid(default: GmmSpec) -> list:
    """k in 1..5 with the default k first."""
    ks = [default.k] + [k for k in range(1, 6) if k != default.k]
    return [dataclasses.replace(default, k=k) for k in ks]


def maf_grid(default: MafSpec) -> list:
    """The default architecture, then half as many layers, then half as wide."""
    a = default.arch
    alts = [
        dataclasses.replace(a, n_layers=max(1, a.n_layers // 2)),
        dataclasses.replace(a, hidden_sizes=tuple(max(2, h // 2) for h in a.hidden_sizes)),
    ]
    return [default] + [dataclasses.replace(default, arch=alt) for alt in alts]


def spec_summary(spec) -> dict:
    if spec.kind == "gmm":
        return {"kind": "gmm", "k": spec.k, "reg_epsilon": spec.reg_epsilon, "tol": spec.tol,
                "max_iters": spec.max_iters, "init": spec.init, "pooled_covariance": spec.pooled_covariance}
    a, t = spec.arch, spec.train
    return {"kind": "maf", "n_layers": a.n_layers, "hidden_sizes": list(a.hidden_sizes),
            "activation": a.activation, "scale_clamp": a.scale_clamp, "epochs": t.epochs,
            "batch_size": t.batch_size, "learning_rate": t.learning_rate, "patience": t.patience,
            "validation_fraction": t.validation_fraction, "lr_decay": t.lr_decay}


def _accuracy(model, x, y) -> float:
    pred = predict(model, x).index
    truth = np.array([model.classes.index(v) for v in y.tolist()])
    return float(np.mean(pred == truth))


def _select(x, y, candidates, rng):
    keep, hold = stratified_split(y, INNER_VALIDATION_FRACTION, rng)
    scores = []
    for cand in candidates:
        try:
            m = fit(x[keep], y[keep], cand)
            scores.append(_accuracy(m, x[hold], y[hold]))
        except Exception:
            scores.append(-1.0)
    best = int(np.argmax(scores))  # first maximum, so the default wins ties
    return candidates[best], scores


@dataclass
class FoldResult:
    fold: int
    seed: int
    status: str = "ok"
    metrics: dict | None = None
    chosen: dict | None = None
    tuning_scores: list | None = None
    traces: list | None = None
    error: str | None = None

    def to_dict(self):
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}


@dataclass
class CvReport:
    header: dict
    folds: list
    accuracy: float | None
    f1: float | None
    timings: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(f.status != "ok" for f in self.folds)

    def to_dict(self):
        """Machine-readable record; wall-clock timings are excluded so it is reproducible."""
        return {
            "header": self.header,
            "folds": [f.to_dict() for f in self.folds],
            "aggregate": {"accuracy": self.accuracy, "f1": self.f1, "failed": self.failed},
            "table": self.table(),
        }

    def table(self) -> str:
        name = self.header["model_name"]
        acc = "FAILED" if self.accuracy is None else f"{100 * self.accuracy:.2f}%"
        f1 = "FAILED" if self.f1 is None else f"{100 * self.f1:.2f}%"
        rows = [("Model", "Average Accuracy", "Average F1-Score"), (name, acc, f1)]
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        line = lambda r: "| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |"  # noqa: E731
        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        return "\n".join([line(rows[0]), sep, line(rows[1])])


def cross_validate(ds: Dataset, spec, folds=5, seed=0, positive_label=None, tune=False,
                   trace_every=1, config=None) -> CvReport:
    """Run stratified ``folds``-fold CV of ``spec`` on ``ds``.

    A fold that raises is recorded with ``status="failed"`` and the others
    still run; the aggregate is then computed over the successful folds only
    and the report is flagged as failed.
    """
    positive = positive_label if positive_label is not None else max(ds.classes)
    plan = stratified_kfold(ds.labels, folds, seed)
    fold_seeds = [r.seed for r in Rng(seed).spawn(folds)]
    candidates = None
    if tune:
        candidates = gmm_grid(spec) if spec.kind == "gmm" else maf_grid(spec)
    results, good, timings = [], AggregateMetrics(), {}
    for f in range(folds):
        t0 = time.perf_counter()
        fs = fold_seeds[f]
        res = FoldResult(f, fs)
        try:
            tr, te = plan.train_indices(f), plan.test_indices(f)
            x, y = ds.features[tr], ds.labels[tr]
            chosen = with_seed(spec, fs)
            if candidates is not None:
                cands = [with_seed(c, fs) for c in candidates]
                chosen, res.tuning_scores = _select(x, y, cands, Rng(fs).spawn(1)[0])
            res.chosen = spec_summary(chosen)
            model = fit(x, y, chosen)
            pred = predict(model, ds.features[te])
            m = compute_metrics(pred.labels, ds.labels[te].tolist(), positive, pred.unclassified)
            res.metrics = m.to_dict()
            res.traces = [_thin(t, trace_every) for t in model.traces]
            good.folds.append(m)
        except Exception as exc:  # keep going, the report carries the marker
            res.status = "failed"
            res.error = f"{type(exc).__name__}: {exc}"
        timings[f"fold_{f}_seconds"] = round(time.perf_counter() - t0, 3)
        results.append(res)
    header = {
        "tool_version": __version__,
        "dataset": ds.provenance,
        "n": ds.n,
        "d": ds.d,
        "classes": [_plain(c) for c in ds.classes],
        "positive_label": _plain(positive),
        "model_name": spec.kind.upper(),
        "model": spec_summary(spec),
        "folds": folds,
        "master_seed": seed,
        "tuning": bool(tune),
        "inner_split": "stratified 80/20 of the non-test rows (80 fit, 20 validation)",
        "fold_sizes": plan.sizes(),
        "config": config or {},
    }
    acc = good.mean_accuracy if good.folds else None
    f1 = good.mean_f1 if good.folds else None
    return CvReport(header, results, acc, f1, timings)


def _plain(v):
    return v.item() if isinstance(v, np.generic) else v


def _thin(trace: dict, every: int) -> dict:
    out = {}
    for k, v in trace.items():
        if isinstance(v, list):
            out[k] = [float(t) for t in v[::every]]
        else:
            out[k] = _plain(v)
    return out


def default_spec(kind: str, dataset: str | None = None):
    """Hyperparameters used for the published tables, per dataset."""
    if kind == "gmm":
        return GmmSpec(k=3)
    arch = {
        "saheart": MafArch(n_layers=20, hidden_sizes=(30,) * 8),
        "haberman": MafArch(n_layers=10, hidden_sizes=(5,) * 9),
    }.get(dataset, MafArch())
    return MafSpec(arch=arch)
