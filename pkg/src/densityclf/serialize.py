"""Versioned JSON records for fitted models.

Floats go through ``json`` which writes the shortest repr that round-trips,
so a saved model reloads bit-for-bit.
"""

import json
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import ClassPrior, GenerativeClassifier
from .data.preprocessing import Scaler
from .flow import MadeNetwork, MafArch, MafModel, build_masks
from .gmm import GaussianComponent, GmmModel

RECORD_VERSION = 1


class RecordError(ValueError):
    pass


def _plain(v):
    """numpy scalars / arrays to JSON-friendly python values."""
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def _check(rec, kind):
    if not isinstance(rec, dict) or rec.get("kind") != kind:
        raise RecordError(f"expected a {kind!r} record, got {rec.get('kind') if isinstance(rec, dict) else rec!r}")
    if rec.get("version") != RECORD_VERSION:
        raise RecordError(f"unsupported {kind} record version {rec.get('version')!r}")


def scaler_to_record(sc: Scaler | None):
    if sc is None:
        return None
    return {"kind": "scaler", "version": RECORD_VERSION, "means": _plain(sc.means), "stddevs": _plain(sc.stddevs)}


def scaler_from_record(rec):
    if rec is None:
        return None
    _check(rec, "scaler")
    return Scaler(rec["means"], rec["stddevs"])


def gmm_to_record(model: GmmModel, reg_epsilon=None, seed=None) -> dict:
    return {
        "kind": "gmm",
        "version": RECORD_VERSION,
        "k": model.k,
        "d": model.dim,
        "weights": _plain(model.weights),
        "means": [_plain(c.mean) for c in model.components],
        # row-major d*d per component
        "covariances": [_plain(c.cov.ravel()) for c in model.components],
        "reg_epsilon": reg_epsilon,
        "seed": seed,
    }


def gmm_from_record(rec) -> GmmModel:
    _check(rec, "gmm")
    d = rec["d"]
    comps = [GaussianComponent(m, np.asarray(c, dtype=float).reshape(d, d))
             for m, c in zip(rec["means"], rec["covariances"])]
    if len(comps) != rec["k"]:
        raise RecordError("component count does not match k")
    return GmmModel(comps, rec["weights"])


def maf_to_record(model: MafModel) -> dict:
    arch = model.arch
    return {
        "kind": "maf",
        "version": RECORD_VERSION,
        "d": model.d,
        "arch": {
            "n_layers": len(model.layers),
            "hidden_sizes": list(arch.hidden_sizes),
            "activation": arch.activation,
            "scale_clamp": arch.scale_clamp,
        },
        "layers": [
            {
                "ordering": _plain(layer.spec.ordering),
                "activation": layer.activation,
                "scale_clamp": layer.scale_clamp,
                "params": [_plain(p) for p in layer.params()],
            }
            for layer in model.layers
        ],
        "scaler": scaler_to_record(model.scaler),
    }


def maf_from_record(rec) -> MafModel:
    _check(rec, "maf")
    d = rec["d"]
    a = rec["arch"]
    layers = []
    for lay in rec["layers"]:
        spec = build_masks(d, a["hidden_sizes"], lay["ordering"])
        layers.append(MadeNetwork(spec, [np.asarray(p, dtype=float) for p in lay["params"]],
                                  lay["activation"], lay["scale_clamp"]))
    arch = MafArch(a["n_layers"], tuple(a["hidden_sizes"]), a["activation"], a["scale_clamp"],
                   [lay["ordering"] for lay in rec["layers"]])
    return MafModel(layers, d, scaler_from_record(rec.get("scaler")), arch)


def classifier_to_record(model: GenerativeClassifier, config=None) -> dict:
    if model.kind == "gmm":
        dens = [gmm_to_record(m, config.get("reg_epsilon") if config else None,
                              config.get("seed") if config else None) for m in model.densities]
    else:
        dens = [maf_to_record(m) for m in model.densities]
    thr = model.reject_log_threshold
    return {
        "kind": "classifier",
        "version": RECORD_VERSION,
        "tool_version": __version__,
        "density_kind": model.kind,
        "prior": {"labels": [_plain(c) for c in model.classes], "log_priors": _plain(model.prior.log_priors)},
        "scaler": scaler_to_record(model.scaler),
        "reject_log_threshold": None if thr is None else _plain(thr),
        "densities": dens,
        "config": config or {},
    }


def classifier_from_record(rec) -> GenerativeClassifier:
    _check(rec, "classifier")
    kind = rec["density_kind"]
    loader = {"gmm": gmm_from_record, "maf": maf_from_record}.get(kind)
    if loader is None:
        raise RecordError(f"unknown density kind {kind!r}")
    prior = ClassPrior(rec["prior"]["labels"], rec["prior"]["log_priors"])
    dens = [loader(r) for r in rec["densities"]]
    thr = rec.get("reject_log_threshold")
    return GenerativeClassifier(prior, dens, kind, scaler_from_record(rec["scaler"]),
                                None if thr is None else np.asarray(thr, dtype=float))


def dumps(rec) -> str:
    return json.dumps(rec, indent=1, sort_keys=True) + "\n"


def save(model: GenerativeClassifier, path, config=None):
    Path(path).write_text(dumps(classifier_to_record(model, config)), encoding="utf-8")


def load(path) -> GenerativeClassifier:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RecordError(f"{path}: not a JSON model record ({exc})") from None
    return classifier_from_record(rec)
