"""``densityclf`` command line.

Exit codes: 0 success, 2 usage or input error, 3 training/runtime failure.

Settings come from (highest first) command-line flags, a flat ``key = value``
config file given with ``--config``, then built-in defaults.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, serialize
from .classifier import DensityFitError, GmmSpec, MafSpec, fit, predict
from .data import (
    BUILTIN_SCHEMAS,
    CsvSchema,
    SchemaMismatch,
    UnparseableValue,
    load_builtin,
    load_csv,
    make_circles,
    make_moons,
    read_feature_rows,
    write_csv,
)
from .flow import FlowTrainConfig, MafArch
from .harness import cross_validate, default_spec
from .numkit.random import Rng
from .plot import Grid, render_regions


class InputError(click.ClickException):
    exit_code = 2


class RunFailure(click.ClickException):
    exit_code = 3


# key -> (type, default). None defaults are filled per dataset or left unset.
SETTINGS = {
    "dataset": (str, None),
    "data": (str, None),
    "label_column": (str, "label"),
    "positive_label": (str, None),
    "model": (str, "gmm"),
    "seed": (int, 0),
    "k": (int, 3),
    "reg_epsilon": (float, 1e-6),
    "tol": (float, 1e-6),
    "max_iters": (int, 500),
    "init": (str, "kmeans++"),
    "pooled_covariance": (bool, False),
    "n_layers": (int, None),
    "hidden": (str, None),
    "activation": (str, "tanh"),
    "scale_clamp": (float, 7.0),
    "epochs": (int, FlowTrainConfig.epochs),
    "batch_size": (int, FlowTrainConfig.batch_size),
    "learning_rate": (float, FlowTrainConfig.learning_rate),
    "patience": (int, FlowTrainConfig.patience),
    "lr_decay": (float, FlowTrainConfig.lr_decay),
    "validation_fraction": (float, FlowTrainConfig.validation_fraction),
    "folds": (int, 5),
    "tune": (bool, False),
}


def _coerce(key, value):
    typ = SETTINGS[key][0]
    if value is None or isinstance(value, typ) and not (typ is int and isinstance(value, bool)):
        return value
    text = str(value).strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return typ(text)
    except ValueError:
        raise InputError(f"setting {key!r}: cannot read {value!r} as {typ.__name__}") from None


def read_config_file(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from None
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise InputError(f"{path}:{n}: unknown setting {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(flags: dict, config_path=None) -> dict:
    cfg = {k: default for k, (_, default) in SETTINGS.items()}
    if config_path:
        cfg.update(read_config_file(config_path))
    cfg.update({k: _coerce(k, v) for k, v in flags.items() if v is not None and k in SETTINGS})
    if cfg["model"] not in ("gmm", "maf"):
        raise InputError(f"model must be gmm or maf, got {cfg['model']!r}")
    if cfg["model"] == "maf":
        arch = default_spec("maf", cfg["dataset"]).arch
        if cfg["n_layers"] is None:
            cfg["n_layers"] = arch.n_layers
        if cfg["hidden"] is None:
            cfg["hidden"] = ",".join(str(h) for h in arch.hidden_sizes)
    return cfg


def parse_hidden(text) -> tuple:
    """``"30,30,30"`` or ``"30x8"`` (width x count)."""
    try:
        if "x" in text:
            width, count = text.split("x")
            return (int(width),) * int(count)
        return tuple(int(h) for h in text.split(","))
    except ValueError:
        raise InputError(f"cannot parse hidden sizes {text!r}") from None


def build_spec(cfg: dict):
    if cfg["model"] == "gmm":
        return GmmSpec(cfg["k"], cfg["max_iters"], cfg["tol"], cfg["reg_epsilon"], cfg["init"], cfg["seed"],
                       cfg["pooled_covariance"])
    arch = MafArch(cfg["n_layers"], parse_hidden(cfg["hidden"]), cfg["activation"], cfg["scale_clamp"])
    try:
        train = FlowTrainConfig(cfg["epochs"], cfg["batch_size"], cfg["learning_rate"], cfg["patience"],
                                cfg["seed"], cfg["validation_fraction"], cfg["lr_decay"])
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return MafSpec(arch, train)


def _schema(cfg) -> CsvSchema:
    if cfg["dataset"] in BUILTIN_SCHEMAS and cfg["dataset"] != "toy":
        return BUILTIN_SCHEMAS[cfg["dataset"]]
    return CsvSchema(name=cfg["dataset"] or "csv", label_column=cfg["label_column"])


def load_dataset(cfg):
    try:
        if cfg["data"]:
            return load_csv(cfg["data"], _schema(cfg))
        if cfg["dataset"] in BUILTIN_SCHEMAS and cfg["dataset"] != "toy":
            return load_builtin(cfg["dataset"])
    except (SchemaMismatch, UnparseableValue) as exc:
        raise InputError(str(exc)) from None
    except OSError as exc:
        raise InputError(f"cannot read data: {exc}") from None
    raise InputError("give --data PATH or --dataset saheart|haberman")


def positive_label(cfg, ds):
    if cfg["positive_label"] is not None:
        raw = cfg["positive_label"]
        for c in ds.classes:
            if str(c) == str(raw):
                return c
        raise InputError(f"positive label {raw!r} is not one of {ds.classes}")
    schema = BUILTIN_SCHEMAS.get(cfg["dataset"])
    if schema is not None and schema.positive_label in ds.classes:
        return schema.positive_label
    return max(ds.classes)


def provenance(cfg, command) -> dict:
    return {"tool": "densityclf", "tool_version": __version__, "command": command, "config": cfg}


def _write_text(path, text):
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _load_model(path):
    try:
        return serialize.load(path)
    except OSError as exc:
        raise InputError(f"cannot read model: {exc}") from None
    except (serialize.RecordError, KeyError, ValueError) as exc:
        raise InputError(f"bad model file {path}: {exc}") from None


def _model_config(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("config", {})


def _flags(**kw):
    return {k: v for k, v in kw.items() if v is not None}


def model_options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value settings file."),
        click.option("--dataset", help="Built-in dataset (saheart, haberman) or a name for --data."),
        click.option("--data", help="CSV with a header row."),
        click.option("--label-column", help="Label column of --data (default: label)."),
        click.option("--positive-label", help="Positive class for F1."),
        click.option("--model", type=click.Choice(["gmm", "maf"])),
        click.option("--seed", type=int),
        click.option("--k", type=int, help="Mixture components."),
        click.option("--reg-epsilon", type=float),
        click.option("--pooled-covariance/--no-pooled-covariance", default=None),
        click.option("--n-layers", type=int, help="Flow layers."),
        click.option("--hidden", help="MADE hidden sizes, e.g. 30,30 or 30x8."),
        click.option("--epochs", type=int),
        click.option("--batch-size", type=int),
        click.option("--learning-rate", type=float),
        click.option("--patience", type=int),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="densityclf")
def main():
    """Generative classifiers built on per-class density models."""


@main.command("generate-toy")
@click.argument("kind", type=click.Choice(["moons", "circles"]))
@click.option("--n", type=int, default=400, show_default=True)
@click.option("--noise", type=float, default=0.1, show_default=True)
@click.option("--factor", type=float, default=0.5, show_default=True, help="Inner radius (circles).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def generate_toy(kind, n, noise, factor, seed, out_path):
    """Write a two-class toy dataset as CSV."""
    try:
        if kind == "moons":
            ds = make_moons(n, noise, Rng(seed))
        else:
            ds = make_circles(n, factor, noise, Rng(seed))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cfg = {"kind": kind, "n": n, "noise": noise, "factor": factor, "seed": seed}
    meta = json.dumps(provenance(cfg, "generate-toy"), sort_keys=True)
    try:
        write_csv(ds, out_path, comments=[meta])
    except OSError as exc:
        raise InputError(f"cannot write {out_path}: {exc}") from None
    click.echo(f"wrote {ds.n} rows to {out_path}")


@main.command()
@model_options
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Model file (JSON).")
def train(config_path, out_path, **flags):
    """Fit a classifier on a whole dataset and save it."""
    cfg = resolve(_flags(**flags), config_path)
    ds = load_dataset(cfg)
    spec = build_spec(cfg)
    try:
        model = fit(ds.features, ds.labels, spec)
    except DensityFitError as exc:
        raise RunFailure(str(exc)) from None
    record = serialize.classifier_to_record(model, dict(cfg, feature_names=list(ds.feature_names)))
    record["provenance"] = provenance(cfg, "train")
    _write_text(out_path, serialize.dumps(record))
    click.echo(f"saved {spec.kind} classifier ({len(model.classes)} classes, d={model.d}) to {out_path}")


@main.command("predict")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.argument("input_path", type=click.Path(dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Predictions CSV (default stdout).")
@click.option("--threshold/--no-threshold", default=False, help="Leave low-likelihood points unclassified.")
def predict_cmd(model_path, input_path, out_path, threshold):
    """Label rows of INPUT_PATH with a saved model."""
    model = _load_model(model_path)
    mcfg = _model_config(model_path)
    names = mcfg.get("feature_names") or [f"x{i + 1}" for i in range(model.d)]
    schema = _schema({"dataset": mcfg.get("dataset"), "label_column": mcfg.get("label_column", "label")})
    try:
        text = Path(input_path).read_text(encoding="utf-8")
        x, _ = read_feature_rows(text, names, schema.categorical_encodings, schema.label_column)
    except OSError as exc:
        raise InputError(f"cannot read input: {exc}") from None
    except (SchemaMismatch, UnparseableValue) as exc:
        raise InputError(str(exc)) from None
    if x.shape[1] != model.d:
        raise InputError(f"model expects {model.d} features, input has {x.shape[1]}")
    pred = predict(model, x, use_threshold=threshold)
    cls = [str(c) for c in model.classes]
    meta = provenance({"model": model_path, "input": input_path, "threshold": threshold,
                       "model_config": mcfg}, "predict")
    lines = [f"# {json.dumps(meta, sort_keys=True)}",
             ",".join(["row_index", "predicted_label"] + [f"log_joint_{c}" for c in cls]
                      + [f"log_likelihood_{c}" for c in cls] + ["unclassified"])]
    for i, lab in enumerate(pred.labels):
        cells = [str(i), str(lab)]
        cells += [repr(float(v)) for v in pred.log_joint[i]]
        cells += [repr(float(v)) for v in pred.log_likelihood[i]]
        cells.append("1" if pred.unclassified[i] else "0")
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if out_path:
        _write_text(out_path, text)
    else:
        click.echo(text, nl=False)


@main.command("cross-validate")
@model_options
@click.option("--folds", type=int)
@click.option("--tune/--no-tune", default=None, help="Pick hyperparameters on an inner split.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def cross_validate_cmd(config_path, out_dir, **flags):
    """Stratified k-fold evaluation; writes report.json, table.md and timings.json."""
    cfg = resolve(_flags(**flags), config_path)
    ds = load_dataset(cfg)
    spec = build_spec(cfg)
    pos = positive_label(cfg, ds)
    try:
        report = cross_validate(ds, spec, cfg["folds"], cfg["seed"], pos, cfg["tune"], config=cfg)
    except ValueError as exc:  # bad fold count, class too small
        raise InputError(str(exc)) from None
    out = Path(out_dir)
    rec = report.to_dict()
    _write_text(out / "report.json", json.dumps(rec, indent=1, sort_keys=True) + "\n")
    table = f"<!-- {json.dumps(provenance(cfg, 'cross-validate'), sort_keys=True)} -->\n\n{report.table()}\n"
    _write_text(out / "table.md", table)
    _write_text(out / "timings.json", json.dumps(report.timings, indent=1, sort_keys=True) + "\n")
    click.echo(report.table())
    if report.failed:
        bad = [f"fold {f.fold}: {f.error}" for f in report.folds if f.status != "ok"]
        raise RunFailure("; ".join(bad))


@main.command("plot-regions")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--data", "data_path", type=click.Path(dir_okay=False), help="CSV of points to overlay.")
@click.option("--xmin", type=float, default=-4.0, show_default=True)
@click.option("--xmax", type=float, default=4.0, show_default=True)
@click.option("--ymin", type=float, default=-4.0, show_default=True)
@click.option("--ymax", type=float, default=4.0, show_default=True)
@click.option("--step", type=float, default=0.05, show_default=True)
@click.option("--threshold/--no-threshold", default=False)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def plot_regions(model_path, data_path, xmin, xmax, ymin, ymax, step, threshold, out_path):
    """Draw the decision regions of a 2-D model as SVG."""
    model = _load_model(model_path)
    if model.d != 2:
        raise InputError(f"region plots need a 2-D model, this one has d={model.d}")
    try:
        grid = Grid(xmin, xmax, ymin, ymax, step)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    mcfg = _model_config(model_path)
    pts = labels = None
    if data_path:
        names = mcfg.get("feature_names") or ["x1", "x2"]
        try:
            pts, labels = read_feature_rows(Path(data_path).read_text(encoding="utf-8"), names,
                                            label_column=mcfg.get("label_column", "label"))
        except (OSError, SchemaMismatch, UnparseableValue) as exc:
            raise InputError(str(exc)) from None
        labels = labels.tolist() if labels is not None else [None] * len(pts)
    meta = provenance({"model": model_path, "data": data_path, "grid": [xmin, xmax, ymin, ymax, step],
                       "threshold": threshold, "model_config": mcfg}, "plot-regions")
    svg = render_regions(model, grid, threshold, pts, labels, meta)
    _write_text(out_path, svg)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    sys.exit(main())
