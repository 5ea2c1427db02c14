"""Datasets and CSV ingestion."""

import csv
import hashlib
import io
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class SchemaMismatch(ValueError):
    pass


class ChecksumMismatch(ValueError):
    pass


class UnparseableValue(ValueError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"cannot parse value {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("one label per row is required")
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("one name per feature column is required")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list:
        return sorted(np.unique(self.labels).tolist())

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], list(self.feature_names), self.provenance)


@dataclass(frozen=True)
class CsvSchema:
    """How to read one CSV layout.

    ``categorical_encodings`` maps a column name to ``{text: number}``.
    ``expected_rows`` / ``expected_features`` are checked when set.
    """

    name: str
    label_column: str
    categorical_encodings: dict = field(default_factory=dict)
    expected_rows: int | None = None
    expected_features: int | None = None
    positive_label: object = None


SAHEART = CsvSchema(
    name="saheart",
    label_column="chd",
    categorical_encodings={"famhist": {"Present": 1.0, "Absent": 0.0}},
    expected_rows=462,
    expected_features=9,
    positive_label=1,
)

# status 2 = died within five years of surgery
HABERMAN = CsvSchema(
    name="haberman",
    label_column="status",
    expected_rows=306,
    expected_features=3,
    positive_label=2,
)

TOY = CsvSchema(name="toy", label_column="label", expected_features=2, positive_label=1)

BUILTIN_SCHEMAS = {"saheart": SAHEART, "haberman": HABERMAN, "toy": TOY}


def _parse_label(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def read_csv_text(text: str, schema: CsvSchema, provenance: str = "") -> Dataset:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaMismatch("empty file: no header row") from None
    if schema.label_column not in header:
        raise SchemaMismatch(f"label column {schema.label_column!r} missing from header {header}")
    label_idx = header.index(schema.label_column)
    feature_names = [h for i, h in enumerate(header) if i != label_idx]
    if schema.expected_features is not None and len(feature_names) != schema.expected_features:
        raise SchemaMismatch(
            f"{schema.name}: expected {schema.expected_features} features, found {len(feature_names)}"
        )
    rows, labels = [], []
    for row_no, raw in enumerate(reader, start=1):
        if not raw:
            continue
        if len(raw) != len(header):
            raise SchemaMismatch(f"row {row_no} has {len(raw)} cells, header has {len(header)}")
        values = []
        for col, cell in zip(header, raw):
            cell = cell.strip()
            if cell == "":
                raise UnparseableValue(row_no, col, cell)
            if col == schema.label_column:
                labels.append(_parse_label(cell))
                continue
            enc = schema.categorical_encodings.get(col)
            try:
                values.append(enc[cell] if enc is not None else float(cell))
            except (KeyError, ValueError):
                raise UnparseableValue(row_no, col, cell) from None
        rows.append(values)
    if schema.expected_rows is not None and len(rows) != schema.expected_rows:
        raise SchemaMismatch(f"{schema.name}: expected {schema.expected_rows} rows, found {len(rows)}")
    features = np.array(rows, dtype=float).reshape(len(rows), len(feature_names))
    return Dataset(features, np.array(labels), feature_names, provenance or schema.name)


def load_csv(path, schema: CsvSchema) -> Dataset:
    path = Path(path)
    return read_csv_text(path.read_text(encoding="utf-8"), schema, provenance=str(path))


def load_builtin(name: str) -> Dataset:
    """Load one of the bundled copies (``saheart`` or ``haberman``)."""
    schema = BUILTIN_SCHEMAS[name]
    text = resources.files("densityclf.data").joinpath("resources", f"{name}.csv").read_text("utf-8")
    return read_csv_text(text, schema, provenance=f"builtin:{name}")


def write_csv(ds: Dataset, path, label_column="label", comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(ds.feature_names) + [label_column])
    for x, y in zip(ds.features, ds.labels):
        w.writerow([repr(float(v)) for v in x] + [y])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_feature_rows(text: str, feature_names, encodings=None, label_column=None):
    """Pull the named feature columns out of CSV text.

    Returns ``(features, labels)``; ``labels`` is None when ``label_column``
    is absent from the header. Extra columns are ignored.
    """
    encodings = encodings or {}
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaMismatch("empty file: no header row") from None
    missing = [f for f in feature_names if f not in header]
    if missing:
        raise SchemaMismatch(f"columns {missing} missing from header {header}")
    cols = [header.index(f) for f in feature_names]
    label_idx = header.index(label_column) if label_column in header else None
    rows, labels = [], []
    for row_no, raw in enumerate(reader, start=1):
        if not raw:
            continue
        if len(raw) != len(header):
            raise SchemaMismatch(f"row {row_no} has {len(raw)} cells, header has {len(header)}")
        values = []
        for name, i in zip(feature_names, cols):
            cell = raw[i].strip()
            enc = encodings.get(name)
            try:
                values.append(enc[cell] if enc is not None else float(cell))
            except (KeyError, ValueError):
                raise UnparseableValue(row_no, name, cell) from None
        rows.append(values)
        if label_idx is not None:
            labels.append(_parse_label(raw[label_idx].strip()))
    x = np.array(rows, dtype=float).reshape(len(rows), len(feature_names))
    return x, (np.array(labels) if label_idx is not None else None)


def fetch_csv(url: str, dest, sha256: str, schema: CsvSchema, timeout: float = 30.0) -> Dataset:
    """Download ``url`` to ``dest`` and load it, verifying the SHA-256 digest.

    An existing ``dest`` with the right digest is reused without a download.
    A mismatching download is not written.
    """
    dest = Path(dest)
    if dest.exists() and hashlib.sha256(dest.read_bytes()).hexdigest() == sha256:
        return load_csv(dest, schema)
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        payload = resp.read()
    digest = hashlib.sha256(payload).hexdigest()
    if digest != sha256:
        raise ChecksumMismatch(f"{url}: sha256 {digest} does not match expected {sha256}")
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(payload)
    return load_csv(dest, schema)
