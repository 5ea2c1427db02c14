from .dataset import (
    BUILTIN_SCHEMAS,
    HABERMAN,
    SAHEART,
    TOY,
    ChecksumMismatch,
    CsvSchema,
    Dataset,
    SchemaMismatch,
    UnparseableValue,
    fetch_csv,
    load_builtin,
    load_csv,
    read_csv_text,
    read_feature_rows,
    write_csv,
)
from .folds import ClassTooSmall, FoldPlan, stratified_kfold, stratified_split
from .metrics import AggregateMetrics, MetricsReport, compute_metrics
from .preprocessing import Scaler, apply_scaler, fit_scaler
from .toy import make_circles, make_moons
