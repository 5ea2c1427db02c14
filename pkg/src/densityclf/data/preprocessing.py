import numpy as np


class Scaler:
    """Per-column standardization fitted on training data only."""

    def __init__(self, means, stddevs):
        self.means = np.asarray(means, dtype=float)
        self.stddevs = np.asarray(stddevs, dtype=float)
        if np.any(self.stddevs <= 0):
            raise ValueError("stddevs must be positive")

    def __repr__(self):
        return f"Scaler(means={self.means.tolist()}, stddevs={self.stddevs.tolist()})"

    @property
    def log_jacobian(self) -> float:
        """log|det| of the standardizing map, shared by every class."""
        return float(-np.sum(np.log(self.stddevs)))

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.means) / self.stddevs

    def inverse_transform(self, z):
        return np.asarray(z, dtype=float) * self.stddevs + self.means


def fit_scaler(train) -> Scaler:
    x = np.asarray(getattr(train, "features", train), dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty (n, d) training matrix")
    sd = x.std(axis=0)
    # constant columns keep unit scale and map to zero
    sd = np.where(sd > 1e-12, sd, 1.0)
    return Scaler(x.mean(axis=0), sd)


def apply_scaler(scaler: Scaler, data):
    return scaler.transform(getattr(data, "features", data))
