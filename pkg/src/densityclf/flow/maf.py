"""Masked autoregressive flow: a stack of MADE-conditioned affine layers.

Layer 1 reads the base noise ``u`` and layer ``L`` emits the data ``x``. The
density of ``x`` is obtained by inverting the layers from last to first and
subtracting each layer's log-determinant from the base log-density.
"""

from dataclasses import dataclass, field

import numpy as np

from ..numkit import autodiff as ad
from ..numkit.random import Rng
from .made import DimensionMismatch, MadeNetwork, build_masks, layer_forward, layer_inverse

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class MafArch:
    n_layers: int = 5
    hidden_sizes: tuple = (16, 16)
    activation: str = "tanh"
    scale_clamp: float = 7.0
    orderings: list | None = None  # default alternates identity / reversed

    def ordering(self, layer: int, d: int) -> np.ndarray:
        if self.orderings is not None:
            return np.asarray(self.orderings[layer], dtype=int)
        forward = np.arange(1, d + 1)
        return forward if layer % 2 == 0 else forward[::-1].copy()


@dataclass
class MafModel:
    layers: list
    d: int
    # the Scaler the training data was standardized with; None means identity
    scaler: object = None
    arch: MafArch = field(default_factory=MafArch)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a flow needs at least one layer")
        if any(layer.d != self.d for layer in self.layers):
            raise DimensionMismatch("all layers must share the model dimension")

    @classmethod
    def initialize(cls, d: int, arch: MafArch, rng: Rng, scaler=None, identity=True):
        layers = []
        for i in range(arch.n_layers):
            spec = build_masks(d, arch.hidden_sizes, arch.ordering(i, d))
            layers.append(MadeNetwork.initialize(spec, rng, arch.activation, arch.scale_clamp,
                                                 identity=identity))
        return cls(layers, d, scaler, arch)

    def params(self) -> list:
        return [p for layer in self.layers for p in layer.params()]

    def copy(self) -> "MafModel":
        return MafModel([layer.copy() for layer in self.layers], self.d, self.scaler, self.arch)

    def log_density(self, x_raw) -> np.ndarray:
        """Log-density of raw (unstandardized) rows, in standardized units."""
        x = np.asarray(x_raw, dtype=float)
        if self.scaler is not None:
            x = self.scaler.transform(x)
        return maf_log_density(self, x)


def standard_normal_logpdf(u):
    u_val = ad._val(u)
    d = u_val.shape[-1]
    sq = ad.sum_(ad.mul(u, u), axis=-1)
    return ad.add(ad.mul(sq, -0.5), -0.5 * d * LOG_2PI)


def maf_log_density(model: MafModel, x, params=None):
    """``log p(x)`` for standardized ``x`` (vector or ``(n, d)`` batch).

    ``params`` optionally holds one parameter list per layer (tape variables
    during training).
    """
    single = False
    if not isinstance(x, ad.Var):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x, single = x[None, :], True
        if x.ndim != 2 or x.shape[1] != model.d:
            raise DimensionMismatch(f"expected (n, {model.d}) input, got {x.shape}")
    s = x
    total_logdet = 0.0
    for i in range(len(model.layers) - 1, -1, -1):
        layer_params = None if params is None else params[i]
        s, logdet = layer_inverse(model.layers[i], s, layer_params)
        total_logdet = ad.add(total_logdet, logdet)
    out = ad.add(standard_normal_logpdf(s), ad.mul(total_logdet, -1.0))
    if single:
        return float(out[0])
    return out


def maf_sample(model: MafModel, rng: Rng, n: int) -> np.ndarray:
    """Draw ``n`` rows: base noise pushed through layers 1..L, then un-standardized."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = rng.standard_normal((n, model.d))
    for layer in model.layers:
        s = layer_forward(layer, s)
    if model.scaler is not None:
        s = model.scaler.inverse_transform(s)
    return s
