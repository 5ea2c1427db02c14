"""MADE conditioners and the affine autoregressive layer built on them.

A layer maps ``s_prev -> s_next`` with

    s_next[j] = exp(a_j(s_prev[<j])) * s_prev[j] + b_j(s_prev[<j])

where ``<j`` means "dimensions that come before ``j`` in the layer's ordering".
The shift/log-scale pair ``(a_j, b_j)`` comes from a masked feed-forward net.
Going forward is one network pass; inverting needs one pass per dimension.

All functions accept a single vector of length ``d`` or a batch ``(n, d)``.
The layer maths is written with the :mod:`densityclf.numkit` primitives so
passing tape variables as ``params`` records the computation for training.
"""

from dataclasses import dataclass

import numpy as np

from ..numkit import autodiff as ad
from ..numkit.random import Rng

ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu}


class InvalidOrdering(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MaskSpec:
    """Degrees and binary masks of one MADE network.

    ``masks[i]`` has shape ``(fan_in, fan_out)`` to match the ``x @ W``
    convention. The last mask is shared by the scale and the shift outputs.
    """

    d: int
    hidden_sizes: tuple
    ordering: np.ndarray
    degrees: tuple
    masks: tuple

    @property
    def output_degrees(self) -> np.ndarray:
        return self.ordering

    def connectivity(self) -> np.ndarray:
        """Boolean (d_out, d_in) reachability of output pair j from input z."""
        reach = self.masks[0].astype(bool).astype(int)
        for m in self.masks[1:]:
            reach = (reach @ m > 0).astype(int)
        return reach.T.astype(bool)


def build_masks(d: int, hidden_sizes, ordering=None) -> MaskSpec:
    """Construct MADE masks.

    ``ordering[i]`` is the autoregressive position (1..d) of input dimension
    ``i``; the identity ordering is used when omitted. Hidden units cycle
    through degrees ``1..max(d-1, 1)``. Hidden connections need
    ``deg(out) >= deg(in)``, output connections ``deg(out) > deg(in)``, so the
    pair for dimension ``j`` never sees inputs at or after ``j``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    hidden_sizes = tuple(int(h) for h in hidden_sizes)
    if not hidden_sizes or any(h < 1 for h in hidden_sizes):
        raise ValueError("need at least one hidden layer, all sizes >= 1")
    if ordering is None:
        ordering = np.arange(1, d + 1)
    ordering = np.asarray(ordering, dtype=int)
    if ordering.shape != (d,) or sorted(ordering.tolist()) != list(range(1, d + 1)):
        raise InvalidOrdering(f"ordering must be a permutation of 1..{d}, got {ordering.tolist()}")

    cycle = max(d - 1, 1)
    degrees = [ordering]
    for h in hidden_sizes:
        degrees.append(np.arange(h) % cycle + 1)
    masks = []
    for deg_in, deg_out in zip(degrees[:-1], degrees[1:]):
        masks.append((deg_out[None, :] >= deg_in[:, None]).astype(float))
    masks.append((ordering[None, :] > degrees[-1][:, None]).astype(float))
    degrees.append(ordering)
    return MaskSpec(d, hidden_sizes, ordering, tuple(degrees), tuple(masks))


class MadeNetwork:
    """Masked network emitting per-dimension log-scale ``a`` and shift ``b``.

    Parameters are kept in one flat list (see :meth:`params`):
    ``[W_1, c_1, ..., W_H, c_H, W_a, c_a, W_b, c_b]``.
    """

    def __init__(self, spec: MaskSpec, params, activation="tanh", scale_clamp=7.0):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.spec = spec
        self.activation = activation
        self.scale_clamp = scale_clamp
        self._params = [np.asarray(p, dtype=float) for p in params]
        expected = _param_shapes(spec)
        got = [p.shape for p in self._params]
        if got != expected:
            raise DimensionMismatch(f"parameter shapes {got} do not match masks {expected}")

    @classmethod
    def initialize(cls, spec: MaskSpec, rng: Rng, activation="tanh", scale_clamp=7.0,
                   identity=True):
        """Uniform(+-1/sqrt(fan_in)) weights.

        With ``identity`` the output layer starts at zero so the layer is the
        identity map; otherwise it is drawn like the hidden layers.
        """
        params = []
        shapes = _param_shapes(spec)
        n_out = 4
        for i in range(0, len(shapes), 2):
            w_shape, b_shape = shapes[i], shapes[i + 1]
            is_output = i >= len(shapes) - n_out
            if is_output and identity:
                params += [np.zeros(w_shape), np.zeros(b_shape)]
                continue
            bound = 1.0 / np.sqrt(w_shape[0])
            params.append((rng.uniform(w_shape) * 2.0 - 1.0) * bound)
            params.append((rng.uniform(b_shape) * 2.0 - 1.0) * bound)
        return cls(spec, params, activation, scale_clamp)

    @property
    def d(self) -> int:
        return self.spec.d

    def params(self) -> list:
        return self._params

    def copy(self) -> "MadeNetwork":
        return MadeNetwork(self.spec, [p.copy() for p in self._params],
                           self.activation, self.scale_clamp)

    def masked(self, params=None) -> list:
        """``(masked weight, bias)`` pairs, hidden layers first then a and b heads."""
        params = self._params if params is None else params
        masks = self.spec.masks
        pairs = []
        for i, mask in enumerate(masks[:-1]):
            pairs.append((ad.mul(params[2 * i], mask), params[2 * i + 1]))
        out_mask = masks[-1]
        k = 2 * (len(masks) - 1)
        pairs.append((ad.mul(params[k], out_mask), params[k + 1]))
        pairs.append((ad.mul(params[k + 2], out_mask), params[k + 3]))
        return pairs


def _param_shapes(spec: MaskSpec) -> list:
    shapes = []
    for mask in spec.masks[:-1]:
        shapes += [mask.shape, (mask.shape[1],)]
    out = spec.masks[-1].shape
    shapes += [out, (out[1],), out, (out[1],)]
    return shapes


def _conditioner(masked, activation, clamp, v):
    act = ACTIVATIONS[activation]
    h = v
    for w, c in masked[:-2]:
        h = act(ad.affine(h, w, c))
    (wa, ca), (wb, cb) = masked[-2], masked[-1]
    a = ad.affine(h, wa, ca)
    if clamp is not None and np.isfinite(clamp):
        # smooth clamp to (-clamp, clamp), slope 1 at the origin
        a = ad.mul(ad.tanh(ad.mul(a, 1.0 / clamp)), clamp)
    b = ad.affine(h, wb, cb)
    return a, b


def _as_batch(v, d):
    if isinstance(v, ad.Var):
        if v.value.ndim != 2 or v.value.shape[1] != d:
            raise DimensionMismatch(f"expected shape (n, {d}), got {v.value.shape}")
        return v, False
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != d:
            raise DimensionMismatch(f"expected length {d}, got {arr.shape[0]}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != d:
        raise DimensionMismatch(f"expected shape (n, {d}), got {arr.shape}")
    return arr, False


def made_forward(net: MadeNetwork, v, params=None):
    """Conditioner outputs ``(a, b)`` for input ``v``."""
    x, single = _as_batch(v, net.d)
    a, b = _conditioner(net.masked(params), net.activation, net.scale_clamp, x)
    if single:
        return a[0], b[0]
    return a, b


def layer_forward(net: MadeNetwork, s_prev, params=None):
    """Generation direction: one conditioner pass on ``s_prev``."""
    x, single = _as_batch(s_prev, net.d)
    a, b = _conditioner(net.masked(params), net.activation, net.scale_clamp, x)
    out = ad.add(ad.mul(ad.exp(a), x), b)
    return out[0] if single else out


def layer_inverse(net: MadeNetwork, s_next, params=None):
    """Density direction: recover ``s_prev`` one dimension at a time.

    Returns ``(s_prev, logdet)`` where ``logdet = sum_j a_j(s_prev)`` is the log
    determinant of the forward Jacobian at ``s_prev``.
    """
    y, single = _as_batch(s_next, net.d)
    masked = net.masked(params)
    d = net.d
    u = np.zeros((ad._val(y).shape[0], d))
    a = None
    for j in np.argsort(net.spec.ordering, kind="stable"):
        a, b = _conditioner(masked, net.activation, net.scale_clamp, u)
        onehot = np.zeros(d)
        onehot[j] = 1.0
        solved = ad.mul(ad.add(y, ad.mul(b, -1.0)), ad.exp(ad.mul(a, -1.0)))
        u = ad.add(u, ad.mul(solved, onehot))
    # the final pass never reads the last dimension in the ordering, so its
    # outputs equal the conditioner evaluated at the fully recovered s_prev
    logdet = ad.sum_(a, axis=1)
    if single:
        return u[0], float(logdet[0])
    return u, logdet
