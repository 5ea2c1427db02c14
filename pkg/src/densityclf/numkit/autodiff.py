"""Tape-based reverse-mode differentiation over numpy arrays.

Only the handful of primitives the flow objective needs are provided: affine
maps, tanh/relu, exp, log, add, multiply and sum. Every primitive accepts plain
arrays too; when none of its inputs is a :class:`Var` it simply returns the
numpy result, so the same model code serves both inference and training.

    tape = Tape()
    w = tape.leaf(np.array(3.0))
    f = w * w
    grads = backward(tape, f)
    grads[w]   # -> 6.0
"""

import numpy as np


class CycleDetected(RuntimeError):
    """A node refers to a parent that is not recorded before it."""


class Var:
    __slots__ = ("tape", "id", "value", "parents", "vjp")
    __array_ufunc__ = None  # make ndarray <op> Var defer to the reflected Var method

    def __init__(self, tape, value, parents=(), vjp=None):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.id = tape._append(self)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(id={self.id}, shape={np.shape(self.value)})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))


class Tape:
    """Ordered record of primitive applications; parents always precede children."""

    def __init__(self):
        self.nodes: list[Var] = []

    def __len__(self):
        return len(self.nodes)

    def _append(self, var):
        self.nodes.append(var)
        return len(self.nodes) - 1

    def leaf(self, value) -> Var:
        return Var(self, np.asarray(value, dtype=float))


def _val(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def affine(x, w, b=None):
    """``x @ w + b`` for a batch ``x`` of shape (n, p) and ``w`` of shape (p, q)."""
    xv, wv = _val(x), _val(w)
    out = xv @ wv
    if b is not None:
        out = out + _val(b)
    tape = _tape_of(x, w, b)
    if tape is None:
        return out
    parents = tuple(p for p in (x, w, b) if isinstance(p, Var))
    x_var, w_var, b_var = isinstance(x, Var), isinstance(w, Var), isinstance(b, Var)

    def vjp(g):
        grads = []
        if x_var:
            grads.append(g @ wv.T)
        if w_var:
            grads.append(xv.T @ g)
        if b_var:
            grads.append(_unbroadcast(g, b.value.shape))
        return grads

    return Var(tape, out, parents, vjp)


def _unary(x, fn, dfn):
    xv = _val(x)
    out = fn(xv)
    if not isinstance(x, Var):
        return out
    return Var(x.tape, out, (x,), lambda g: (g * dfn(xv, out),))


def tanh(x):
    return _unary(x, np.tanh, lambda xv, out: 1.0 - out * out)


def relu(x):
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda xv, out: (xv > 0.0).astype(float))


def exp(x):
    return _unary(x, np.exp, lambda xv, out: out)


def log(x):
    return _unary(x, np.log, lambda xv, out: 1.0 / xv)


def add(x, y):
    xv, yv = _val(x), _val(y)
    out = xv + yv
    tape = _tape_of(x, y)
    if tape is None:
        return out
    parents = tuple(p for p in (x, y) if isinstance(p, Var))

    def vjp(g):
        return [_unbroadcast(g, np.shape(p.value)) for p in parents]

    return Var(tape, out, parents, vjp)


def mul(x, y):
    xv, yv = _val(x), _val(y)
    out = xv * yv
    tape = _tape_of(x, y)
    if tape is None:
        return out
    parents = tuple(p for p in (x, y) if isinstance(p, Var))
    x_var = isinstance(x, Var)
    y_var = isinstance(y, Var)

    def vjp(g):
        grads = []
        if x_var:
            grads.append(_unbroadcast(g * yv, np.shape(xv)))
        if y_var:
            grads.append(_unbroadcast(g * xv, np.shape(yv)))
        return grads

    return Var(tape, out, parents, vjp)


def sum_(x, axis=None):
    xv = _val(x)
    out = np.sum(xv, axis=axis)
    if not isinstance(x, Var):
        return out
    shape = xv.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape),)

    return Var(x.tape, np.asarray(out), (x,), vjp)


def backward(tape: Tape, root: Var) -> dict:
    """Gradients of the scalar ``root`` with respect to every leaf on ``tape``.

    Returns a mapping ``leaf Var -> ndarray``; leaves that do not influence the
    root map to zeros.
    """
    if root.tape is not tape:
        raise ValueError("root was not recorded on this tape")
    if np.size(root.value) != 1:
        raise ValueError("backward needs a scalar root")
    nodes = tape.nodes
    grads: list = [None] * len(nodes)
    grads[root.id] = np.ones_like(root.value)
    for i in range(root.id, -1, -1):
        node = nodes[i]
        g = grads[i]
        if g is None or node.vjp is None:
            continue
        for parent in node.parents:
            if parent.id >= i:
                raise CycleDetected(f"node {i} has parent {parent.id} recorded after it")
        for parent, pg in zip(node.parents, node.vjp(g)):
            j = parent.id
            grads[j] = pg if grads[j] is None else grads[j] + pg
    out = {}
    for node in nodes:
        if node.vjp is None:
            g = grads[node.id]
            out[node] = np.zeros_like(node.value) if g is None else np.asarray(g, dtype=float)
    return out
