"""Maximum-likelihood training of a MAF with Adam and early stopping."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..numkit import autodiff as ad
from ..numkit.random import Rng
from .maf import MafArch, MafModel, maf_log_density

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    """Training NLL became NaN or infinite."""


@dataclass
class FlowTrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    patience: int = 20
    seed: int = 0
    validation_fraction: float = 0.2
    lr_decay: float = 0.5
    identity_init: bool = True  # zero output layers: the untrained flow is the base density

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")


class Adam:
    """Adam over a list of arrays, updated in place."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainResult:
    model: MafModel
    train_nll: list = field(default_factory=list)
    val_nll: list = field(default_factory=list)
    best_epoch: int = -1
    learning_rates: list = field(default_factory=list)


def mean_nll(model: MafModel, x: np.ndarray) -> float:
    return float(-np.mean(maf_log_density(model, x)))


def nll_and_grads(model: MafModel, x: np.ndarray):
    """Mean NLL on ``x`` and its gradient for every parameter (in ``model.params()`` order)."""
    tape = ad.Tape()
    leaves = [[tape.leaf(p) for p in layer.params()] for layer in model.layers]
    logp = maf_log_density(model, x, leaves)
    loss = ad.mul(ad.sum_(logp), -1.0 / x.shape[0])
    grads = ad.backward(tape, loss)
    return float(loss.value), [grads[v] for layer in leaves for v in layer]


def maf_train(data, arch: MafArch, cfg: FlowTrainConfig, scaler=None) -> TrainResult:
    """Fit a MAF to standardized ``data`` by minimizing the mean negative log-density.

    A ``validation_fraction`` hold-out drives early stopping and the
    learning-rate schedule (halved after ``patience // 2`` epochs without
    improvement). The best-validation parameters are returned.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need an (n, d) array with n >= 2")
    n, d = data.shape
    rng = Rng(cfg.seed)
    init_rng, split_rng, batch_rng = rng.spawn(3)

    model = MafModel.initialize(d, arch, init_rng, scaler=scaler, identity=cfg.identity_init)
    perm = split_rng.permutation(n)
    n_val = min(max(1, int(round(cfg.validation_fraction * n))), n - 1)
    val, train = data[perm[:n_val]], data[perm[n_val:]]

    result = TrainResult(model=model)
    if cfg.epochs <= 0:
        return result

    params = model.params()
    opt = Adam(params, cfg.learning_rate)
    best_val = mean_nll(model, val)
    best_params = [p.copy() for p in params]
    since_best = 0
    since_decay = 0
    decay_every = max(1, cfg.patience // 2)

    for epoch in range(cfg.epochs):
        order = batch_rng.permutation(train.shape[0])
        batch_losses = []
        for start in range(0, train.shape[0], cfg.batch_size):
            batch = train[order[start:start + cfg.batch_size]]
            loss, grads = nll_and_grads(model, batch)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"training NLL is {loss} at epoch {epoch}")
            opt.step(grads)
            batch_losses.append(loss * batch.shape[0])
        result.train_nll.append(float(np.sum(batch_losses) / train.shape[0]))
        val_nll = mean_nll(model, val)
        if not math.isfinite(val_nll):
            raise NonFiniteLoss(f"validation NLL is {val_nll} at epoch {epoch}")
        result.val_nll.append(val_nll)
        result.learning_rates.append(opt.lr)

        if val_nll < best_val:
            best_val = val_nll
            best_params = [p.copy() for p in params]
            result.best_epoch = epoch
            since_best = since_decay = 0
        else:
            since_best += 1
            since_decay += 1
        if since_decay >= decay_every:
            opt.lr *= cfg.lr_decay
            since_decay = 0
        if since_best >= cfg.patience:
            log.debug("early stop at epoch %d (best %d)", epoch, result.best_epoch)
            break

    for p, best in zip(params, best_params):
        p[...] = best
    return result
