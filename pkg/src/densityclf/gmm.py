"""Gaussian mixture densities fitted by expectation-maximization.

Everything is accumulated in log space: component log-densities come from a
Cholesky factor and responsibilities are normalized with log-sum-exp, so points
far from every component still get well-defined responsibilities.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .numkit.linalg import chol_logdet, chol_solve_lower, cholesky, logsumexp
from .numkit.random import Rng

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


class DimensionMismatch(ValueError):
    pass


class AllZeroDensity(FloatingPointError):
    """Every component gives -inf log-density to some point."""


class EmptyComponent(RuntimeError):
    def __init__(self, index, mass):
        super().__init__(f"component {index} has responsibility mass {mass:.3g}")
        self.index = index


class InsufficientData(ValueError):
    pass


@dataclass
class GaussianComponent:
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)
    logdet: float = field(init=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.cov.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"covariance {self.cov.shape} vs mean of length {self.dim}")
        self.chol = cholesky(self.cov)
        self.logdet = chol_logdet(self.chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class GmmModel:
    components: list
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.components) != self.weights.shape[0] or not self.components:
            raise ValueError("need one weight per component and at least one component")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be a probability vector, got {self.weights}")
        if len({c.dim for c in self.components}) != 1:
            raise DimensionMismatch("components disagree on dimension")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def log_density(self, x) -> np.ndarray:
        return mixture_logpdf(x, self)


@dataclass
class EmConfig:
    k: int = 1
    max_iters: int = 500
    tol: float = 1e-6
    reg_epsilon: float = 1e-6
    init: str = "kmeans++"  # or "random"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.reg_epsilon < 0:
            raise ValueError("reg_epsilon must be >= 0")
        if self.init not in ("kmeans++", "random"):
            raise ValueError(f"unknown init {self.init!r}")


def _rows(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got shape {x.shape}")
    return x2, single


def gaussian_logpdf(x, comp: GaussianComponent):
    """Log of the multivariate normal density; vector in, float out, batch in, array out."""
    x2, single = _rows(x, comp.dim)
    z = chol_solve_lower(comp.chol, (x2 - comp.mean).T)
    maha = np.sum(z * z, axis=0)
    out = -0.5 * (comp.dim * LOG_2PI + comp.logdet + maha)
    return float(out[0]) if single else out


def weighted_component_logpdfs(x, model: GmmModel) -> np.ndarray:
    """(n, k) matrix of ``log w_j + log g_j(x_i)``."""
    x2, _ = _rows(x, model.dim)
    with np.errstate(divide="ignore"):
        logw = np.log(model.weights)
    return np.column_stack([gaussian_logpdf(x2, c) for c in model.components]) + logw


def mixture_logpdf(x, model: GmmModel):
    x2, single = _rows(x, model.dim)
    out = logsumexp(weighted_component_logpdfs(x2, model), axis=1)
    return float(out[0]) if single else out


def e_step(data, model: GmmModel):
    """Responsibilities (n, k) and the per-point mixture log-likelihoods (n,)."""
    logp = weighted_component_logpdfs(data, model)
    norm = logsumexp(logp, axis=1)
    if not np.all(np.isfinite(norm)):
        bad = int(np.flatnonzero(~np.isfinite(norm))[0])
        raise AllZeroDensity(f"all components have zero density at row {bad}")
    return np.exp(logp - norm[:, None]), norm


def m_step(data, resp, reg_epsilon: float) -> GmmModel:
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    mass = resp.sum(axis=0)
    # mixing weights normalize by the total mass, which is n when rows sum to one
    assert abs(mass.sum() - n) <= 1e-8 * n, "responsibility rows must sum to 1"
    for j, m in enumerate(mass):
        if m < 1e-12:
            raise EmptyComponent(j, m)
    weights = mass / n
    weights = weights / weights.sum()
    comps = []
    eye = np.eye(d)
    for j in range(resp.shape[1]):
        r = resp[:, j]
        mean = r @ data / mass[j]
        diff = data - mean
        cov = (diff * r[:, None]).T @ diff / mass[j]
        cov = 0.5 * (cov + cov.T) + reg_epsilon * eye
        comps.append(GaussianComponent(mean, cov))
    return GmmModel(comps, weights)


def _data_cov(data, reg_epsilon):
    diff = data - data.mean(axis=0)
    cov = diff.T @ diff / data.shape[0]
    return 0.5 * (cov + cov.T) + reg_epsilon * np.eye(data.shape[1])


def kmeanspp_centers(data, k: int, rng: Rng) -> np.ndarray:
    n = data.shape[0]
    centers = [data[rng.integers(0, n)]]
    dist2 = np.sum((data - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = dist2.sum()
        if total <= 0:
            idx = rng.integers(0, n)
        else:
            cdf = np.cumsum(dist2 / total)
            idx = min(int(np.searchsorted(cdf, rng.uniform())), n - 1)
        centers.append(data[idx])
        dist2 = np.minimum(dist2, np.sum((data - data[idx]) ** 2, axis=1))
    return np.array(centers)


def initialize(data, cfg: EmConfig, rng: Rng) -> GmmModel:
    if cfg.init == "kmeans++":
        means = kmeanspp_centers(data, cfg.k, rng)
    else:
        means = data[rng.permutation(data.shape[0])[: cfg.k]]
    cov = _data_cov(data, cfg.reg_epsilon)
    comps = [GaussianComponent(m, cov) for m in means]
    return GmmModel(comps, np.full(cfg.k, 1.0 / cfg.k))


def _reseed(model: GmmModel, j: int, data, point_ll, reg_epsilon) -> GmmModel:
    comps = list(model.components)
    comps[j] = GaussianComponent(data[int(np.argmin(point_ll))], _data_cov(data, reg_epsilon))
    return GmmModel(comps, np.full(model.k, 1.0 / model.k))


@dataclass
class EmResult:
    model: GmmModel
    trace: list  # mean per-point log-likelihood of each evaluated model
    iterations: int
    converged: bool


def em_fit(data, cfg: EmConfig) -> EmResult:
    """Alternate E and M steps until the mean log-likelihood changes by less than ``tol``.

    ``trace[t]`` is the mean log-likelihood of the model after ``t`` M-steps
    (``trace[0]`` is the initialization). An empty component is re-seeded at
    the worst-explained point once; a second collapse of the same component
    propagates :class:`EmptyComponent`.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    if n < cfg.k:
        raise InsufficientData(f"{n} points cannot support {cfg.k} components")
    rng = Rng(cfg.seed)
    model = initialize(data, cfg, rng)
    trace = []
    reseeded = set()
    best, best_ll = model, -np.inf
    converged = False
    it = 0
    while True:
        resp, point_ll = e_step(data, model)
        ll = float(np.mean(point_ll))
        trace.append(ll)
        if ll > best_ll:
            best, best_ll = model, ll
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.tol:
            converged = True
            break
        if it >= cfg.max_iters:
            break
        try:
            model = m_step(data, resp, cfg.reg_epsilon)
        except EmptyComponent as exc:
            if exc.index in reseeded:
                raise
            reseeded.add(exc.index)
            log.debug("re-seeding empty component %d", exc.index)
            model = _reseed(model, exc.index, data, point_ll, cfg.reg_epsilon)
        it += 1
    return EmResult(best, trace, it, converged)
