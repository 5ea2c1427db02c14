from .autodiff import CycleDetected, Tape, Var, affine, backward, exp, log, relu, sum_, tanh
from .linalg import NotPositiveDefinite, cholesky, chol_logdet, chol_solve_lower, logsumexp
from .random import Rng, sample_standard_normal

__all__ = [
    "CycleDetected",
    "NotPositiveDefinite",
    "Rng",
    "Tape",
    "Var",
    "affine",
    "backward",
    "chol_logdet",
    "chol_solve_lower",
    "cholesky",
    "exp",
    "log",
    "logsumexp",
    "relu",
    "sample_standard_normal",
    "sum_",
    "tanh",
]
