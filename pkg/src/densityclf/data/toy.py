"""Two-class toy generators: interleaved half moons and concentric circles."""

import numpy as np

from ..numkit.random import Rng
from .dataset import Dataset


def make_moons(n: int, noise_std: float, rng: Rng) -> Dataset:
    """Class 0 on the upper arc ``(cos t, sin t)``; class 1 on ``(1 - cos t, 0.5 - sin t)``."""
    if n % 2 or n < 2:
        raise ValueError("n must be a positive even number")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    x = np.vstack([upper, lower])
    if noise_std > 0:
        x = x + noise_std * rng.standard_normal(x.shape)
    y = np.repeat([0, 1], half)
    return Dataset(x, y, ["x1", "x2"], f"moons(n={n}, noise={noise_std})")


def make_circles(n: int, radius_factor: float, noise_std: float, rng: Rng) -> Dataset:
    """Class 0 on the unit circle, class 1 on the circle of radius ``radius_factor``."""
    if n % 2 or n < 2:
        raise ValueError("n must be a positive even number")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    if not 0 < radius_factor < 1:
        raise ValueError("radius_factor must be in (0, 1)")
    half = n // 2
    t = np.linspace(0.0, 2.0 * np.pi, half, endpoint=False)
    ring = np.column_stack([np.cos(t), np.sin(t)])
    x = np.vstack([ring, radius_factor * ring])
    if noise_std > 0:
        x = x + noise_std * rng.standard_normal(x.shape)
    y = np.repeat([0, 1], half)
    return Dataset(x, y, ["x1", "x2"], f"circles(n={n}, factor={radius_factor}, noise={noise_std})")
