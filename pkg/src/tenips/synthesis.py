"""Reproducible generators for synthetic completion experiments.

Everything here is a pure function of its configuration and seed, so replays
are bit-identical.  Gaussian-core Tucker tensors with orthonormalized random
factors serve both as data tensors and as parameter tensors for the
entry-dependent observation model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomposition import TuckerDecomposition, validate_ranks
from .links import LOGISTIC, LinkFunction
from .propensity import PropensityModel
from .tensor import as_tensor, frobenius_norm

__all__ = [
    "GeneratorConfig",
    "add_relative_noise",
    "model_a_propensity",
    "model_b_propensity",
    "proportional_propensity",
    "random_orthonormal",
    "random_tucker",
    "sample_mask",
    "video_like_instance",
]


@dataclass
class GeneratorConfig:
    """Shape, rank profile, core scale, relative noise level, and seed."""

    shape: tuple[int, ...]
    ranks: tuple[int, ...]
    core_scale: float = 1.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        self.ranks = validate_ranks(self.ranks, self.shape)
        if self.core_scale <= 0:
            raise ValueError("core_scale must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def random_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Orthonormalize a Gaussian matrix, with the same deterministic sign
    convention as the SVD routines (largest-magnitude entry per column positive)."""
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    idx = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[idx, np.arange(cols)])
    signs[signs == 0] = 1.0
    return q * signs


def random_tucker(cfg: GeneratorConfig) -> tuple[np.ndarray, TuckerDecomposition]:
    """Random Tucker tensor: Gaussian core, orthonormal factors."""
    rng = np.random.default_rng(cfg.seed)
    core = cfg.core_scale * rng.standard_normal(cfg.ranks)
    factors = [
        random_orthonormal(rng, d, r) for d, r in zip(cfg.shape, cfg.ranks)
    ]
    d = TuckerDecomposition(core, factors)
    return d.reconstruct(), d


def add_relative_noise(t: np.ndarray, noise: float, seed: int) -> np.ndarray:
    """Add Gaussian noise scaled to ``noise * ||t||_F / sqrt(#entries)`` per entry."""
    t = as_tensor(t)
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    if noise == 0:
        return t.copy()
    rng = np.random.default_rng(seed)
    scale = noise * frobenius_norm(t) / math.sqrt(t.size)
    return t + scale * rng.standard_normal(t.shape)


def model_a_propensity(shape: tuple[int, ...], ratio: float) -> np.ndarray:
    """Uniform observation probability: every entry equals ``ratio``."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    return np.full(tuple(shape), float(ratio))


def model_b_propensity(
    cfg: GeneratorConfig, link: LinkFunction = LOGISTIC
) -> tuple[PropensityModel, np.ndarray]:
    """Entry-dependent propensities from a noisy low-rank parameter tensor.

    The parameter tensor follows the same recipe as the data tensors
    (random Tucker plus relative noise); propensities are the link applied
    entrywise.  Returns the model and the ground-truth parameter tensor.
    """
    clean, _ = random_tucker(cfg)
    param = add_relative_noise(clean, cfg.noise, seed=cfg.seed + 1)
    return PropensityModel(link, param), param


def proportional_propensity(
    data: np.ndarray, coeff: float, link: LinkFunction = LOGISTIC
) -> tuple[PropensityModel, np.ndarray]:
    """Special case where the parameter tensor is proportional to the data,
    so larger entries are more likely to be observed."""
    param = coeff * as_tensor(data)
    return PropensityModel(link, param), param


def sample_mask(p: np.ndarray, seed: int) -> np.ndarray:
    """Independent Bernoulli draw per entry with success probability ``p``."""
    p = as_tensor(p)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("propensities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    return (rng.random(p.shape) < p).astype(np.float64)


def video_like_instance(
    shape: tuple[int, ...], seed: int, link: LinkFunction = LOGISTIC
) -> tuple[np.ndarray, PropensityModel]:
    """Smooth low-multilinear-rank synthetic grayscale video in [0, 255].

    A few separable slowly varying components plus a moving bump, quantized
    to integer gray levels.  The observation parameters are the affine
    transform (data - 128) / 64, which keeps all propensities inside
    [logistic(-2), logistic(2)].
    """
    shape = tuple(int(d) for d in shape)
    if len(shape) != 3:
        raise ValueError("video-like tensors must have order 3 (frames, rows, cols)")
    frames, rows, cols = shape
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, frames)
    y = np.linspace(0.0, 1.0, rows)
    x = np.linspace(0.0, 1.0, cols)

    video = np.zeros(shape)
    for _ in range(3):
        ft = 1.0 + 0.5 * np.sin(2 * np.pi * (rng.uniform(0.5, 1.5) * t + rng.random()))
        fy = np.sin(np.pi * (rng.uniform(0.5, 2.0) * y + rng.random()))
        fx = np.sin(np.pi * (rng.uniform(0.5, 2.0) * x + rng.random()))
        video += rng.uniform(0.5, 1.0) * np.einsum("i,j,k->ijk", ft, fy, fx)

    # A single bump walking across the frame; keeps the tensor only
    # approximately low rank, like real footage.
    cy = 0.2 + 0.6 * t
    cx = 0.8 - 0.6 * t
    bump_y = np.exp(-((y[None, :] - cy[:, None]) ** 2) / 0.02)
    bump_x = np.exp(-((x[None, :] - cx[:, None]) ** 2) / 0.02)
    video += 1.5 * np.einsum("ij,ik->ijk", bump_y, bump_x)

    lo, hi = video.min(), video.max()
    video = np.round(255.0 * (video - lo) / (hi - lo))
    param = (video - 128.0) / 64.0
    return video, PropensityModel(link, param)
