"""Completion of partially observed tensors from inverse-propensity weights.

The main estimator reweights each observed entry by its inverse propensity
(an unbiased estimator of the full tensor under the Bernoulli observation
model) and truncates the result with a fixed-rank HOSVD.  The matrix
baselines truncate a single unfolding of the same reweighted tensor instead,
and the doubly-weighted HOSVD baseline splits the reweighting across the
square root of the propensities before and after the HOSVD.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .decomposition import (
    TuckerDecomposition,
    hosvd_fixed_rank,
    truncated_left_singular,
    validate_ranks,
)
from .tensor import (
    as_mask,
    as_tensor,
    mode_n_fold,
    mode_n_unfold,
    s_fold,
    s_unfold,
    square_set,
)

DEFAULT_PROPENSITY_FLOOR = 1e-6

__all__ = [
    "CompletionResult",
    "ObservedInstance",
    "hosvd_w_complete",
    "ips_reweight",
    "rect_unfold_complete",
    "sq_unfold_complete",
    "tenips",
]


@dataclass
class ObservedInstance:
    """Observed values (zeros where unobserved) plus the observation mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = as_tensor(self.values)
        self.mask = as_mask(self.mask)
        if self.values.shape != self.mask.shape:
            raise ValueError(
                f"values shape {self.values.shape} != mask shape {self.mask.shape}"
            )
        if np.any(self.values * (1.0 - self.mask) != 0.0):
            raise ValueError("values must be exactly zero at unobserved entries")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @classmethod
    def observe(cls, full: np.ndarray, mask: np.ndarray) -> "ObservedInstance":
        """Mask a fully known tensor: values = full * mask."""
        full = as_tensor(full)
        mask = as_mask(mask)
        return cls(full * mask, mask)


@dataclass
class CompletionResult:
    """Estimated tensor, its decomposition, a method tag and wall time."""

    estimate: np.ndarray
    decomposition: TuckerDecomposition
    method: str
    seconds: float


def _floored(p: np.ndarray, where: np.ndarray, floor: float, context: str) -> np.ndarray:
    """Clamp propensities below ``floor`` on ``where`` entries, warning once."""
    small = where & (p < floor)
    n_small = int(np.count_nonzero(small))
    if n_small:
        warnings.warn(
            f"{context}: clamped {n_small} propensities below {floor:g}"
        )
    return np.where(small, floor, p)


def ips_reweight(
    inst: ObservedInstance,
    p: np.ndarray,
    floor: float = DEFAULT_PROPENSITY_FLOOR,
) -> np.ndarray:
    """Divide each observed entry by its propensity; unobserved entries stay zero.

    Propensities must be strictly positive at observed entries; values in
    (0, ``floor``) are clamped up with a warning so near-underflow estimates
    cannot produce infinities.
    """
    p = as_tensor(p)
    if p.shape != inst.shape:
        raise ValueError(f"propensity shape {p.shape} != instance shape {inst.shape}")
    observed = inst.mask == 1.0
    if np.any(observed & (p <= 0.0)):
        raise ValueError("propensity must be positive at every observed entry")
    p = _floored(p, observed, floor, "ips_reweight")
    return np.where(observed, inst.values / p, 0.0)


def _timed_result(method: str, estimate, decomposition, start) -> CompletionResult:
    return CompletionResult(estimate, decomposition, method, time.perf_counter() - start)


def tenips(inst: ObservedInstance, p: np.ndarray, ranks) -> CompletionResult:
    """Fixed-rank HOSVD of the inverse-propensity-reweighted observations."""
    start = time.perf_counter()
    ranks = validate_ranks(ranks, inst.shape)
    x_bar = ips_reweight(inst, p)
    decomposition = hosvd_fixed_rank(x_bar, ranks)
    return _timed_result("tenips", decomposition.reconstruct(), decomposition, start)


def sq_unfold_complete(inst: ObservedInstance, p: np.ndarray, r: int) -> CompletionResult:
    """Rank-``r`` SVD truncation of the square unfolding of the reweighted tensor."""
    start = time.perf_counter()
    spec = square_set(inst.shape)
    x_bar = ips_reweight(inst, p)
    m = s_unfold(x_bar, spec)
    u, _ = truncated_left_singular(m, r)
    estimate = s_fold(u @ (u.T @ m), spec)
    return _timed_result(
        "sq_unfold", estimate, TuckerDecomposition.identity(estimate), start
    )


def rect_unfold_complete(
    inst: ObservedInstance, p: np.ndarray, r: int, mode: int = 0
) -> CompletionResult:
    """Rank-``r`` SVD truncation of the mode-``mode`` unfolding of the reweighted tensor."""
    start = time.perf_counter()
    x_bar = ips_reweight(inst, p)
    m = mode_n_unfold(x_bar, mode)
    u, _ = truncated_left_singular(m, r)
    estimate = mode_n_fold(u @ (u.T @ m), mode, inst.shape)
    return _timed_result(
        "rect_unfold", estimate, TuckerDecomposition.identity(estimate), start
    )


def hosvd_w_complete(
    inst: ObservedInstance,
    p: np.ndarray,
    ranks,
    floor: float = DEFAULT_PROPENSITY_FLOOR,
) -> CompletionResult:
    """Doubly-weighted HOSVD baseline.

    The observed tensor is divided entrywise by sqrt(propensity), truncated
    by a fixed-rank HOSVD, and the reconstruction is divided by
    sqrt(propensity) again.
    """
    start = time.perf_counter()
    ranks = validate_ranks(ranks, inst.shape)
    p = as_tensor(p)
    if p.shape != inst.shape:
        raise ValueError(f"propensity shape {p.shape} != instance shape {inst.shape}")
    observed = inst.mask == 1.0
    if np.any(observed & (p <= 0.0)):
        raise ValueError("propensity must be positive at every observed entry")
    # The second reweighting divides everywhere, so the floor applies to every
    # entry, not just the observed ones.
    p = _floored(p, np.ones(p.shape, dtype=bool), floor, "hosvd_w")
    root = np.sqrt(p)
    pre = np.where(observed, inst.values / root, 0.0)
    decomposition = hosvd_fixed_rank(pre, ranks)
    estimate = decomposition.reconstruct() / root
    return _timed_result(
        "hosvd_w", estimate, TuckerDecomposition.identity(estimate), start
    )
