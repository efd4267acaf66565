"""SVD building blocks: truncated singular spaces, HOSVD, and projections.

Conventions fixed here and relied on by the rest of the package:

* SVD sign ambiguity is resolved by making the largest-magnitude entry of
  each left singular vector positive, so repeated runs are bit-identical.
* Numerical rank counts singular values above ``1e-8 * sigma_1``.
* When ``sigma_r == sigma_{r+1}`` the truncated subspace is non-unique; the
  first ``r`` vectors in the SVD output order are kept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import as_tensor, mode_n_unfold, multi_mode_product

RANK_THRESHOLD = 1e-8

__all__ = [
    "TuckerDecomposition",
    "hosvd_fixed_rank",
    "numerical_rank",
    "project_box",
    "project_nuclear_ball",
    "reconstruct",
    "tail_energy",
    "truncated_left_singular",
    "validate_ranks",
]


def validate_ranks(ranks, shape) -> tuple[int, ...]:
    ranks = tuple(int(r) for r in ranks)
    shape = tuple(shape)
    if len(ranks) != len(shape):
        raise ValueError(f"rank profile {ranks} does not match order {len(shape)}")
    for n, (r, d) in enumerate(zip(ranks, shape)):
        if not 1 <= r <= d:
            raise ValueError(f"rank {r} invalid for mode {n} of size {d}")
    return ranks


@dataclass
class TuckerDecomposition:
    """Core tensor plus one factor matrix per mode.

    Factor ``n`` has shape ``(I_n, r_n)``.  HOSVD outputs and generated
    ground-truth factors have orthonormal columns; gradient-descent iterates
    produced by the nonconvex propensity estimator are not constrained to.
    """

    core: np.ndarray
    factors: list[np.ndarray]

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=np.float64)
        self.factors = [np.asarray(u, dtype=np.float64) for u in self.factors]
        if self.core.ndim != len(self.factors):
            raise ValueError(
                f"core order {self.core.ndim} != number of factors {len(self.factors)}"
            )
        for n, u in enumerate(self.factors):
            if u.ndim != 2 or u.shape[1] != self.core.shape[n]:
                raise ValueError(
                    f"factor {n} of shape {u.shape} does not match core rank "
                    f"{self.core.shape[n]}"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    def reconstruct(self) -> np.ndarray:
        return multi_mode_product(self.core, self.factors)

    def orthonormality_defect(self) -> float:
        """Largest ``||U^T U - I||_F`` over the factors."""
        return max(
            float(np.linalg.norm(u.T @ u - np.eye(u.shape[1]))) for u in self.factors
        )

    @classmethod
    def identity(cls, t: np.ndarray) -> "TuckerDecomposition":
        """Trivial full-rank decomposition with identity factors."""
        t = np.asarray(t, dtype=np.float64)
        return cls(t.copy(), [np.eye(d) for d in t.shape])


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def truncated_left_singular(m: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``r`` left singular vectors and singular values of ``m``.

    Raises on an out-of-range rank; SVD convergence failures propagate as
    ``numpy.linalg.LinAlgError`` rather than being silently truncated.
    """
    m = as_tensor(m)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    if not 1 <= r <= min(m.shape):
        raise ValueError(f"rank {r} out of range for matrix of shape {m.shape}")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return _fix_signs(u[:, :r]), s[:r].copy()


def numerical_rank(m: np.ndarray) -> int:
    s = np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_THRESHOLD * s[0]))


def hosvd_fixed_rank(t: np.ndarray, ranks) -> TuckerDecomposition:
    """One-pass HOSVD at the given rank profile.

    Factor ``n`` spans the top left singular subspace of the mode-``n``
    unfolding; the core is the tensor contracted with the transposed factors.
    The reconstruction therefore projects every unfolding onto its truncated
    column space.
    """
    t = as_tensor(t)
    ranks = validate_ranks(ranks, t.shape)
    factors = [
        truncated_left_singular(mode_n_unfold(t, n), r)[0] for n, r in enumerate(ranks)
    ]
    core = multi_mode_product(t, factors, transpose=True)
    return TuckerDecomposition(core, factors)


def reconstruct(d: TuckerDecomposition) -> np.ndarray:
    return d.reconstruct()


def tail_energy(m: np.ndarray, r: int) -> float:
    """Sum of squared singular values beyond rank ``r``; ``r=0`` gives ||m||_F^2."""
    m = as_tensor(m)
    if not 0 <= r <= min(m.shape):
        raise ValueError(f"rank {r} out of range for matrix of shape {m.shape}")
    if r == 0:
        return float(np.sum(m * m))
    s = np.linalg.svd(m, compute_uv=False)
    return float(np.sum(s[r:] ** 2))


def _l1_ball_project(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of a nonnegative vector onto the l1 ball.

    Exact sort-based algorithm; the input here is always a vector of
    singular values, so nonnegativity is assumed.
    """
    if v.sum() <= radius:
        return v
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = np.nonzero(u > (css - radius) / j)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_nuclear_ball(m: np.ndarray, radius: float) -> np.ndarray:
    """Closest matrix (in Frobenius norm) with nuclear norm at most ``radius``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    m = as_tensor(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.sum() <= radius:
        return m.copy()
    s_proj = _l1_ball_project(s, radius)
    return (u * s_proj) @ vt


def project_box(t: np.ndarray, gamma: float) -> np.ndarray:
    """Entrywise clamp to ``[-gamma, gamma]``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return np.clip(np.asarray(t, dtype=np.float64), -gamma, gamma)
