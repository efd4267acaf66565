"""Dense tensor index algebra: unfoldings, refoldings, mode products and norms.

All tensors are plain ``numpy.ndarray`` objects with float64 entries.  The
canonical linearization used throughout (and in the on-disk format) is
"mode-0 fastest", i.e. generalized column-major / Fortran order.  Every
unfolding below is defined relative to that ordering, so the index maps are
deterministic and round trips are bit-exact.

Mode indices are 0-based.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UnfoldingSpec",
    "as_tensor",
    "as_mask",
    "mode_n_unfold",
    "mode_n_fold",
    "s_unfold",
    "s_fold",
    "square_set",
    "n_mode_product",
    "multi_mode_product",
    "entrywise_product",
    "frobenius_norm",
    "max_abs",
    "singular_values",
    "spectral_norm",
    "nuclear_norm",
]


def as_tensor(t, allow_nonfinite: bool = False) -> np.ndarray:
    """Coerce to a float64 array, rejecting NaN/Inf entries by default."""
    arr = np.asarray(t, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("tensor must contain at least one entry")
    if not allow_nonfinite and not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite entries")
    return arr


def as_mask(m) -> np.ndarray:
    """Coerce to a float64 observation-indicator array with entries in {0, 1}."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("mask must contain at least one entry")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("mask entries must all be 0 or 1")
    return arr


def _check_mode(shape: tuple[int, ...], n: int) -> None:
    if not 0 <= n < len(shape):
        raise ValueError(f"mode {n} out of range for order-{len(shape)} tensor")


@dataclass(frozen=True)
class UnfoldingSpec:
    """A grouping of modes into matrix rows (``modes``) and columns (the rest).

    ``modes`` must be a sorted, nonempty, strict subset of ``range(order)``.
    The row modes come first in ascending order, followed by the remaining
    modes in ascending order; entries are read in the canonical ordering.
    """

    modes: tuple[int, ...]
    shape: tuple[int, ...]
    comodes: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        order = len(self.shape)
        modes = tuple(self.modes)
        if order < 2:
            raise ValueError("unfolding requires an order >= 2 tensor")
        if not modes or len(modes) >= order:
            raise ValueError("row modes must be a nonempty strict subset of all modes")
        if len(set(modes)) != len(modes) or list(modes) != sorted(modes):
            raise ValueError("row modes must be sorted and distinct")
        if modes[0] < 0 or modes[-1] >= order:
            raise ValueError(f"row modes {modes} out of range for order {order}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(
            self, "comodes", tuple(m for m in range(order) if m not in modes)
        )

    @property
    def row_dim(self) -> int:
        return math.prod(self.shape[m] for m in self.modes)

    @property
    def col_dim(self) -> int:
        return math.prod(self.shape[m] for m in self.comodes)

    def matches(self, shape: tuple[int, ...]) -> bool:
        return tuple(shape) == self.shape


def mode_n_unfold(t: np.ndarray, n: int) -> np.ndarray:
    """Matrix whose columns are the mode-``n`` fibers of ``t``.

    Column order: remaining indices vary with the earliest mode fastest,
    matching the canonical linearization.
    """
    t = np.asarray(t)
    _check_mode(t.shape, n)
    return np.reshape(np.moveaxis(t, n, 0), (t.shape[n], -1), order="F")


def mode_n_fold(m: np.ndarray, n: int, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`mode_n_unfold` for the given tensor shape."""
    shape = tuple(shape)
    _check_mode(shape, n)
    m = np.asarray(m)
    moved = (shape[n],) + shape[:n] + shape[n + 1 :]
    if m.shape != (moved[0], math.prod(moved[1:])):
        raise ValueError(f"matrix shape {m.shape} does not match fold target {shape}")
    return np.moveaxis(np.reshape(m, moved, order="F"), 0, n)


def s_unfold(t: np.ndarray, spec: UnfoldingSpec) -> np.ndarray:
    """Unfold ``t`` into a ``row_dim x col_dim`` matrix per ``spec``."""
    t = np.asarray(t)
    if not spec.matches(t.shape):
        raise ValueError(f"spec shape {spec.shape} does not match tensor {t.shape}")
    permuted = np.transpose(t, spec.modes + spec.comodes)
    return np.reshape(permuted, (spec.row_dim, spec.col_dim), order="F")


def s_fold(m: np.ndarray, spec: UnfoldingSpec) -> np.ndarray:
    """Inverse of :func:`s_unfold`."""
    m = np.asarray(m)
    if m.shape != (spec.row_dim, spec.col_dim):
        raise ValueError(
            f"matrix shape {m.shape} does not match spec {spec.row_dim}x{spec.col_dim}"
        )
    perm = spec.modes + spec.comodes
    permuted_shape = tuple(spec.shape[p] for p in perm)
    permuted = np.reshape(m, permuted_shape, order="F")
    return np.transpose(permuted, np.argsort(perm))


def square_set(shape: tuple[int, ...]) -> UnfoldingSpec:
    """Mode subset whose unfolding is as square as possible.

    Minimizes ``|row_dim - col_dim|`` over all nonempty strict subsets; ties
    are broken by smallest subset size, then lexicographically, so the result
    is deterministic even for symmetric shapes.
    """
    shape = tuple(int(d) for d in shape)
    order = len(shape)
    if order < 2:
        raise ValueError("square set requires an order >= 2 tensor")
    if any(d < 1 for d in shape):
        raise ValueError("all mode sizes must be positive")
    total = math.prod(shape)
    best_modes = None
    best_gap = None
    for size in range(1, order):
        for modes in itertools.combinations(range(order), size):
            row = math.prod(shape[m] for m in modes)
            gap = abs(row - total // row)
            if best_gap is None or gap < best_gap:
                best_gap = gap
                best_modes = modes
    return UnfoldingSpec(best_modes, shape)


def n_mode_product(t: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    """Contract mode ``n`` of ``t`` with the columns of matrix ``u``.

    ``u`` has shape ``(J, I_n)``; the result replaces mode ``n`` by size ``J``.
    """
    t = np.asarray(t)
    u = np.asarray(u)
    _check_mode(t.shape, n)
    if u.ndim != 2 or u.shape[1] != t.shape[n]:
        raise ValueError(
            f"matrix of shape {u.shape} cannot contract mode {n} of size {t.shape[n]}"
        )
    return np.moveaxis(np.tensordot(u, t, axes=(1, n)), 0, n)


def multi_mode_product(
    t: np.ndarray,
    matrices,
    modes=None,
    transpose: bool = False,
) -> np.ndarray:
    """Apply :func:`n_mode_product` over several modes in sequence.

    ``modes`` defaults to ``range(len(matrices))``.  With ``transpose=True``
    each matrix is transposed before contracting, which is the adjoint of the
    forward map.
    """
    if modes is None:
        modes = range(len(matrices))
    out = t
    for u, n in zip(matrices, modes, strict=True):
        out = n_mode_product(out, u.T if transpose else u, n)
    return out


def entrywise_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def frobenius_norm(t: np.ndarray) -> float:
    t = as_tensor(t)
    return float(np.linalg.norm(t.ravel()))


def max_abs(t: np.ndarray) -> float:
    t = as_tensor(t)
    return float(np.max(np.abs(t)))


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values in non-increasing order."""
    m = as_tensor(m)
    if m.ndim != 2:
        raise ValueError("singular values are defined for matrices only")
    return np.linalg.svd(m, compute_uv=False)


def spectral_norm(m: np.ndarray) -> float:
    return float(singular_values(m)[0])


def nuclear_norm(m: np.ndarray) -> float:
    return float(singular_values(m).sum())
