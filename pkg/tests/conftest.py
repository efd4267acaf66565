"""Shared test helpers: independent brute-force oracles."""
from __future__ import annotations

import itertools

import numpy as np


def unfold_by_fibers(t: np.ndarray, n: int) -> np.ndarray:
    """Mode-n unfolding assembled fiber by fiber from the definition.

    Column order: remaining indices ascending with the earliest mode varying
    fastest, matching the canonical linearization.
    """
    rest = [m for m in range(t.ndim) if m != n]
    columns = []
    for rev_idx in itertools.product(*[range(t.shape[m]) for m in rest[::-1]]):
        idx = rev_idx[::-1]
        slicer: list = [slice(None)] * t.ndim
        for m, i in zip(rest, idx):
            slicer[m] = i
        columns.append(t[tuple(slicer)])
    return np.stack(columns, axis=1)


def linear_index(idx, dims) -> int:
    """Canonical (first-index-fastest) linearization of a multi-index."""
    out, stride = 0, 1
    for i, d in zip(idx, dims):
        out += i * stride
        stride *= d
    return out


def n_mode_product_loops(t: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    """Defining sum of the mode-n product, evaluated entry by entry."""
    out_shape = t.shape[:n] + (u.shape[0],) + t.shape[n + 1 :]
    out = np.zeros(out_shape)
    for idx in itertools.product(*[range(d) for d in out_shape]):
        j = idx[n]
        total = 0.0
        for i in range(t.shape[n]):
            t_idx = idx[:n] + (i,) + idx[n + 1 :]
            total += t[t_idx] * u[j, i]
        out[idx] = total
    return out


def tucker_reconstruct_loops(core: np.ndarray, factors) -> np.ndarray:
    """Multilinear reconstruction as an explicit nested sum over core entries."""
    shape = tuple(u.shape[0] for u in factors)
    out = np.zeros(shape)
    for out_idx in itertools.product(*[range(d) for d in shape]):
        total = 0.0
        for core_idx in itertools.product(*[range(r) for r in core.shape]):
            term = core[core_idx]
            for u, i, a in zip(factors, out_idx, core_idx):
                term *= u[i, a]
            total += term
        out[out_idx] = total
    return out


def l1_project_bisection(v: np.ndarray, radius: float, iters: int = 200) -> np.ndarray:
    """Projection of a nonnegative vector onto the l1 ball via bisection on
    the KKT multiplier (independent of the sort-based production code)."""
    if v.sum() <= radius:
        return v.copy()
    lo, hi = 0.0, float(v.max())
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0.0).sum() > radius:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


def top_singular_pair_power_iteration(m: np.ndarray, iters: int = 2000):
    """Dominant singular triple by power iteration on m^T m."""
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = m.T @ (m @ v)
        v = w / np.linalg.norm(w)
    sigma = np.linalg.norm(m @ v)
    u = m @ v / sigma
    return u, sigma, v


def random_shape(rng: np.random.Generator, order: int, max_dim: int = 6):
    return tuple(int(d) for d in rng.integers(2, max_dim + 1, size=order))
