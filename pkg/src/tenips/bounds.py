"""Evaluators for the finite-sample error bounds and the error metric.

The probability statements behind these bounds involve universal constants
that are not numeric, so only the error-magnitude right-hand sides are
evaluated; nothing here is probabilistic.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .links import LOGISTIC, LinkFunction
from .tensor import (
    UnfoldingSpec,
    as_tensor,
    frobenius_norm,
    max_abs,
    mode_n_unfold,
    nuclear_norm,
    s_unfold,
    singular_values,
    square_set,
)

__all__ = [
    "BoundInputs",
    "completion_error_bound",
    "link_smoothness_ratio",
    "nuclear_threshold",
    "propensity_error_bound",
    "relative_error",
    "reweight_deviation_bound",
]


def relative_error(est: np.ndarray, truth: np.ndarray) -> float:
    """``||est - truth||_F / ||truth||_F``."""
    est = as_tensor(est)
    truth = as_tensor(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    denom = frobenius_norm(truth)
    if denom == 0.0:
        raise ValueError("relative error is undefined for a zero truth tensor")
    return frobenius_norm(est - truth) / denom


def link_smoothness_ratio(link: LinkFunction, gamma: float, grid: int = 4097) -> float:
    """``sup |link'(x)| / (link(x) (1 - link(x)))`` over ``[-gamma, gamma]``.

    Evaluated on a dense symmetric grid; identically 1 for the logistic link.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.linspace(-gamma, gamma, grid)
    p = link.f(x)
    return float(np.max(np.abs(link.df(x)) / (p * (1.0 - p))))


def nuclear_threshold(param: np.ndarray, spec: UnfoldingSpec | None = None) -> float:
    """Nuclear norm of the chosen unfolding of ``param`` over sqrt(#entries).

    This is the smallest nuclear threshold under which the true parameter
    tensor is feasible for the constrained estimator on that unfolding; the
    default unfolding is the square one.
    """
    param = as_tensor(param)
    if spec is None:
        spec = square_set(param.shape)
    return nuclear_norm(s_unfold(param, spec)) / math.sqrt(param.size)


@dataclass
class BoundInputs:
    """Instance-level quantities consumed by the bound evaluators.

    ``mode_singular_values[n]`` holds the full singular spectrum of the
    mode-``n`` unfolding of the data tensor, in non-increasing order.
    """

    shape: tuple[int, ...]
    link: LinkFunction
    psi: float
    alpha: float
    gamma: float
    theta: float
    alpha_sp: float
    l_gamma: float
    epsilon: float
    fnorm: float
    mode_singular_values: list[np.ndarray]

    @classmethod
    def from_instance(
        cls,
        data: np.ndarray,
        param: np.ndarray,
        link: LinkFunction = LOGISTIC,
        gamma: float | None = None,
        epsilon: float = 0.0,
    ) -> "BoundInputs":
        data = as_tensor(data)
        param = as_tensor(param)
        if data.shape != param.shape:
            raise ValueError(f"shape mismatch: {data.shape} vs {param.shape}")
        alpha = max_abs(param)
        if gamma is None:
            gamma = alpha
        return cls(
            shape=data.shape,
            link=link,
            psi=max_abs(data),
            alpha=alpha,
            gamma=gamma,
            theta=nuclear_threshold(param),
            alpha_sp=max_abs(data) * math.sqrt(data.size) / frobenius_norm(data),
            l_gamma=link_smoothness_ratio(link, gamma),
            epsilon=epsilon,
            fnorm=frobenius_norm(data),
            mode_singular_values=[
                singular_values(mode_n_unfold(data, n)) for n in range(data.ndim)
            ],
        )

    def condition_numbers(self, ranks) -> list[float]:
        """Per-mode ratio of the largest singular value to the rank-th one."""
        out = []
        for s, r in zip(self.mode_singular_values, ranks):
            out.append(float(s[0] / s[r - 1]) if s[r - 1] > 0 else math.inf)
        return out


def propensity_error_bound(inputs: BoundInputs, spec: UnfoldingSpec, tau: float) -> float:
    """Upper bound on the mean squared propensity error of the convex estimator.

    ``4 e L_gamma tau (1/sqrt(rows) + 1/sqrt(cols))`` for the chosen
    unfolding; smallest when the unfolding is squarest.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    return (
        4.0
        * math.e
        * inputs.l_gamma
        * tau
        * (1.0 / math.sqrt(spec.row_dim) + 1.0 / math.sqrt(spec.col_dim))
    )


def reweight_deviation_bound(inputs: BoundInputs, tau: float) -> float:
    """Bound on ``||Xbar(P_hat) - Xbar(P)||_F`` induced by propensity error.

    Uses the square unfolding (the one the convex estimator runs on) and the
    smallest propensities implied by the box thresholds.
    """
    spec = square_set(inputs.shape)
    p_floor_est = float(inputs.link.f(np.array(-inputs.gamma)))
    p_floor_true = float(inputs.link.f(np.array(-inputs.alpha)))
    mse = propensity_error_bound(inputs, spec, tau)
    return inputs.alpha_sp * inputs.fnorm / (p_floor_est * p_floor_true) * math.sqrt(mse)


def completion_error_bound(
    inputs: BoundInputs,
    ranks,
    xbar_deviation: float | None = None,
    tau: float | None = None,
) -> float:
    """Upper bound on the relative recovery error of the full pipeline.

    Evaluates the three-term squared-error bound (projection of the
    reweighting error, perturbation of the singular subspaces, and per-mode
    tail energies) and returns its square root, a bound on
    ``||estimate - data||_F / ||data||_F``.

    ``xbar_deviation`` is the Frobenius deviation between the reweighted
    tensors under estimated and true propensities; when not supplied
    empirically it is bounded via :func:`reweight_deviation_bound`, which
    requires ``tau``.  Returns ``inf`` when some mode has a vanishing
    spectral gap at its target rank.
    """
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(inputs.shape):
        raise ValueError(f"rank profile {ranks} does not match order {len(inputs.shape)}")
    if xbar_deviation is None:
        if tau is None:
            raise ValueError("supply either xbar_deviation or tau")
        xbar_deviation = reweight_deviation_bound(inputs, tau)

    f = inputs.fnorm
    eps_f = inputs.epsilon * f
    term1 = min(r * (xbar_deviation / f + inputs.epsilon) ** 2 for r in ranks)
    term2 = 0.0
    term3 = 0.0
    for n, (s, r) in enumerate(zip(inputs.mode_singular_values, ranks)):
        if not 1 <= r <= s.size:
            raise ValueError(f"rank {r} out of range for mode {n}")
        sigma_r = float(s[r - 1])
        sigma_r1 = float(s[r]) if r < s.size else 0.0
        gap = sigma_r - sigma_r1
        if gap <= 0.0:
            warnings.warn(
                f"mode {n}: vanishing spectral gap at rank {r}; bound is infinite"
            )
            return math.inf
        sigma_1 = float(s[0])
        term2 += (
            12.0
            * r
            * sigma_1**2
            / f**2
            * ((2.0 * sigma_1 + xbar_deviation + eps_f) ** 2 / (sigma_r + sigma_r1) ** 2)
            * ((xbar_deviation + eps_f) ** 2 / gap**2)
        )
        term3 += float(np.sum(s[r:] ** 2)) / f**2
    return math.sqrt(term1 + term2 + term3)
