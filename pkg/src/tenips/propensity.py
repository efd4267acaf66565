"""Propensity estimation from a binary observation mask.

Two estimators are provided:

* :func:`convex_pe` maximizes the Bernoulli likelihood of the mask over a
  matrix unfolding, constrained to a nuclear-norm ball intersected with an
  entrywise box.  The solver is projected gradient descent with the two
  projections applied in a fixed order (nuclear ball, then box) each
  iteration, so the box constraint holds exactly at the output while the
  nuclear residual is driven below tolerance by a final cleanup pass.
* :func:`nonconvex_pe` runs plain gradient descent on a Tucker core and
  unconstrained factor matrices of the parameter tensor, using the exact
  chain-rule gradients of the likelihood.  Factors are deliberately not
  re-orthonormalized between steps.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decomposition import TuckerDecomposition, project_box, project_nuclear_ball
from .links import LinkFunction
from .tensor import (
    UnfoldingSpec,
    as_mask,
    mode_n_unfold,
    multi_mode_product,
    nuclear_norm,
    s_fold,
    s_unfold,
    square_set,
)

NUCLEAR_FEAS_TOL = 1e-6
BOX_FEAS_TOL = 1e-12

__all__ = [
    "ConvexPEConfig",
    "DivergenceError",
    "NonconvexPEConfig",
    "PropensityModel",
    "SolveReport",
    "convex_pe",
    "convex_pe_on_spec",
    "negative_bernoulli_loglik",
    "nonconvex_pe",
    "tucker_loglik_gradients",
]


class DivergenceError(RuntimeError):
    """Gradient descent objective blew up; carries the trace seen so far."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass
class PropensityModel:
    """A link function plus the parameter tensor it is applied to.

    ``param`` is either a dense parameter tensor or its Tucker decomposition
    (the factored form produced by :func:`nonconvex_pe`).
    """

    link: LinkFunction
    param: np.ndarray | TuckerDecomposition

    def param_tensor(self) -> np.ndarray:
        if isinstance(self.param, TuckerDecomposition):
            return self.param.reconstruct()
        return self.param

    def propensities(self) -> np.ndarray:
        return self.link.f(self.param_tensor())


@dataclass
class ConvexPEConfig:
    """Thresholds and solver schedule for :func:`convex_pe`.

    ``step`` defaults to 4.0, the inverse of the logistic loss smoothness
    constant 1/4.
    """

    tau: float
    gamma: float
    step: float = 4.0
    max_iter: int = 2000
    tol: float = 1e-6

    def __post_init__(self):
        if self.tau <= 0 or self.gamma <= 0 or self.step <= 0:
            raise ValueError("tau, gamma and step must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class NonconvexPEConfig:
    """Step size, target rank profile and initialization for :func:`nonconvex_pe`.

    ``init`` is ``"uniform"`` (i.i.d. Uniform[-1, 1] entries on core and
    factors, drawn from ``seed``), an explicit :class:`TuckerDecomposition`,
    or a callable ``(rng, shape, ranks) -> TuckerDecomposition``.
    """

    step: float
    ranks: tuple[int, ...]
    init: object = "uniform"
    max_iter: int = 500
    tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveReport:
    """Iteration count, objective trace and feasibility residuals of a solve."""

    method: str
    iterations: int
    converged: bool
    objective_trace: list[float]
    nuclear_residual: float | None = None
    box_residual: float | None = None
    seconds: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self, thin_trace: int | None = None) -> dict:
        trace = self.objective_trace
        if thin_trace is not None and len(trace) > thin_trace > 1:
            stride = max(1, len(trace) // (thin_trace - 1))
            trace = trace[::stride] + [trace[-1]]
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_objective": self.final_objective,
            "objective_trace": list(trace),
            "nuclear_residual": self.nuclear_residual,
            "box_residual": self.box_residual,
            "seconds": self.seconds,
            "warnings": list(self.warnings),
        }


def negative_bernoulli_loglik(gamma_arr, omega, link: LinkFunction) -> float:
    """Summed negative Bernoulli log-likelihood of ``omega`` at parameters ``gamma_arr``.

    ``omega`` may be real-valued in [0, 1]; binary validation is the caller's
    concern so relaxed targets can be used in gradient checks.
    """
    gamma_arr = np.asarray(gamma_arr, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if gamma_arr.shape != omega.shape:
        raise ValueError(f"shape mismatch: {gamma_arr.shape} vs {omega.shape}")
    return float(np.sum(link.loss(gamma_arr, omega)))


def _warn_if_degenerate(mask: np.ndarray, collected: list[str]) -> None:
    if np.all(mask == 1.0) or np.all(mask == 0.0):
        msg = "mask is degenerate (all entries equal); the likelihood drives the parameters to a constraint boundary"
        collected.append(msg)
        warnings.warn(msg)


def convex_pe_on_spec(
    mask,
    link: LinkFunction,
    cfg: ConvexPEConfig,
    spec: UnfoldingSpec,
) -> tuple[PropensityModel, SolveReport]:
    """Constrained maximum-likelihood propensity estimate on a chosen unfolding.

    Minimizes the negative Bernoulli log-likelihood of the unfolded mask over
    ``{G : ||G||_* <= tau * sqrt(#entries), ||G||_max <= gamma}`` and returns
    the estimated propensities refolded to tensor shape together with a solve
    report.  On non-convergence the best iterate seen is returned and the
    report flags it.
    """
    start = time.perf_counter()
    mask = as_mask(mask)
    if not spec.matches(mask.shape):
        raise ValueError(f"spec shape {spec.shape} does not match mask {mask.shape}")
    collected: list[str] = []
    _warn_if_degenerate(mask, collected)

    omega = s_unfold(mask, spec)
    radius = cfg.tau * np.sqrt(mask.size)
    g = np.zeros_like(omega)
    obj = negative_bernoulli_loglik(g, omega, link)
    trace = [obj]
    best_obj, best_g = obj, g
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        g = g - cfg.step * link.loss_grad(g, omega)
        g = project_box(project_nuclear_ball(g, radius), cfg.gamma)
        new_obj = negative_bernoulli_loglik(g, omega, link)
        trace.append(new_obj)
        if new_obj < best_obj:
            best_obj, best_g = new_obj, g
        if abs(new_obj - obj) <= cfg.tol * max(abs(obj), 1e-300):
            converged = True
            obj = new_obj
            break
        obj = new_obj
    if not converged:
        collected.append(f"no convergence within {cfg.max_iter} iterations; returning best iterate")
        warnings.warn(collected[-1])

    g = best_g
    # The box step runs last inside the loop, so only the nuclear constraint
    # can be left slightly violated; alternating projections clean that up.
    for _ in range(50):
        if nuclear_norm(g) <= radius + NUCLEAR_FEAS_TOL:
            break
        g = project_box(project_nuclear_ball(g, radius), cfg.gamma)

    nuclear_residual = max(0.0, nuclear_norm(g) - radius)
    box_residual = max(0.0, float(np.max(np.abs(g))) - cfg.gamma)
    report = SolveReport(
        method="convex_pe",
        iterations=iterations,
        converged=converged,
        objective_trace=trace,
        nuclear_residual=nuclear_residual,
        box_residual=box_residual,
        seconds=time.perf_counter() - start,
        warnings=collected,
    )
    return PropensityModel(link, s_fold(g, spec)), report


def convex_pe(
    mask, link: LinkFunction, cfg: ConvexPEConfig
) -> tuple[PropensityModel, SolveReport]:
    """:func:`convex_pe_on_spec` on the square unfolding of the mask."""
    mask = as_mask(mask)
    return convex_pe_on_spec(mask, link, cfg, square_set(mask.shape))


def tucker_loglik_gradients(
    d: TuckerDecomposition, omega, link: LinkFunction
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Gradients of the Bernoulli likelihood objective in the factored model.

    With residual ``R`` = entrywise loss derivative at the reconstructed
    parameter tensor, the factor-``n`` gradient is the mode-``n`` unfolding of
    ``R`` contracted with the transposed factors on every other mode, times
    the transposed core unfolding; the core gradient contracts ``R`` with all
    transposed factors.  The Kronecker factor products this corresponds to
    are never materialized.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != d.shape:
        raise ValueError(f"mask shape {omega.shape} does not match model {d.shape}")
    resid = link.loss_grad(d.reconstruct(), omega)
    core_grad = multi_mode_product(resid, d.factors, transpose=True)
    factor_grads = []
    order = len(d.factors)
    for n in range(order):
        others = [m for m in range(order) if m != n]
        partial = multi_mode_product(
            resid, [d.factors[m] for m in others], others, transpose=True
        )
        factor_grads.append(mode_n_unfold(partial, n) @ mode_n_unfold(d.core, n).T)
    return core_grad, factor_grads


def _initial_decomposition(
    cfg: NonconvexPEConfig, shape: tuple[int, ...]
) -> TuckerDecomposition:
    ranks = tuple(cfg.ranks)
    if len(ranks) != len(shape):
        raise ValueError(f"rank profile {ranks} does not match mask order {len(shape)}")
    if isinstance(cfg.init, TuckerDecomposition):
        if cfg.init.shape != shape or cfg.init.ranks != ranks:
            raise ValueError("explicit initialization does not match shape/ranks")
        return TuckerDecomposition(cfg.init.core.copy(), [u.copy() for u in cfg.init.factors])
    rng = np.random.default_rng(cfg.seed)
    if callable(cfg.init):
        return cfg.init(rng, shape, ranks)
    if cfg.init == "uniform":
        core = rng.uniform(-1.0, 1.0, size=ranks)
        factors = [rng.uniform(-1.0, 1.0, size=(d, r)) for d, r in zip(shape, ranks)]
        return TuckerDecomposition(core, factors)
    raise ValueError(f"unknown initialization rule {cfg.init!r}")


def nonconvex_pe(
    mask, link: LinkFunction, cfg: NonconvexPEConfig
) -> tuple[PropensityModel, SolveReport]:
    """Gradient descent on the factored parameter tensor.

    All blocks (core and every factor) are updated simultaneously from
    gradients evaluated at the current point, with a fixed step size.  Stops
    on relative objective change below ``cfg.tol`` or after ``cfg.max_iter``
    steps; raises :class:`DivergenceError` if the objective becomes
    non-finite or exceeds ten times its initial value.
    """
    start = time.perf_counter()
    mask = as_mask(mask)
    collected: list[str] = []
    _warn_if_degenerate(mask, collected)
    d = _initial_decomposition(cfg, mask.shape)

    obj = negative_bernoulli_loglik(d.reconstruct(), mask, link)
    trace = [obj]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        core_grad, factor_grads = tucker_loglik_gradients(d, mask, link)
        d = TuckerDecomposition(
            d.core - cfg.step * core_grad,
            [u - cfg.step * g for u, g in zip(d.factors, factor_grads)],
        )
        new_obj = negative_bernoulli_loglik(d.reconstruct(), mask, link)
        trace.append(new_obj)
        if not np.isfinite(new_obj) or new_obj > 10.0 * trace[0]:
            raise DivergenceError(
                f"objective diverged at iteration {iterations}: "
                f"{new_obj:.6g} vs initial {trace[0]:.6g}",
                trace,
            )
        if abs(new_obj - obj) <= cfg.tol * max(abs(obj), 1e-300):
            converged = True
            obj = new_obj
            break
        obj = new_obj

    report = SolveReport(
        method="nonconvex_pe",
        iterations=iterations,
        converged=converged,
        objective_trace=trace,
        seconds=time.perf_counter() - start,
        warnings=collected,
    )
    return PropensityModel(link, d), report
