import math

import numpy as np
import pytest

from tenips.bounds import (
    BoundInputs,
    completion_error_bound,
    link_smoothness_ratio,
    nuclear_threshold,
    propensity_error_bound,
    relative_error,
    reweight_deviation_bound,
)
from tenips.links import LOGISTIC
from tenips.synthesis import GeneratorConfig, add_relative_noise, random_tucker
from tenips.tensor import UnfoldingSpec, max_abs, nuclear_norm, s_unfold, square_set


class TestRelativeError:
    def test_perfect_estimate(self):
        t = np.arange(6.0).reshape(2, 3) + 1.0
        assert relative_error(t, t) == 0.0

    def test_zero_estimate(self):
        t = np.arange(6.0).reshape(2, 3) + 1.0
        assert relative_error(np.zeros_like(t), t) == pytest.approx(1.0)

    def test_doubled_estimate(self):
        t = np.arange(6.0).reshape(2, 3) + 1.0
        assert relative_error(2.0 * t, t) == pytest.approx(1.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            relative_error(np.ones((2, 2)), np.zeros((2, 2)))


class TestLinkSmoothnessRatio:
    def test_logistic_identity_equals_one(self):
        # For the logistic link the derivative is exactly p(1-p), so the
        # ratio is 1 everywhere regardless of the box half-width.
        for gamma in (0.5, 1.0, 7.0):
            assert link_smoothness_ratio(LOGISTIC, gamma) == pytest.approx(1.0, abs=1e-12)


def _instance(seed=0, shape=(8, 8, 8, 8), ranks=(2, 2, 2, 2)):
    data, _ = random_tucker(GeneratorConfig(shape, ranks, core_scale=10.0, seed=seed))
    data = add_relative_noise(data, 0.1, seed=seed + 1)
    param, _ = random_tucker(GeneratorConfig(shape, ranks, core_scale=5.0, seed=seed + 2))
    return data, param


class TestPropensityErrorBound:
    def test_closed_form(self):
        data, param = _instance()
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, gamma=1.0)
        spec = square_set(data.shape)
        tau = 2.5
        expected = 4.0 * math.e * tau * (1.0 / 8.0 + 1.0 / 8.0)
        assert propensity_error_bound(inputs, spec, tau) == pytest.approx(expected, rel=1e-12)

    def test_symmetric_unfolding_simplification(self):
        data, param = _instance(seed=3)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, gamma=2.0)
        spec = square_set(data.shape)
        assert spec.row_dim == spec.col_dim
        tau = 1.7
        assert propensity_error_bound(inputs, spec, tau) == pytest.approx(
            8.0 * math.e * inputs.l_gamma * tau / math.sqrt(spec.row_dim), rel=1e-12
        )

    def test_square_bound_smallest_for_cubical_order6(self):
        shape = (8,) * 6
        data, param = _instance(seed=4, shape=shape, ranks=(2,) * 6)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, gamma=1.0)
        tau = 1.0
        sq = propensity_error_bound(inputs, square_set(shape), tau)
        rect = propensity_error_bound(inputs, UnfoldingSpec((0,), shape), tau)
        assert sq < rect


class TestNuclearThreshold:
    def test_matches_direct_computation(self):
        data, param = _instance(seed=5)
        spec = square_set(param.shape)
        direct = nuclear_norm(s_unfold(param, spec)) / math.sqrt(param.size)
        assert nuclear_threshold(param) == pytest.approx(direct, rel=1e-12)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC)
        assert inputs.theta == pytest.approx(direct, rel=1e-12)


class TestBoundInputs:
    def test_spikiness_and_extrema(self):
        data, param = _instance(seed=6)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, gamma=1.5, epsilon=0.2)
        assert inputs.psi == pytest.approx(max_abs(data))
        assert inputs.alpha == pytest.approx(max_abs(param))
        assert inputs.alpha_sp == pytest.approx(
            max_abs(data) * math.sqrt(data.size) / np.linalg.norm(data.ravel()), rel=1e-12
        )
        assert inputs.epsilon == 0.2
        assert len(inputs.mode_singular_values) == data.ndim

    def test_condition_numbers(self):
        data, param = _instance(seed=7)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC)
        kappas = inputs.condition_numbers((2, 2, 2, 2))
        for s, k in zip(inputs.mode_singular_values, kappas):
            assert k == pytest.approx(s[0] / s[1], rel=1e-12)
        assert all(k >= 1.0 for k in kappas)


class TestCompletionErrorBound:
    def test_exact_rank_zero_noise_zero_deviation_gives_zero(self):
        data, _ = random_tucker(GeneratorConfig((6, 6, 6), (2, 2, 2), seed=8))
        param = 0.3 * data
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, epsilon=0.0)
        assert completion_error_bound(inputs, (2, 2, 2), xbar_deviation=0.0) == pytest.approx(
            0.0, abs=1e-6
        )

    def test_reduces_to_tail_term(self):
        data, param = _instance(seed=9)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, epsilon=0.0)
        ranks = (2, 2, 2, 2)
        got = completion_error_bound(inputs, ranks, xbar_deviation=0.0)
        tails = sum(float(np.sum(s[r:] ** 2)) for s, r in zip(inputs.mode_singular_values, ranks))
        assert got == pytest.approx(math.sqrt(tails) / inputs.fnorm, rel=1e-10)

    def test_vanishing_gap_returns_infinity(self):
        data = np.diag([2.0, 2.0, 1.0])
        inputs = BoundInputs.from_instance(data, 0.1 * data, LOGISTIC, epsilon=0.1)
        with pytest.warns(UserWarning, match="vanishing"):
            assert completion_error_bound(inputs, (1, 1), xbar_deviation=0.0) == math.inf

    def test_requires_tau_or_deviation(self):
        data, param = _instance(seed=10)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC)
        with pytest.raises(ValueError):
            completion_error_bound(inputs, (2, 2, 2, 2))

    def test_deviation_bound_used_when_not_supplied(self):
        data, param = _instance(seed=11)
        inputs = BoundInputs.from_instance(data, param, LOGISTIC, epsilon=0.1)
        tau = inputs.theta
        via_tau = completion_error_bound(inputs, (2, 2, 2, 2), tau=tau)
        dev = reweight_deviation_bound(inputs, tau)
        via_dev = completion_error_bound(inputs, (2, 2, 2, 2), xbar_deviation=dev)
        assert via_tau == pytest.approx(via_dev, rel=1e-12)
        assert math.isfinite(via_tau) and via_tau >= 0.0
