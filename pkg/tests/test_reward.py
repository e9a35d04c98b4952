import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncdrive.errors import ContractViolation
from uncdrive.reward import (
    RewardParams,
    compute_reward,
    cumulative_reward,
    momentary_speed,
    step_weight,
)
from uncdrive.sim_core import COLLIDED, FINISHED, RUNNING, STALLED, TIMEOUT

PARAMS = RewardParams()


class TestMomentarySpeed:
    def test_one_meter_forward(self):
        assert momentary_speed(10.0, 11.0, 150.0) == 1.0

    def test_no_movement(self):
        assert momentary_speed(10.0, 10.0, 150.0) == 0.0

    def test_overshoot(self):
        # |150-149| - |150-151| = 0 despite 2 m of travel
        assert momentary_speed(149.0, 151.0, 150.0) == 0.0

    @given(
        prev=st.floats(-10, 200),
        now=st.floats(-10, 200),
        final=st.floats(0, 200),
    )
    def test_matches_absolute_value_oracle(self, prev, now, final):
        assert momentary_speed(prev, now, final) == abs(final - prev) - abs(final - now)


class TestComputeReward:
    def test_initial_weight(self):
        assert compute_reward(0, 1.0, RUNNING, PARAMS) == pytest.approx(5.0)

    @pytest.mark.parametrize("kind", [COLLIDED, TIMEOUT, STALLED])
    def test_failure_penalty(self, kind):
        assert compute_reward(123, 1.0, kind, PARAMS) == -50.0

    def test_finish_bonus(self):
        assert compute_reward(400, 1.0, FINISHED, PARAMS) == 100.0

    def test_late_step_weight_high_precision(self):
        expected = Fraction(3) + Fraction(2) * (1 - Fraction(7499, 7500))
        assert compute_reward(7499, 1.0, RUNNING, PARAMS) == pytest.approx(
            float(expected), abs=1e-12
        )

    def test_negative_t_rejected(self):
        with pytest.raises(ContractViolation):
            compute_reward(-1, 1.0, RUNNING, PARAMS)

    def test_constants_strictly_positive(self):
        with pytest.raises(ContractViolation):
            RewardParams(beta=0.0)
        with pytest.raises(ContractViolation):
            RewardParams(alpha=-1.0)


class TestCumulativeReward:
    def test_empty(self):
        assert cumulative_reward([]) == 0.0

    def test_two_terms(self):
        assert cumulative_reward([5.0, 4.9]) == pytest.approx(9.9)

    def test_constant_speed_closed_form(self):
        rewards = [compute_reward(t, 1.0, RUNNING, PARAMS) for t in range(1, 101)]
        # arithmetic-series oracle: sum_{t=1}^{100} (3 + 2(1 - t/7500))
        n = 100
        oracle = 5.0 * n - 2.0 / 7500.0 * (n * (n + 1) / 2)
        assert cumulative_reward(rewards) == pytest.approx(oracle, rel=1e-12)


class TestRewardProperties:
    def test_weight_strictly_decreasing_and_bounded(self):
        weights = [step_weight(t, PARAMS) for t in range(0, PARAMS.t_max + 1, 50)]
        assert all(a > b for a, b in zip(weights, weights[1:]))
        assert all(PARAMS.beta <= w <= PARAMS.beta + PARAMS.beta_tilde for w in weights)

    def test_front_loading_rearrangement(self):
        # Same multiset of speeds: earlier large speeds never score worse.
        speeds = [0.5, 1.2, 0.0, 0.9, 0.3, 1.0]
        best = cumulative_reward(
            compute_reward(t + 1, v, RUNNING, PARAMS)
            for t, v in enumerate(sorted(speeds, reverse=True))
        )
        for perm in itertools.permutations(speeds):
            value = cumulative_reward(
                compute_reward(t + 1, v, RUNNING, PARAMS) for t, v in enumerate(perm)
            )
            assert value <= best + 1e-12

    def test_momentary_speed_telescopes(self):
        positions = np.cumsum(np.abs(np.random.default_rng(0).normal(0.3, 0.2, 200)))
        positions = np.clip(positions, 0, 149.0)
        total = sum(
            momentary_speed(a, b, 150.0) for a, b in zip(positions, positions[1:])
        )
        assert total == pytest.approx(positions[-1] - positions[0], rel=1e-9)
