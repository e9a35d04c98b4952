import numpy as np
import pytest

from uncdrive.env import DrivingEnv, MPC
from uncdrive.errors import ContractViolation
from uncdrive.observation import (
    GRAY,
    NON_VISUAL_LEN,
    VISION_LEN,
    Observation,
    assemble_observation,
    encode_uncertainty,
    grayscale,
    observation_length,
    scenario,
)
from uncdrive.perception import CASES, CellClass, apply_perturbation, render_bev
from uncdrive.sim_core import WorldConfig, reset

CFG = WorldConfig()


class TestGrayscale:
    def test_declared_palette(self):
        assert grayscale(CellClass.ROAD) == 90
        assert grayscale(CellClass.LANE_MARKING) == 160
        assert grayscale(CellClass.OTHER_VEHICLE) == 30
        assert grayscale(CellClass.EGO_VEHICLE) == 220

    def test_injective(self):
        values = [grayscale(c) for c in CellClass]
        assert len(set(values)) == len(values)

    def test_byte_range(self):
        assert all(0 <= grayscale(c) <= 255 for c in CellClass)

    def test_unknown_class_rejected(self):
        with pytest.raises(ContractViolation):
            grayscale(7)


class TestEncodeUncertainty:
    def test_vexv_informed(self):
        assert encode_uncertainty("VEXV", scenario(3)) == (1, 0, 0, 0)

    def test_vevv_informed(self):
        assert encode_uncertainty("VEVV", scenario(3)) == (0, 0, 0, 0)

    def test_uninformed_is_empty(self):
        assert encode_uncertainty("VEXX", scenario(2)) == ()
        assert encode_uncertainty("VEVV", scenario(1)) == ()

    def test_slot_order(self):
        assert encode_uncertainty("XEVV", scenario(3)) == (0, 1, 0, 0)
        assert encode_uncertainty("VEXX", scenario(3)) == (0, 0, 1, 0)
        assert encode_uncertainty("XEXX", scenario(3)) == (0, 0, 0, 1)

    def test_at_most_one_bit(self):
        for case in CASES:
            onehot = encode_uncertainty(case, scenario(3))
            assert sum(onehot) <= 1


class TestScenarios:
    def test_four_scenarios(self):
        assert scenario(1).perturbed is False and scenario(1).informed is False
        assert scenario(2).perturbed is True and scenario(2).informed is False
        assert scenario(3).perturbed is True and scenario(3).informed is True
        assert scenario(4).perturbed is False and scenario(4).informed is True

    def test_observation_lengths(self):
        assert observation_length(scenario(1)) == 106
        assert observation_length(scenario(2)) == 106
        assert observation_length(scenario(3)) == 110
        assert observation_length(scenario(4)) == 110

    def test_unknown_scenario(self):
        with pytest.raises(ContractViolation):
            scenario(5)


def build_obs(sc, case="VEVV", a_prev=0.0, world=None):
    world = world or reset(CFG, seed=0)
    grid = apply_perturbation(render_bev(world, CFG), case, world, CFG)
    return assemble_observation(grid, world, a_prev, case, sc, CFG)


class TestAssembleObservation:
    def test_length_uninformed(self):
        assert len(build_obs(scenario(1))) == 106

    def test_length_informed(self):
        assert len(build_obs(scenario(3))) == 110

    def test_initial_state_non_visual_zero(self):
        obs = build_obs(scenario(1), a_prev=0.0)
        assert obs.non_visual == (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def test_throttle_brake_mutually_exclusive(self):
        throttle = build_obs(scenario(1), a_prev=0.6)
        assert throttle.non_visual[0] == 0.6 and throttle.non_visual[1] == 0.0
        brake = build_obs(scenario(1), a_prev=-0.3)
        assert brake.non_visual[0] == 0.0 and brake.non_visual[1] == 0.3
        assert throttle.non_visual[0] * throttle.non_visual[1] == 0.0

    def test_vision_values_are_palette(self):
        obs = build_obs(scenario(1))
        assert set(np.unique(obs.vision)) <= set(GRAY.values())

    def test_flatten_roundtrip(self):
        obs = build_obs(scenario(1))
        assert np.array_equal(obs.gray_image().reshape(-1), obs.vision)

    def test_vector_scaling(self):
        obs = build_obs(scenario(3), case="VEXV")
        vec = obs.as_vector()
        assert vec.shape == (110,)
        assert np.all(vec[:VISION_LEN] <= 1.0) and np.all(vec[:VISION_LEN] >= 0.0)
        assert tuple(vec[-4:]) == (1.0, 0.0, 0.0, 0.0)


class TestInformednessOnlyChangesUncertainty:
    @pytest.mark.parametrize("pair", [(1, 4), (2, 3)])
    def test_vision_and_non_visual_identical(self, pair):
        uninformed, informed = pair
        world = reset(CFG, seed=5)
        for case in CASES:
            obs_a = build_obs(scenario(uninformed), case=case, a_prev=0.4, world=world)
            obs_b = build_obs(scenario(informed), case=case, a_prev=0.4, world=world)
            assert np.array_equal(obs_a.vision, obs_b.vision)
            assert obs_a.non_visual == obs_b.non_visual
            assert obs_a.uncertainty == ()
            assert len(obs_b.uncertainty) == 4


class TestScenario4Evaluation:
    def test_forced_zero_uncertainty(self):
        env = DrivingEnv(CFG, scenario(3), MPC, force_zero_uncertainty=True)
        obs = env.reset(123)
        for _ in range(50):
            assert obs.uncertainty == (0, 0, 0, 0)
            result = env.step(0.3)
            if result.done:
                break
            obs = result.obs
