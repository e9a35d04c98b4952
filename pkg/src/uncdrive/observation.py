"""Agent-facing observation: gray vision vector, non-visual channels and the
optional uncertainty one-hot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .perception import CASES, GRID_COLS, GRID_ROWS, CellClass, SemanticGrid
from .sim_core import WorldConfig, WorldState

# Injective gray palette, indexed by CellClass value.
GRAY = {
    CellClass.ROAD: 90,
    CellClass.LANE_MARKING: 160,
    CellClass.EGO_VEHICLE: 220,
    CellClass.OTHER_VEHICLE: 30,
}
GRAY_LUT = np.array([GRAY[CellClass(i)] for i in range(4)], dtype=np.uint8)

VISION_LEN = GRID_ROWS * GRID_COLS
NON_VISUAL_LEN = 6
UNCERTAINTY_LEN = 4

# One-hot slot per case in listing order a-d; the unperturbed case is all-zero.
UNCERTAINTY_SLOT = {"VEXV": 0, "XEVV": 1, "VEXX": 2, "XEXX": 3}


@dataclass(frozen=True)
class ScenarioCase:
    id: int
    perturbed: bool
    informed: bool


SCENARIOS = {
    1: ScenarioCase(1, perturbed=False, informed=False),
    2: ScenarioCase(2, perturbed=True, informed=False),
    3: ScenarioCase(3, perturbed=True, informed=True),
    4: ScenarioCase(4, perturbed=False, informed=True),
}


def scenario(scenario_id: int) -> ScenarioCase:
    if scenario_id not in SCENARIOS:
        raise ContractViolation(f"unknown scenario {scenario_id}; expected 1-4")
    return SCENARIOS[scenario_id]


def observation_length(sc: ScenarioCase) -> int:
    return VISION_LEN + NON_VISUAL_LEN + (UNCERTAINTY_LEN if sc.informed else 0)


def grayscale(class_id: CellClass) -> int:
    try:
        return GRAY[CellClass(class_id)]
    except ValueError as exc:
        raise ContractViolation(f"unknown class id {class_id!r}") from exc


def encode_uncertainty(case: str, sc: ScenarioCase) -> tuple:
    """One-hot of the active perturbation case; empty when uninformed."""
    if not sc.informed:
        return ()
    if case == "VEVV":
        return (0, 0, 0, 0)
    if case not in UNCERTAINTY_SLOT:
        raise ContractViolation(f"unknown perturbation case {case!r}")
    onehot = [0, 0, 0, 0]
    onehot[UNCERTAINTY_SLOT[case]] = 1
    return tuple(onehot)


@dataclass(frozen=True)
class Observation:
    vision: np.ndarray  # (100,) uint8, row-major gray grid
    non_visual: tuple  # (throttle, brake, v, v_norm, orientation, lane_offset)
    uncertainty: tuple  # () or 4 binary values

    def __post_init__(self):
        if self.vision.shape != (VISION_LEN,):
            raise ContractViolation("vision component must have length 100")
        if len(self.non_visual) != NON_VISUAL_LEN:
            raise ContractViolation("non-visual component must have length 6")
        if len(self.uncertainty) not in (0, UNCERTAINTY_LEN):
            raise ContractViolation("uncertainty component must have length 0 or 4")

    def __len__(self) -> int:
        return VISION_LEN + NON_VISUAL_LEN + len(self.uncertainty)

    def as_vector(self) -> np.ndarray:
        """Network input: vision scaled to [0, 1], other channels raw."""
        return np.concatenate(
            [
                self.vision.astype(np.float64) / 255.0,
                np.asarray(self.non_visual, dtype=np.float64),
                np.asarray(self.uncertainty, dtype=np.float64),
            ]
        )

    def gray_image(self) -> np.ndarray:
        return self.vision.reshape(GRID_ROWS, GRID_COLS)


def assemble_observation(
    grid: SemanticGrid,
    world: WorldState,
    a_prev: float,
    case: str,
    sc: ScenarioCase,
    config: WorldConfig,
) -> Observation:
    """Build o_t from an already-perturbed grid.  Throttle/brake intensities
    come from the inertia-filtered action that actually drove the environment;
    orientation and lane offset are identically zero on the straight road but
    kept for interface fidelity."""
    vision = GRAY_LUT[grid.cells].reshape(-1)
    ego = world.ego
    non_visual = (
        a_prev if a_prev > 0 else 0.0,
        -a_prev if a_prev < 0 else 0.0,
        ego.velocity_mps,
        ego.velocity_mps / config.v_cap_mps,
        0.0,
        0.0,
    )
    return Observation(
        vision=vision,
        non_visual=non_visual,
        uncertainty=encode_uncertainty(case, sc),
    )
