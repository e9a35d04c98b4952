"""BEV semantic grid rendering and the five visibility perturbation cases.

The grid is 4 columns x 25 rows; row 0 is the farthest row ahead of the ego.
Each row covers a 2.5 m longitudinal band of a window reaching 50 m ahead of
and 12.5 m behind the ego.  Columns 0 and 3 carry the (dashed) lane marking,
columns 1 and 2 are the drivable lane where vehicles are painted.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .sim_core import WorldConfig, WorldState

GRID_ROWS = 25
GRID_COLS = 4
WINDOW_AHEAD_M = 50.0
WINDOW_BEHIND_M = 12.5
ROW_LENGTH_M = (WINDOW_AHEAD_M + WINDOW_BEHIND_M) / GRID_ROWS  # 2.5 m
LANE_COLS = (1, 2)
MARKING_COLS = (0, 3)
DASH_PERIOD_M = 2 * ROW_LENGTH_M  # marking on for one band, off for the next


class CellClass(IntEnum):
    ROAD = 0
    LANE_MARKING = 1
    EGO_VEHICLE = 2
    OTHER_VEHICLE = 3


@dataclass(frozen=True)
class SemanticGrid:
    cells: np.ndarray  # (25, 4) uint8 of CellClass values, row 0 farthest ahead

    def __post_init__(self):
        if self.cells.shape != (GRID_ROWS, GRID_COLS):
            raise ContractViolation(f"grid must be {GRID_ROWS}x{GRID_COLS}")

    def __eq__(self, other):
        return isinstance(other, SemanticGrid) and np.array_equal(self.cells, other.cells)

    def to_bytes(self) -> bytes:
        """Compact row-major serialization, one byte per cell."""
        return self.cells.astype(np.uint8).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SemanticGrid":
        if len(blob) != GRID_ROWS * GRID_COLS:
            raise ContractViolation(f"grid blob must be {GRID_ROWS * GRID_COLS} bytes")
        return cls(np.frombuffer(blob, dtype=np.uint8).reshape(GRID_ROWS, GRID_COLS).copy())


CASES = ("VEXV", "XEVV", "VEXX", "XEXX", "VEVV")

# Roles whose cells are repainted with the background for each case.
REMOVED_ROLES = {
    "VEXV": ("f1",),
    "XEVV": ("b",),
    "VEXX": ("f1", "f2"),
    "XEXX": ("f1", "f2", "b"),
    "VEVV": (),
}

MPC_DURATIONS = (50, 100, 150, 200, 400)


@dataclass(frozen=True)
class MpcSchedule:
    segments: tuple  # ordered (case, duration_steps)
    seed: int

    def horizon(self) -> int:
        return sum(d for _, d in self.segments)


# Hoisted row geometry: band edges are fixed in the ego frame.
_ROWS = np.arange(GRID_ROWS)
_BAND_HI = WINDOW_AHEAD_M - ROW_LENGTH_M * _ROWS
_BAND_LO = _BAND_HI - ROW_LENGTH_M
_CENTER_OFFSETS = _BAND_HI - ROW_LENGTH_M / 2.0
_ROAD, _MARKING, _EGO, _OTHER = (
    int(CellClass.ROAD),
    int(CellClass.LANE_MARKING),
    int(CellClass.EGO_VEHICLE),
    int(CellClass.OTHER_VEHICLE),
)


def _rows_for_interval(ego_position: float, rear: float, front: float) -> np.ndarray:
    """Row indices whose band strictly overlaps [rear, front] (world coords)."""
    lo = rear - ego_position
    hi = front - ego_position
    return _ROWS[(lo < _BAND_HI) & (hi > _BAND_LO)]


def _paint_background(ego_position: float) -> np.ndarray:
    cells = np.full((GRID_ROWS, GRID_COLS), _ROAD, dtype=np.uint8)
    centers = ego_position + _CENTER_OFFSETS
    dashed = (np.floor(centers / ROW_LENGTH_M).astype(np.int64) % 2) == 0
    for col in MARKING_COLS:
        cells[dashed, col] = _MARKING
    return cells


def _render(world: WorldState, config: WorldConfig, include_roles) -> SemanticGrid:
    ego = world.ego
    cells = _paint_background(ego.position_m)
    # Other vehicles first so the ego band always wins on overlap.
    for role in include_roles:
        if role == "ego":
            continue
        vehicle = world.vehicles[role]
        rows = _rows_for_interval(ego.position_m, vehicle.rear_m, vehicle.front_m)
        for col in LANE_COLS:
            cells[rows, col] = _OTHER
    ego_rows = _rows_for_interval(ego.position_m, ego.rear_m, ego.front_m)
    for col in LANE_COLS:
        cells[ego_rows, col] = _EGO
    return SemanticGrid(cells)


def render_bev(world: WorldState, config: WorldConfig) -> SemanticGrid:
    """Ground-truth grid with every vehicle visible."""
    return _render(world, config, world.vehicles.keys())


def vehicle_cell_mask(world: WorldState, config: WorldConfig, role: str) -> np.ndarray:
    """Boolean mask of the cells attributed to `role` in the unperturbed grid,
    i.e. the cells that change when that vehicle alone is removed."""
    full = render_bev(world, config).cells
    without = _render(
        world, config, [r for r in world.vehicles if r != role]
    ).cells
    return full != without


def apply_perturbation(
    grid: SemanticGrid, case: str, world: WorldState, config: WorldConfig
) -> SemanticGrid:
    """Repaint the case's removed vehicles with the background they hide.

    Implemented by re-rendering the scene without the removed roles, which
    makes the removal undetectable from the mask itself and keeps the
    operation idempotent.  Ego cells are never altered.
    """
    if case not in REMOVED_ROLES:
        raise ContractViolation(f"unknown perturbation case {case!r}")
    removed = REMOVED_ROLES[case]
    if not removed:
        return grid
    keep = [r for r in world.vehicles if r not in removed]
    return _render(world, config, keep)


def sample_mpc_schedule(seed: int, horizon: int) -> MpcSchedule:
    """Concatenate (case, duration) segments until the horizon is covered;
    cases and durations drawn uniformly with replacement."""
    if horizon < 1:
        raise ContractViolation("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    segments = []
    total = 0
    while total < horizon:
        case = CASES[rng.integers(len(CASES))]
        duration = MPC_DURATIONS[rng.integers(len(MPC_DURATIONS))]
        segments.append((case, duration))
        total += duration
    return MpcSchedule(segments=tuple(segments), seed=seed)


def current_case(schedule: MpcSchedule, t: int) -> str:
    """Case of the segment containing step t; segments are left-inclusive."""
    if t < 0:
        raise IndexError(f"step {t} out of range")
    offset = 0
    for case, duration in schedule.segments:
        if t < offset + duration:
            return case
        offset += duration
    raise IndexError(f"step {t} beyond schedule horizon {offset}")


def schedule_case_array(schedule: MpcSchedule) -> np.ndarray:
    """Per-step case index (into CASES) for fast lookup inside episode loops."""
    indices = np.concatenate(
        [np.full(d, CASES.index(c), dtype=np.int8) for c, d in schedule.segments]
    )
    return indices


def write_gray_pgm(img: np.ndarray, path: str | Path) -> None:
    """Binary PGM of an already gray-scaled (25, 4) image."""
    if img.shape != (GRID_ROWS, GRID_COLS):
        raise ContractViolation(f"image must be {GRID_ROWS}x{GRID_COLS}")
    header = f"P5\n{GRID_COLS} {GRID_ROWS}\n255\n".encode()
    Path(path).write_bytes(header + img.astype(np.uint8).tobytes())


def write_pgm(grid: SemanticGrid, path: str | Path, gray_lut=None) -> None:
    """Debug exporter: one binary PGM per grid (gray per class)."""
    if gray_lut is None:
        from .observation import GRAY_LUT

        gray_lut = GRAY_LUT
    write_gray_pgm(gray_lut[grid.cells], path)
