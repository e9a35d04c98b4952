"""Time-decayed momentary-speed reward with terminal bonus/penalty."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation
from .sim_core import COLLIDED, FINISHED, RUNNING, STALLED, TIMEOUT


@dataclass(frozen=True)
class RewardParams:
    beta: float = 3.0
    beta_tilde: float = 2.0
    alpha: float = 50.0
    alpha_tilde: float = 100.0
    t_max: int = 7500

    def __post_init__(self):
        if min(self.beta, self.beta_tilde, self.alpha, self.alpha_tilde) <= 0:
            raise ContractViolation("reward constants must be strictly positive")
        if self.t_max <= 0:
            raise ContractViolation("t_max must be strictly positive")


FAILURE_KINDS = (COLLIDED, TIMEOUT, STALLED)


def momentary_speed(loc_prev: float, loc_now: float, loc_final: float) -> float:
    """Per-step displacement toward the route end point."""
    return abs(loc_final - loc_prev) - abs(loc_final - loc_now)


def step_weight(t: int, params: RewardParams) -> float:
    return params.beta + params.beta_tilde * (1.0 - t / params.t_max)


def compute_reward(t: int, v_mom: float, status_kind: str, params: RewardParams) -> float:
    """Terminal rewards replace the per-step term; otherwise the momentary
    speed is weighted by the linearly decaying time factor."""
    if t < 0:
        raise ContractViolation("t must be non-negative")
    if status_kind == FINISHED:
        return params.alpha_tilde
    if status_kind in FAILURE_KINDS:
        return -params.alpha
    if status_kind != RUNNING:
        raise ContractViolation(f"unknown episode status {status_kind!r}")
    return step_weight(t, params) * v_mom


def cumulative_reward(rewards) -> float:
    """Analysis quantity: undiscounted sum over the pre-terminal steps."""
    return float(sum(rewards))
