"""Deterministic 1-D longitudinal world model.

A straight road, an ego vehicle controlled through a throttle/brake command in
[-1, 1], two scripted front vehicles (f1 closest, f2 ahead of f1) that slow
traffic down by periodic braking, and a follower b behind the ego.  All
dynamics are closed-form point-mass updates, so an episode is a pure function
of (config, action sequence).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ContractViolation

ROLES = ("ego", "f1", "f2", "b")

# Bumper gap below which a follower slams the brakes.  At the default speeds
# (<= 8 m/s) the full-brake stopping distance is ~4.4 m, so 6 m can never be
# closed even with the inertia filter's one-step lag.
EMERGENCY_GAP_M = 6.0
CRUISE_THROTTLE = 0.4
BRAKE_COMMAND = -0.5

RUNNING = "running"
FINISHED = "finished"
COLLIDED = "collided"
TIMEOUT = "timeout"
STALLED = "stalled"

TERMINAL_KINDS = (FINISHED, COLLIDED, TIMEOUT, STALLED)


@dataclass(frozen=True)
class WorldConfig:
    route_length_m: float = 150.0
    dt: float = 0.05
    t_max: int = 7500
    t_bound: int = 500
    min_start_distance_m: float = 3.0
    spawn_positions: tuple = (
        ("ego", 0.0, 0.0),
        ("f1", 15.0, 8.0),
        ("f2", 30.0, 8.0),
        ("b", -12.0, 0.0),
    )
    front_brake_period: int = 200
    front_brake_duty: float = 0.3
    front_cruise_speed: float = 8.0
    accel_gain_mps2: float = 3.5
    brake_gain_mps2: float = 8.0
    v_cap_mps: float = 20.0
    vehicle_length_m: float = 4.5
    seed: int = 0

    def validate(self) -> None:
        if self.route_length_m <= 0:
            raise ConfigError("route_length_m must be positive")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not (self.t_max >= self.t_bound > 0):
            raise ConfigError("need t_max >= t_bound > 0")
        if not (0.0 < self.front_brake_duty < 1.0):
            raise ConfigError("front_brake_duty must lie in (0, 1)")
        if self.front_brake_period <= 0:
            raise ConfigError("front_brake_period must be positive")
        roles = [r for r, _, _ in self.spawn_positions]
        if sorted(roles) != sorted(ROLES):
            raise ConfigError(f"spawn_positions must cover roles {ROLES} exactly")
        ordered = sorted(self.spawn_positions, key=lambda s: s[1])
        for (_, lo, _), (_, hi, _) in zip(ordered, ordered[1:]):
            if hi - lo < self.vehicle_length_m:
                raise ConfigError("spawn offsets overlap or are not strictly ordered")

    def spawn_offset(self, role: str) -> float:
        for r, off, _ in self.spawn_positions:
            if r == role:
                return off
        raise ConfigError(f"no spawn entry for role {role!r}")


def _parse_spawns(text: str) -> tuple:
    spawns = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad spawn entry {chunk!r}; expected role:offset:speed")
        spawns.append((parts[0], float(parts[1]), float(parts[2])))
    return tuple(spawns)


_FIELD_PARSERS = {
    "route_length_m": float,
    "dt": float,
    "t_max": int,
    "t_bound": int,
    "min_start_distance_m": float,
    "spawn_positions": _parse_spawns,
    "front_brake_period": int,
    "front_brake_duty": float,
    "front_cruise_speed": float,
    "accel_gain_mps2": float,
    "brake_gain_mps2": float,
    "v_cap_mps": float,
    "vehicle_length_m": float,
    "seed": int,
}


def load_world_config(path: str | Path) -> WorldConfig:
    """Read a flat ``key = value`` file; every field is overridable."""
    overrides = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        parser = _FIELD_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            overrides[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    config = WorldConfig(**overrides)
    config.validate()
    return config


@dataclass(frozen=True)
class VehicleState:
    role: str
    position_m: float
    velocity_mps: float
    length_m: float
    last_action: float = 0.0

    @property
    def rear_m(self) -> float:
        return self.position_m - self.length_m / 2.0

    @property
    def front_m(self) -> float:
        return self.position_m + self.length_m / 2.0


@dataclass(frozen=True)
class WorldState:
    t: int
    vehicles: dict
    status: str = RUNNING

    @property
    def ego(self) -> VehicleState:
        return self.vehicles["ego"]


@dataclass(frozen=True)
class EpisodeStatus:
    terminal: bool
    kind: str
    t_terminal: int | None = None


def sgn(x: float) -> int:
    """Sign with sgn(0) = +1, matching the inertia model's branch convention."""
    return 1 if x >= 0 else -1


def apply_inertia(a_tilde: float, a_prev: float) -> float:
    """Dampen the raw command: 0.9*a if the sign flipped, else 0.9*a + 0.1*a_prev."""
    if not (-1.0 <= a_tilde <= 1.0) or not (-1.0 <= a_prev <= 1.0):
        raise ContractViolation(
            f"actions must lie in [-1, 1], got a_tilde={a_tilde} a_prev={a_prev}"
        )
    if sgn(a_tilde) != sgn(a_prev):
        return 0.9 * a_tilde
    return 0.9 * a_tilde + 0.1 * a_prev


def step_ego(state: VehicleState, a: float, dt: float, config: WorldConfig) -> VehicleState:
    """Point-mass update: throttle scales the acceleration gain, brake the
    deceleration gain; velocity is clamped to [0, v_cap] before integrating."""
    if not (-1.0 <= a <= 1.0):
        raise ContractViolation(f"action {a} outside [-1, 1]")
    gain = a * config.accel_gain_mps2 if a >= 0 else a * config.brake_gain_mps2
    velocity = min(max(state.velocity_mps + gain * dt, 0.0), config.v_cap_mps)
    position = state.position_m + velocity * dt
    return dataclasses.replace(
        state, position_m=position, velocity_mps=velocity, last_action=a
    )


def front_vehicle_controller(
    vehicle: VehicleState,
    t: int,
    config: WorldConfig,
    gap_ahead_m: float | None = None,
) -> float:
    """Scripted command for the non-ego vehicles.

    f1/f2 follow a square wave (brake phase, then throttle toward the cruise
    speed; f2 half a period out of phase so the gaps oscillate).  The follower
    b holds a gap to the ego.  Any vehicle with a leader closer than the
    emergency gap brakes fully, which keeps the scripted traffic collision-free
    by construction.
    """
    if vehicle.role == "ego":
        raise ContractViolation("front_vehicle_controller must not drive the ego")
    if gap_ahead_m is not None and gap_ahead_m < EMERGENCY_GAP_M:
        return -1.0
    if vehicle.role == "b":
        return CRUISE_THROTTLE if vehicle.velocity_mps < config.front_cruise_speed else 0.0
    phase_shift = config.front_brake_period // 2 if vehicle.role == "f2" else 0
    phase = (t + phase_shift) % config.front_brake_period
    if phase < config.front_brake_duty * config.front_brake_period:
        return BRAKE_COMMAND
    return CRUISE_THROTTLE if vehicle.velocity_mps < config.front_cruise_speed else 0.0


def detect_collision(world: WorldState) -> bool:
    """True iff any two vehicle intervals strictly overlap (touching is safe)."""
    vehicles = sorted(world.vehicles.values(), key=lambda v: v.position_m)
    for lo, hi in zip(vehicles, vehicles[1:]):
        if lo.front_m > hi.rear_m:
            return True
    return False


def check_termination(world: WorldState, config: WorldConfig) -> EpisodeStatus:
    """Precedence on simultaneous triggers: collided > finished > stalled > timeout."""
    traveled = world.ego.position_m - config.spawn_offset("ego")
    if detect_collision(world):
        return EpisodeStatus(True, COLLIDED, world.t)
    if world.ego.position_m >= config.route_length_m:
        return EpisodeStatus(True, FINISHED, world.t)
    if world.t >= config.t_bound and traveled < config.min_start_distance_m:
        return EpisodeStatus(True, STALLED, world.t)
    if world.t >= config.t_max:
        return EpisodeStatus(True, TIMEOUT, world.t)
    return EpisodeStatus(False, RUNNING)


def reset(config: WorldConfig, seed: int = 0) -> WorldState:
    """Spawn the four vehicles at their configured offsets.  The layout is
    deterministic; the seed is recorded for provenance only."""
    config.validate()
    vehicles = {}
    for role, offset, speed in config.spawn_positions:
        vehicles[role] = VehicleState(
            role=role,
            position_m=offset,
            velocity_mps=speed,
            length_m=config.vehicle_length_m,
        )
    world = WorldState(t=0, vehicles=vehicles, status=RUNNING)
    if detect_collision(world):
        raise ConfigError("spawn layout places vehicles in collision")
    return world


def _leader_gap(world: WorldState, role: str) -> float | None:
    """Bumper gap from `role` to the nearest vehicle ahead, None if the road
    ahead is clear."""
    me = world.vehicles[role]
    gaps = [
        other.rear_m - me.front_m
        for other in world.vehicles.values()
        if other.role != role and other.position_m > me.position_m
    ]
    return min(gaps) if gaps else None


def front_gap(world: WorldState) -> float:
    """Bumper gap from the ego to the nearest true front vehicle."""
    ego = world.ego
    gaps = [
        world.vehicles[r].rear_m - ego.front_m
        for r in ("f1", "f2")
        if world.vehicles[r].position_m > ego.position_m
    ]
    return min(gaps) if gaps else math.inf


def step_world(world: WorldState, a_ego: float, config: WorldConfig) -> WorldState:
    """Advance one step.  `a_ego` is the inertia-filtered ego action; scripted
    vehicles run their controllers (through their own inertia filters) off the
    pre-step state."""
    if world.status != RUNNING:
        raise ContractViolation("cannot step a terminated world")
    commands = {}
    for role in ROLES:
        if role == "ego":
            continue
        vehicle = world.vehicles[role]
        raw = front_vehicle_controller(
            vehicle, world.t, config, gap_ahead_m=_leader_gap(world, role)
        )
        commands[role] = apply_inertia(raw, vehicle.last_action)
    vehicles = {"ego": step_ego(world.vehicles["ego"], a_ego, config.dt, config)}
    for role, a in commands.items():
        vehicles[role] = step_ego(world.vehicles[role], a, config.dt, config)
    stepped = WorldState(t=world.t + 1, vehicles=vehicles, status=RUNNING)
    status = check_termination(stepped, config)
    if status.terminal:
        stepped = dataclasses.replace(stepped, status=status.kind)
    return stepped
