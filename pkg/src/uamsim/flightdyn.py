"""First-order velocity-command tracking and waypoint advancement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .orca import AgentState, Vec3
from .routeplan import Path


class Phase(Enum):
    ENROUTE = "enroute"
    ARRIVED = "arrived"


@dataclass
class IntegratorConfig:
    dt: float = 1.0
    omega_clamp: bool = True
    waypoint_threshold: float = 30.0

    def __post_init__(self):
        if self.dt <= 0 or self.waypoint_threshold <= 0:
            raise ValueError("dt and waypoint_threshold must be positive")


@dataclass
class AircraftBody:
    agent: AgentState
    control_gain: float
    path: Path
    target_index: int = 1
    phase: Phase = Phase.ENROUTE
    spawn_time: float = 0.0
    unreachable: bool = False

    def target(self) -> Vec3:
        return self.path.waypoints[self.target_index]


def acceleration(v: Vec3, v_cmd: Vec3, gain: float) -> Vec3:
    """Proportional velocity-tracking control."""
    return tuple(-gain * (a - b) for a, b in zip(v, v_cmd))


def step(body: AircraftBody, v_cmd: Vec3, config: IntegratorConfig) -> AircraftBody:
    """One integration step: move with the pre-update velocity, then blend
    toward the command and re-cap speed; finally advance the waypoint target."""
    p = body.agent.position
    v = body.agent.velocity
    body.agent.position = tuple(a + b * config.dt for a, b in zip(p, v))
    omega = body.control_gain * config.dt
    if config.omega_clamp:
        omega = min(max(omega, 0.0), 1.0)
    v_new = tuple((1.0 - omega) * a + omega * b for a, b in zip(v, v_cmd))
    speed = math.hypot(*v_new)
    if speed > body.agent.v_max:
        v_new = tuple(c * body.agent.v_max / speed for c in v_new)
    body.agent.velocity = v_new
    return advance_waypoint(body, config)


def advance_waypoint(body: AircraftBody, config: IntegratorConfig) -> AircraftBody:
    """Skip past every reached waypoint; mark arrival at the final one."""
    waypoints = body.path.waypoints
    last = len(waypoints) - 1
    while body.target_index < last and \
            math.dist(body.agent.position, waypoints[body.target_index]) \
            <= config.waypoint_threshold:
        body.target_index += 1
    if body.target_index == last and \
            math.dist(body.agent.position, waypoints[last]) <= config.waypoint_threshold:
        body.phase = Phase.ARRIVED
    return body
