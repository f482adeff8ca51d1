"""Discrete-time simulation engine.

Per tick: apply closures, inject due spawns, optionally re-plan routes,
snapshot states, compute avoidance commands from the snapshot, integrate in
id order, retire arrivals, log.  Everything is a deterministic function of
the run configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from . import flightdyn, metrics, orca, routeplan
from .flightdyn import AircraftBody, IntegratorConfig, Phase
from .hexspace import RegionId
from .metrics import Record, TrajectoryLog, Trip
from .orca import AgentState, SpatialHash
from .routeplan import Path, PlannerConfig
from .scenario import ScenarioConfig, SpawnEvent, generate_demand

Vec3 = tuple[float, float, float]


@dataclass
class AvoidanceConfig:
    tau: float = 10.0
    fallback: bool = True
    couple_tau_to_gain: bool = False  # tau = 1 / control_gain when set


@dataclass
class ReplanPolicy:
    period: float = 60.0
    on_spawn: bool = True
    on_closure: bool = True
    # floor between consecutive re-plans from period/spawn triggers; closure
    # toggles bypass it so no-fly responses are immediate
    min_interval: float = 10.0


@dataclass
class AircraftDefaults:
    safety_radius: float = 50.0
    detection_radius: float = 200.0
    v_max: float = 20.0
    control_gain: float = 5.0


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    avoidance: AvoidanceConfig = field(default_factory=AvoidanceConfig)
    replan: ReplanPolicy = field(default_factory=ReplanPolicy)
    aircraft: AircraftDefaults = field(default_factory=AircraftDefaults)
    out_dir: Optional[str] = None
    verbose_orca: bool = False

    def config_hash(self) -> str:
        doc = {
            "scenario": self.scenario.name,
            "seed": self.scenario.demand.seed,
            "horizon": self.scenario.horizon,
            "mode": self.scenario.guidance_mode,
            "planner": [self.planner.prediction_step, self.planner.arrival_epsilon,
                        self.planner.region_leg_length, self.planner.max_candidates],
            "integrator": [self.integrator.dt, self.integrator.omega_clamp,
                           self.integrator.waypoint_threshold],
            "avoidance": [self.avoidance.tau, self.avoidance.fallback],
            "replan": [self.replan.period, self.replan.on_spawn,
                       self.replan.on_closure, self.replan.min_interval],
            "aircraft": [self.aircraft.safety_radius, self.aircraft.detection_radius,
                         self.aircraft.v_max, self.aircraft.control_gain],
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class WorldState:
    clock: float = 0.0
    aircraft: dict[int, AircraftBody] = field(default_factory=dict)
    pending: list[SpawnEvent] = field(default_factory=list)
    next_pending: int = 0    # index of first not-yet-injected event
    deferred: list[SpawnEvent] = field(default_factory=list)
    last_plan_time: float = -math.inf
    closed_regions: frozenset = frozenset()
    spawned: int = 0
    completed: int = 0
    flagged: int = 0
    transit_exceptions: int = 0

    def accumulation(self, network) -> dict[RegionId, int]:
        counts: dict[RegionId, int] = {}
        for body in self.aircraft.values():
            rid = network.locate(body.agent.position)
            counts[rid] = counts.get(rid, 0) + 1
        return counts


@dataclass
class OutputBundle:
    log: TrajectoryLog
    summary: dict
    mfd: list[metrics.MfdSample]
    fit: Optional[metrics.FitParams]
    paths: dict[str, str] = field(default_factory=dict)


def replan_trigger(state: WorldState, policy: ReplanPolicy,
                   spawned_now: bool, closure_toggled: bool) -> bool:
    if policy.on_closure and closure_toggled:
        return True
    due = state.clock - state.last_plan_time >= policy.period
    spawn_due = policy.on_spawn and spawned_now
    return (due or spawn_due) and \
        state.clock - state.last_plan_time >= policy.min_interval


class Engine:
    def __init__(self, config: RunConfig):
        self.config = config
        self.network = config.scenario.network
        for region, start, end in config.scenario.closures:
            self.network.add_closure(RegionId(*region), start, end)
        self.state = WorldState()
        self.state.pending = generate_demand(config.scenario.demand,
                                             config.scenario.horizon)
        self.log = TrajectoryLog()
        self._next_id = 0
        self._orca_trace: list[dict] = []
        if config.avoidance.couple_tau_to_gain:
            config.avoidance.tau = 1.0 / config.aircraft.control_gain

    # -- spawn handling -----------------------------------------------------

    def _spawn_blocked(self, origin: Vec3,
                       occupancy: dict[RegionId, int]) -> bool:
        rid = self.network.locate_clamped(origin)
        if rid in self.state.closed_regions:
            return True
        # gate-hold: departures wait while the origin cell is at capacity
        if occupancy.get(rid, 0) >= self.network.regions[rid].n_cr:
            return True
        guard = 2.0 * self.config.aircraft.safety_radius
        return any(math.dist(body.agent.position, origin) <= guard
                   for body in self.state.aircraft.values())

    def _inject_spawns(self) -> bool:
        state = self.state
        due = list(state.deferred)
        state.deferred = []
        while state.next_pending < len(state.pending) and \
                state.pending[state.next_pending].time <= state.clock:
            due.append(state.pending[state.next_pending])
            state.next_pending += 1
        occupancy: dict[RegionId, int] = {}
        for body in state.aircraft.values():
            rid = self.network.locate_clamped(body.agent.position)
            occupancy[rid] = occupancy.get(rid, 0) + 1
        spawned_any = False
        for event in due:
            if self._spawn_blocked(event.origin, occupancy):
                state.deferred.append(event)
                continue
            self._spawn(event)
            rid = self.network.locate_clamped(event.origin)
            occupancy[rid] = occupancy.get(rid, 0) + 1
            spawned_any = True
        return spawned_any

    def _spawn(self, event: SpawnEvent) -> None:
        cfg = self.config.aircraft
        aid = self._next_id
        self._next_id += 1
        agent = AgentState(
            id=aid, position=event.origin, velocity=(0.0, 0.0, 0.0),
            safety_radius=cfg.safety_radius, detection_radius=cfg.detection_radius,
            v_max=cfg.v_max,
        )
        path = routeplan.direct_path(event.origin, event.destination, self.network)
        body = AircraftBody(agent=agent, control_gain=cfg.control_gain, path=path,
                            target_index=1, spawn_time=self.state.clock)
        self.state.aircraft[aid] = body
        self.state.spawned += 1
        self.log.trips[aid] = Trip(aid, event.origin, event.destination,
                                   self.state.clock)

    # -- planning -----------------------------------------------------------

    def _replan(self) -> None:
        state = self.state
        graph = self.network.routing_graph(at_time=state.clock)
        mode = self.config.scenario.guidance_mode
        bodies = [b for b in state.aircraft.values() if b.phase == Phase.ENROUTE]
        if not bodies:
            state.last_plan_time = state.clock
            return
        if mode == "baseline":
            # direct routes only; re-aim around closures with a single candidate
            for body in bodies:
                dest = self.log.trips[body.agent.id].destination
                try:
                    cs = routeplan.candidate_paths(
                        graph, body.agent.position, dest, self.network,
                        owner=body.agent.id, max_candidates=1)
                    self._assign(body, cs.paths[0])
                except routeplan.UnreachableDestinationError:
                    self._flag_unreachable(body)
            state.last_plan_time = state.clock
            return

        candidates = []
        plannable = []
        for body in bodies:
            dest = self.log.trips[body.agent.id].destination
            try:
                cs = routeplan.candidate_paths(
                    graph, body.agent.position, dest, self.network,
                    owner=body.agent.id,
                    max_candidates=self.config.planner.max_candidates)
                candidates.append(cs)
                plannable.append(body)
            except routeplan.UnreachableDestinationError:
                self._flag_unreachable(body)
        if plannable:
            result = routeplan.approx_optimal_paths(
                candidates, self.config.planner, self.network)
            for body, path in zip(plannable, result.decision.selection):
                self._assign(body, path)
        state.last_plan_time = state.clock

    def _assign(self, body: AircraftBody, path: Path) -> None:
        if body.unreachable:
            body.unreachable = False
            self.state.flagged -= 1
        body.path = path
        body.target_index = 1

    def _flag_unreachable(self, body: AircraftBody) -> None:
        if not body.unreachable:
            body.unreachable = True
            self.state.flagged += 1
        # hold position: degenerate path at the current location
        p = body.agent.position
        body.path = Path((p, p), (), 0.0)
        body.target_index = 1

    _KEEPOUT_BUFFER = 100.0
    _KEEPOUT_SPEED = 5.0

    def _closure_keepout(self, ghost, closed_now):
        """Outward drift constraints near active no-fly cells.

        Route re-planning keeps waypoints out of closed regions, but avoidance
        maneuvers can still push an aircraft across a cell corner; a mild
        half-space per nearby closed cell makes the boundary repulsive.
        """
        constraints = []
        for rid in closed_now:
            c = self.network.regions[rid].centroid
            radius = self.network.regions[rid].circumradius
            dx = ghost.position[0] - c[0]
            dy = ghost.position[1] - c[1]
            d = math.hypot(dx, dy)
            if d >= radius + self._KEEPOUT_BUFFER or d < 1e-9:
                continue
            gap = d - radius
            req = min(self._KEEPOUT_SPEED,
                      self._KEEPOUT_SPEED * (self._KEEPOUT_BUFFER - gap)
                      / self._KEEPOUT_BUFFER)
            n = (dx / d, dy / d, 0.0)
            constraints.append(orca.HalfSpaceConstraint(
                point=(n[0] * req, n[1] * req, 0.0), normal=n))
        return constraints

    # -- main loop ----------------------------------------------------------

    def tick(self) -> None:
        state = self.state
        cfg = self.config

        closed_now = frozenset(
            rid for rid in self.network.regions
            if self.network.is_closed(rid, state.clock)
        )
        closure_toggled = closed_now != state.closed_regions
        state.closed_regions = closed_now

        spawned_now = self._inject_spawns()

        if replan_trigger(state, cfg.replan, spawned_now, closure_toggled):
            self._replan()

        bodies = [state.aircraft[aid] for aid in sorted(state.aircraft)]
        # commands act one step late (positions move with the pre-update
        # velocity), so evaluate avoidance at one-step-ahead ghost positions
        dt = cfg.integrator.dt
        snapshot = [
            AgentState(
                id=b.agent.id,
                position=tuple(p + v * dt
                               for p, v in zip(b.agent.position, b.agent.velocity)),
                velocity=b.agent.velocity,
                safety_radius=b.agent.safety_radius,
                detection_radius=b.agent.detection_radius,
                v_max=b.agent.v_max,
            )
            for b in bodies
        ]
        index = SpatialHash(snapshot, cfg.aircraft.detection_radius) \
            if snapshot else None

        # regional occupancy drives the in-flight speed regulation
        occupancy: dict[RegionId, int] = {}
        body_region = []
        for body in bodies:
            rid = self.network.locate_clamped(body.agent.position)
            body_region.append(rid)
            occupancy[rid] = occupancy.get(rid, 0) + 1

        commands = []
        for i, body in enumerate(bodies):
            neighbors = orca.neighbor_set(snapshot, i, index)
            ghost = snapshot[i]
            constraints = orca.build_constraints(
                ghost, neighbors, cfg.avoidance.tau, cfg.integrator.dt)
            constraints.extend(self._closure_keepout(ghost, closed_now))
            if body.unreachable:
                v_pref = (0.0, 0.0, 0.0)
            else:
                v_pref = orca.preferred_velocity(ghost, body.target())
                region = self.network.regions[body_region[i]]
                cap = routeplan.regulated_speed(
                    occupancy[body_region[i]], region.n_cr, region.v_max_region)
                speed = math.hypot(*v_pref)
                if speed > cap > 0.0:
                    scale = cap / speed
                    v_pref = (v_pref[0] * scale, v_pref[1] * scale,
                              v_pref[2] * scale)
            v, feasible = orca.solve_closest(
                constraints, body.agent.v_max, v_pref)
            cmd = orca.VelocityCommand(v, feasible, constraints)
            commands.append(cmd)
            if cfg.verbose_orca:
                self._orca_trace.append(orca.constraints_as_json(
                    body.agent.id, state.clock, cmd.constraints))

        for body, cmd in zip(bodies, commands):
            flightdyn.step(body, cmd.velocity, cfg.integrator)
            if body.unreachable:
                body.phase = Phase.ENROUTE  # flagged aircraft hold, never retire

        state.clock += cfg.integrator.dt

        for body in bodies:
            aid = body.agent.id
            rid = self.network.locate_clamped(body.agent.position)
            if body.phase == Phase.ARRIVED:
                self.log.trips[aid].arrival_time = state.clock
                state.completed += 1
                del state.aircraft[aid]
            elif rid in closed_now:
                state.transit_exceptions += 1
            p, v = body.agent.position, body.agent.velocity
            self.log.records.append(Record(
                state.clock, aid, p[0], p[1], p[2], v[0], v[1], v[2],
                rid.layer, rid.q, rid.r,
                "arrived" if body.phase == Phase.ARRIVED else "enroute",
            ))

    def run(self) -> OutputBundle:
        cfg = self.config
        horizon = cfg.scenario.horizon
        while self.state.clock < horizon - 1e-9:
            self.tick()
        return self._outputs()

    # -- outputs ------------------------------------------------------------

    def _outputs(self) -> OutputBundle:
        cfg = self.config
        log = self.log
        summary: dict = {
            "config_hash": cfg.config_hash(),
            "seed": cfg.scenario.demand.seed,
            "mode": cfg.scenario.guidance_mode,
            "horizon": cfg.scenario.horizon,
            "spawned": self.state.spawned,
            "completed": self.state.completed,
            "active_at_horizon": len(self.state.aircraft),
            "flagged_unreachable": self.state.flagged,
            "transit_exceptions": self.state.transit_exceptions,
        }
        for name, func in (
            ("avg_min_separation_m", metrics.min_separation_stats),
            ("avg_travel_speed_mps", metrics.avg_travel_speed),
        ):
            try:
                summary[name] = func(log)
            except metrics.EmptyStatisticError:
                summary[name] = None
        try:
            summary["energy_kwh_per_trip"] = metrics.energy_per_trip(log)
        except metrics.EmptyStatisticError:
            summary["energy_kwh_per_trip"] = None
        summary["trip_completion_rate"] = metrics.trip_completion_rate(
            log, cfg.scenario.horizon) if cfg.scenario.horizon > 0 else 0.0

        mfd: list[metrics.MfdSample] = []
        fit = None
        if cfg.scenario.measurement_zone is not None and log.records:
            mfd = metrics.mfd_samples(log, cfg.scenario.measurement_zone,
                                      window=30.0)
            try:
                fit = metrics.fit_mfd(mfd)
            except metrics.FitFailureError:
                fit = None

        paths: dict[str, str] = {}
        if cfg.out_dir is not None:
            os.makedirs(cfg.out_dir, exist_ok=True)
            paths["trajectory"] = os.path.join(cfg.out_dir, "trajectory.csv")
            log.write_csv(paths["trajectory"])
            paths["metrics"] = os.path.join(cfg.out_dir, "metrics.json")
            with open(paths["metrics"], "w") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
            paths["mfd"] = os.path.join(cfg.out_dir, "mfd_samples.csv")
            metrics.samples_to_csv(mfd, paths["mfd"])
            if fit is not None:
                paths["fit"] = os.path.join(cfg.out_dir, "fit.json")
                metrics.fit_report_json(fit, paths["fit"])
            if cfg.verbose_orca:
                paths["orca_trace"] = os.path.join(cfg.out_dir, "orca_trace.jsonl")
                with open(paths["orca_trace"], "w") as fh:
                    for entry in self._orca_trace:
                        fh.write(json.dumps(entry) + "\n")
        return OutputBundle(log, summary, mfd, fit, paths)


def run(config: RunConfig) -> OutputBundle:
    return Engine(config).run()
