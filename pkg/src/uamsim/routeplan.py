"""Centralized route guidance.

Candidate construction extracts region-disjoint shortest paths from the
routing graph.  Path costs couple through a sigmoid speed rule driven by
regional accumulation, evaluated either by synchronous trajectory prediction
or by a fast column-aligned matrix approximation.  Joint decisions are
searched exhaustively (oracle) or by sequential priority assignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .hexspace import AirspaceNetwork, RegionId, WeightedGraph

Vec3 = tuple[float, float, float]


class UnreachableDestinationError(ValueError):
    pass


class PredictionBudgetError(RuntimeError):
    pass


class SearchBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class Path:
    """Waypoint route: origin, pass-by region centers, destination.

    For planner-built paths len(waypoints) == len(pass_by) + 2.  Paths from
    direct_path() keep two waypoints and record the traversed regions in
    pass_by for metrics, so the equality does not hold there.
    """
    waypoints: tuple[Vec3, ...]
    pass_by: tuple[RegionId, ...]
    graph_length: float = 0.0

    @property
    def origin(self) -> Vec3:
        return self.waypoints[0]

    @property
    def destination(self) -> Vec3:
        return self.waypoints[-1]

    def od_distance(self) -> float:
        return math.dist(self.origin, self.destination)


@dataclass
class CandidateSet:
    owner: int
    paths: list[Path]


@dataclass
class JointDecision:
    selection: list[Path]


@dataclass
class PlannerConfig:
    prediction_step: float = 1.0   # seconds
    arrival_epsilon: float = 10.0  # meters
    region_leg_length: Optional[float] = None  # meters; None -> sqrt(3) * circumradius
    max_candidates: int = 6
    exhaustive_budget: int = 2_000_000

    def __post_init__(self):
        if self.prediction_step <= 0 or self.arrival_epsilon <= 0:
            raise ValueError("prediction_step and arrival_epsilon must be positive")
        if self.region_leg_length is not None and self.region_leg_length <= 0:
            raise ValueError("region_leg_length must be positive")

    def leg_length(self, network: AirspaceNetwork) -> float:
        if self.region_leg_length is not None:
            return self.region_leg_length
        return math.sqrt(3.0) * network.circumradius


@dataclass
class PlanResult:
    decision: JointDecision
    cost: float
    evaluations: int


def regulated_speed(n_in_region: float, n_cr: float, v_max_region: float) -> float:
    """Sigmoid congestion speed rule: v_max at low occupancy, v_max/2 at n_cr."""
    x = n_in_region - n_cr
    if x >= 0.0:
        e = math.exp(-x)
        return v_max_region * e / (1.0 + e)
    return v_max_region / (1.0 + math.exp(x))


def candidate_paths(graph: WeightedGraph, origin: Vec3, dest: Vec3,
                    network: AirspaceNetwork, owner: int = 0,
                    max_candidates: int = 6) -> CandidateSet:
    """Iteratively extract region-disjoint shortest waypoint paths.

    After each extraction the intermediate regions are removed from the working
    graph, so candidates never share a pass-by region.  Raises if the
    destination region is unreachable from the origin region.
    """
    r_o = network.locate_clamped(origin)
    r_d = network.locate_clamped(dest)
    if r_o == r_d:
        return CandidateSet(owner, [Path((origin, dest), (), math.dist(origin, dest))])
    escape = None
    if r_o not in graph.nodes:
        # origin region closed under the aircraft (e.g. a no-fly zone just
        # activated): route out through the nearest open region
        if not graph.nodes:
            raise UnreachableDestinationError("no open regions")
        escape = min(
            graph.nodes,
            key=lambda rid: (math.dist(network.regions[rid].centroid, origin), rid),
        )
        r_o = escape
    if r_d not in graph.nodes:
        raise UnreachableDestinationError(f"destination region {r_d} is closed")

    work = graph.copy()
    paths: list[Path] = []
    while len(paths) < max_candidates:
        sp = work.shortest_path(r_o, r_d)
        if sp is None:
            break
        intermediates = sp[:-1] if escape is not None else sp[1:-1]
        waypoints = (origin,) + tuple(
            network.waypoint_for_region(rid) for rid in intermediates
        ) + (dest,)
        paths.append(Path(waypoints, tuple(intermediates), work.path_length(sp)))
        if not intermediates:
            break  # nothing to remove; further extraction repeats the same path
        for rid in intermediates:
            work.remove_node(rid)
    if not paths:
        raise UnreachableDestinationError(f"no path from {r_o} to {r_d}")
    return CandidateSet(owner, paths)


def direct_path(origin: Vec3, dest: Vec3, network: AirspaceNetwork,
                sample_spacing: Optional[float] = None) -> Path:
    """Two-waypoint direct route; pass_by lists regions the segment traverses."""
    if math.dist(origin, dest) == 0.0:
        return Path((origin, dest), (), 0.0)
    spacing = sample_spacing or network.circumradius / 4.0
    length = math.dist(origin, dest)
    n = max(1, math.ceil(length / spacing))
    regions: list[RegionId] = []
    for k in range(n + 1):
        t = k / n
        p = tuple(o + t * (d - o) for o, d in zip(origin, dest))
        try:
            rid = network.locate(p)
        except Exception:
            continue
        if not regions or regions[-1] != rid:
            regions.append(rid)
    return Path((origin, dest), tuple(regions), length)


def predict_trajectories(decision: JointDecision, config: PlannerConfig,
                         network: AirspaceNetwork) -> list[list[tuple[float, Vec3]]]:
    """Synchronous point-particle stepping of all aircraft along their paths.

    Each step recomputes regional accumulations from the predicted positions,
    moves every active aircraft toward its target waypoint at the regulated
    speed of its current region, and retires aircraft within arrival_epsilon
    of their destinations.
    """
    dt = config.prediction_step
    eps = config.arrival_epsilon
    n = len(decision.selection)
    pos: list[Vec3] = [p.origin for p in decision.selection]
    target_idx = [1] * n
    active = set(range(n))
    trajectories: list[list[tuple[float, Vec3]]] = [[(0.0, pos[i])] for i in range(n)]

    # termination guard scaled by worst-case congested speed
    total_len = sum(
        sum(math.dist(a, b) for a, b in zip(p.waypoints, p.waypoints[1:]))
        for p in decision.selection
    )
    v_floor = min(
        regulated_speed(2.0 * reg.n_cr, reg.n_cr, reg.v_max_region)
        for reg in network.regions.values()
    )
    max_steps = max(10, math.ceil(10.0 * (total_len / max(v_floor, 1e-9)) / dt))

    t = 0.0
    steps = 0
    while active:
        steps += 1
        if steps > max_steps:
            raise PredictionBudgetError(
                f"prediction exceeded {max_steps} steps; aircraft {sorted(active)} unfinished"
            )
        counts: dict[RegionId, int] = {}
        where: dict[int, RegionId] = {}
        for i in active:
            rid = network.locate_clamped(pos[i])
            where[i] = rid
            counts[rid] = counts.get(rid, 0) + 1
        t += dt
        for i in sorted(active):
            path = decision.selection[i]
            if math.dist(pos[i], path.destination) <= eps:
                active.discard(i)
                continue
            rid = where[i]
            region = network.regions[rid]
            speed = regulated_speed(counts[rid], region.n_cr, region.v_max_region)
            budget = speed * dt
            p = pos[i]
            while budget > 0.0:
                tgt = path.waypoints[target_idx[i]]
                d = math.dist(p, tgt)
                if d <= budget:
                    p = tgt
                    budget -= d
                    if target_idx[i] == len(path.waypoints) - 1:
                        break
                    target_idx[i] += 1
                else:
                    p = tuple(a + (budget / d) * (b - a) for a, b in zip(p, tgt))
                    budget = 0.0
            pos[i] = p
            trajectories[i].append((t, p))
            if math.dist(p, path.destination) <= eps:
                active.discard(i)
    return trajectories


def path_cost(trajectory: Sequence[tuple[float, Vec3]], origin: Vec3, dest: Vec3) -> float:
    """Travel time: time of closest approach to dest minus that to origin."""
    t_orig = min(trajectory, key=lambda s: math.dist(s[1], origin))[0]
    t_dest = min(trajectory, key=lambda s: math.dist(s[1], dest))[0]
    return t_dest - t_orig


def fast_joint_cost(decision: JointDecision, config: PlannerConfig,
                    network: AirspaceNetwork) -> float:
    """Column-aligned matrix estimate of the total travel cost.

    Rows are aircraft pass-by sequences padded to the longest one; occupancy
    is counted per region within each column, converted to a regulated speed,
    and charged one region leg length per entry.
    """
    rows = [p.pass_by for p in decision.selection]
    if not rows:
        return 0.0
    leg = config.leg_length(network)
    m = max((len(r) for r in rows), default=0)
    total = 0.0
    for j in range(m):
        counts: dict[RegionId, int] = {}
        for row in rows:
            if j < len(row):
                rid = row[j]
                counts[rid] = counts.get(rid, 0) + 1
        for rid, n in counts.items():
            region = network.regions[rid]
            total += n * leg / regulated_speed(n, region.n_cr, region.v_max_region)
    return total


def approx_optimal_paths(candidates: list[CandidateSet], config: PlannerConfig,
                         network: AirspaceNetwork) -> PlanResult:
    """Sequential priority search over candidate sets.

    Aircraft are ordered by origin-destination distance ascending; the first
    keeps its shortest candidate, each later one exhaustively scans its own
    candidates against the fixed prefix.  Performs sum(|candidates_i|) -
    |candidates_1| + 1 cost evaluations.
    """
    for cs in candidates:
        if not cs.paths:
            raise UnreachableDestinationError(f"empty candidate set for aircraft {cs.owner}")
    order = sorted(range(len(candidates)),
                   key=lambda i: (candidates[i].paths[0].od_distance(), i))
    evaluations = 0
    chosen: list[Path] = []
    for rank, idx in enumerate(order):
        cs = candidates[idx]
        if rank == 0:
            # shortest graph-length candidate; extraction order is shortest-first
            chosen.append(cs.paths[0])
            fast_joint_cost(JointDecision(chosen), config, network)
            evaluations += 1
            continue
        best_path = None
        best_cost = math.inf
        for path in cs.paths:
            cost = fast_joint_cost(JointDecision(chosen + [path]), config, network)
            evaluations += 1
            if cost < best_cost:
                best_cost = cost
                best_path = path
        chosen.append(best_path)
    selection: list[Optional[Path]] = [None] * len(candidates)
    for rank, idx in enumerate(order):
        selection[idx] = chosen[rank]
    decision = JointDecision(selection)  # type: ignore[arg-type]
    return PlanResult(decision, fast_joint_cost(decision, config, network), evaluations)


def exhaustive_optimal_paths(candidates: list[CandidateSet], config: PlannerConfig,
                             network: AirspaceNetwork) -> PlanResult:
    """Global minimizer over the full Cartesian product of candidate sets.

    Ties resolve to the lexicographically smallest candidate-index tuple.
    """
    for cs in candidates:
        if not cs.paths:
            raise UnreachableDestinationError(f"empty candidate set for aircraft {cs.owner}")
    size = 1
    for cs in candidates:
        size *= len(cs.paths)
    if size > config.exhaustive_budget:
        raise SearchBudgetError(f"joint search space {size} exceeds budget "
                                f"{config.exhaustive_budget}")
    best: Optional[tuple[Path, ...]] = None
    best_cost = math.inf
    evaluations = 0
    for combo in itertools.product(*(cs.paths for cs in candidates)):
        cost = fast_joint_cost(JointDecision(list(combo)), config, network)
        evaluations += 1
        if cost < best_cost:
            best_cost = cost
            best = combo
    return PlanResult(JointDecision(list(best)), best_cost, evaluations)


def decision_to_json(decision: JointDecision) -> list[dict]:
    return [
        {
            "waypoints": [list(w) for w in p.waypoints],
            "pass_by": [list(r) for r in p.pass_by],
            "graph_length": p.graph_length,
        }
        for p in decision.selection
    ]
