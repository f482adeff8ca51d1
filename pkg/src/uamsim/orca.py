"""Distributed reciprocal collision avoidance in 3D velocity space.

Each neighbor within detection range induces a half-space constraint built
from the truncated-cone velocity obstacle; the command is the feasible
velocity closest to the preferred velocity, found by exact incremental
projection.  When the constraint intersection is empty the solver falls back
to minimizing the largest constraint violation inside the speed ball.

Vector math uses plain tuples: this code runs per aircraft per tick and
tuple arithmetic is considerably faster than small numpy arrays here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

Vec3 = tuple[float, float, float]

_EPS = 1e-10


def _sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def _dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


def _norm_sq(a: Vec3) -> float:
    return a[0] * a[0] + a[1] * a[1] + a[2] * a[2]


def _norm(a: Vec3) -> float:
    return math.sqrt(_norm_sq(a))


def _unit(a: Vec3) -> Vec3:
    n = _norm(a)
    return (a[0] / n, a[1] / n, a[2] / n)


@dataclass
class AgentState:
    id: int
    position: Vec3
    velocity: Vec3
    safety_radius: float = 50.0
    detection_radius: float = 200.0
    v_max: float = 20.0

    def __post_init__(self):
        if not (0.0 < self.safety_radius < self.detection_radius):
            raise ValueError("require 0 < safety_radius < detection_radius")


@dataclass(frozen=True)
class VelocityObstacleCone:
    relative_position: Vec3
    combined_radius: float
    horizon: float


@dataclass(frozen=True)
class HalfSpaceConstraint:
    point: Vec3
    normal: Vec3  # unit vector; feasible side satisfies (v - point) . normal >= 0

    def satisfied(self, v: Vec3, tol: float = 0.0) -> bool:
        return _dot(_sub(v, self.point), self.normal) >= -tol

    def violation(self, v: Vec3) -> float:
        return _dot(_sub(self.point, v), self.normal)


@dataclass
class SafeSet:
    constraints: list[HalfSpaceConstraint]
    speed_bound: float

    def contains(self, v: Vec3, tol: float = 1e-9) -> bool:
        if _norm(v) > self.speed_bound + tol:
            return False
        return all(c.satisfied(v, tol) for c in self.constraints)


@dataclass
class VelocityCommand:
    velocity: Vec3
    feasible: bool
    constraints: list[HalfSpaceConstraint] = field(default_factory=list)


def preferred_velocity(state: AgentState, target: Vec3) -> Vec3:
    """Maximum-speed velocity aimed at the target waypoint."""
    offset = _sub(target, state.position)
    d = _norm(offset)
    if d == 0.0:
        return (0.0, 0.0, 0.0)
    return _scale(offset, state.v_max / d)


def vo_contains(cone: VelocityObstacleCone, v_rel: Vec3) -> bool:
    """True iff holding v_rel collides within the horizon.

    Closest-approach test of the segment {v_rel * t : t in (0, horizon]} to
    the disc center at relative_position.
    """
    p = cone.relative_position
    vv = _norm_sq(v_rel)
    if vv <= _EPS:
        return _norm(p) < cone.combined_radius
    t = _dot(v_rel, p) / vv
    t = min(max(t, 0.0), cone.horizon)
    if t <= 0.0:
        return _norm(p) < cone.combined_radius
    closest = _sub(_scale(v_rel, t), p)
    return _norm(closest) < cone.combined_radius


def escape_vector(cone: VelocityObstacleCone, v_rel: Vec3) -> Vec3:
    """Minimal relative-velocity change moving v_rel to the obstacle boundary.

    Chooses between the truncation sphere (center relative_position / horizon)
    and the tangent cone surface, whichever boundary point is nearer.  Returns
    the zero vector when v_rel is already outside the obstacle.
    """
    if not vo_contains(cone, v_rel):
        return (0.0, 0.0, 0.0)
    u, _ = _boundary_adjustment(cone, v_rel)
    return u


def _boundary_adjustment(cone: VelocityObstacleCone,
                         v_rel: Vec3) -> tuple[Vec3, Vec3]:
    """Signed adjustment to the obstacle boundary and its outward normal.

    Unlike escape_vector this projects from either side: for v_rel outside
    the obstacle the adjustment points toward the boundary (negative along
    the normal), which still yields a valid separating plane.
    """
    p = cone.relative_position
    inv_tau = 1.0 / cone.horizon
    w = _sub(v_rel, _scale(p, inv_tau))
    w_len_sq = _norm_sq(w)
    dot_wp = _dot(w, p)
    r_sq = cone.combined_radius * cone.combined_radius

    if w_len_sq <= _EPS:
        # exactly at the truncation-sphere center: push toward the apex
        unit_w = _scale(p, -1.0 / _norm(p))
        return _scale(unit_w, cone.combined_radius * inv_tau), unit_w

    if dot_wp < 0.0 and dot_wp * dot_wp > r_sq * w_len_sq:
        # nearest boundary lies on the truncation sphere
        w_len = math.sqrt(w_len_sq)
        unit_w = _scale(w, 1.0 / w_len)
        return _scale(unit_w, cone.combined_radius * inv_tau - w_len), unit_w

    # nearest boundary lies on the tangent cone surface
    dist_sq = _norm_sq(p)
    a = dist_sq
    b = _dot(p, v_rel)
    c = _norm_sq(v_rel) - _norm_sq(_cross(p, v_rel)) / (dist_sq - r_sq)
    t = (b + math.sqrt(max(b * b - a * c, 0.0))) / a
    ww = _sub(v_rel, _scale(p, t))
    ww_len = _norm(ww)
    if ww_len <= _EPS:
        unit_ww = _scale(p, -1.0 / math.sqrt(dist_sq))
    else:
        unit_ww = _scale(ww, 1.0 / ww_len)
    return _scale(unit_ww, cone.combined_radius * t - ww_len), unit_ww


def separation_constraint(p_i: Vec3, p_j: Vec3, v_i: Vec3, v_j: Vec3,
                          combined_radius: float, dt: float,
                          id_i: int = 0, id_j: int = 1) -> HalfSpaceConstraint:
    """Constraint for agents already closer than the combined radius.

    Built from the minimal relative-velocity change that restores separation
    by the end of one time step; the normal points from the intruder toward
    the constrained agent.
    """
    offset = _sub(p_i, p_j)
    dist = _norm(offset)
    if dist <= _EPS:
        # coincident positions: fixed axis keyed by id ordering
        normal = (1.0, 0.0, 0.0) if id_i < id_j else (-1.0, 0.0, 0.0)
    else:
        normal = _scale(offset, 1.0 / dist)
    v_rel = _sub(v_i, v_j)
    required = (combined_radius - dist) / dt
    deficit = required - _dot(v_rel, normal)
    u = _scale(normal, max(deficit, 0.0))
    return HalfSpaceConstraint(point=_add(v_i, _scale(u, 0.5)), normal=normal)


def orca_halfspace(v_i: Vec3, v_j: Vec3,
                   cone: VelocityObstacleCone) -> Optional[HalfSpaceConstraint]:
    """Half-space of velocities honoring half of the escape adjustment."""
    v_rel = _sub(v_i, v_j)
    if not vo_contains(cone, v_rel):
        return None
    u = escape_vector(cone, v_rel)
    return HalfSpaceConstraint(point=_add(v_i, _scale(u, 0.5)), normal=_unit(u))


def orca_plane(v_i: Vec3, v_j: Vec3,
               cone: VelocityObstacleCone) -> HalfSpaceConstraint:
    """Always-on variant of orca_halfspace used by the per-tick solver.

    Gating the plane on membership in the obstacle makes paired agents
    oscillate: one evasive step leaves the obstacle, the next step reverts to
    the preferred velocity and dives back in.  Projecting onto the boundary
    from either side keeps the constraint active through the encounter.
    """
    v_rel = _sub(v_i, v_j)
    u, normal = _boundary_adjustment(cone, v_rel)
    return HalfSpaceConstraint(point=_add(v_i, _scale(u, 0.5)), normal=normal)


class SpatialHash:
    """Uniform-grid broad phase for detection-radius neighbor queries."""

    def __init__(self, agents: Sequence[AgentState], cell_size: float):
        self.cell_size = cell_size
        self.cells: dict[tuple[int, int, int], list[AgentState]] = {}
        for agent in agents:
            self.cells.setdefault(self._key(agent.position), []).append(agent)

    def _key(self, p: Vec3) -> tuple[int, int, int]:
        s = self.cell_size
        return (math.floor(p[0] / s), math.floor(p[1] / s), math.floor(p[2] / s))

    def within(self, center: Vec3, radius: float, exclude_id: int) -> list[AgentState]:
        kx, ky, kz = self._key(center)
        reach = math.ceil(radius / self.cell_size)
        out = []
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                for dz in range(-reach, reach + 1):
                    for agent in self.cells.get((kx + dx, ky + dy, kz + dz), ()):
                        if agent.id != exclude_id and \
                                math.dist(agent.position, center) <= radius:
                            out.append(agent)
        out.sort(key=lambda a: a.id)
        return out


def neighbor_set(all_agents: Sequence[AgentState], i: int,
                 index: Optional[SpatialHash] = None) -> list[AgentState]:
    """Agents within the detection radius of agent index i, ordered by id."""
    me = all_agents[i]
    if index is None:
        index = SpatialHash(all_agents, me.detection_radius)
    return index.within(me.position, me.detection_radius, me.id)


def build_constraints(state: AgentState, neighbors: Sequence[AgentState],
                      tau: float, dt: float = 1.0) -> list[HalfSpaceConstraint]:
    constraints = []
    for other in sorted(neighbors, key=lambda a: a.id):
        rel = _sub(other.position, state.position)
        combined = state.safety_radius + other.safety_radius
        if _norm(rel) < combined:
            constraints.append(separation_constraint(
                state.position, other.position, state.velocity, other.velocity,
                combined, dt, state.id, other.id))
            continue
        cone = VelocityObstacleCone(rel, combined, tau)
        constraints.append(orca_plane(state.velocity, other.velocity, cone))
    return constraints


def safe_velocity_command(state: AgentState, neighbors: Sequence[AgentState],
                          target: Vec3, tau: float, dt: float = 1.0) -> VelocityCommand:
    """Velocity inside the safe set closest to the preferred velocity."""
    v_pref = preferred_velocity(state, target)
    constraints = build_constraints(state, neighbors, tau, dt)
    v, feasible = solve_closest(constraints, state.v_max, v_pref)
    return VelocityCommand(velocity=v, feasible=feasible, constraints=constraints)


# -- exact incremental projection solver -------------------------------------
#
# Minimizes ||v - v_opt|| over the intersection of half-spaces and the speed
# ball by processing constraints one at a time: whenever the current optimum
# violates a new half-space, the optimum is re-sought on that boundary plane,
# recursing onto plane-plane intersection lines as earlier constraints bind.

def _program_line(planes: list[HalfSpaceConstraint], count: int,
                  line_point: Vec3, line_dir: Vec3, radius: float,
                  v_opt: Vec3, direction_opt: bool) -> Optional[Vec3]:
    dot = _dot(line_point, line_dir)
    discr = dot * dot + radius * radius - _norm_sq(line_point)
    if discr < 0.0:
        return None
    sq = math.sqrt(discr)
    t_left = -dot - sq
    t_right = -dot + sq
    for plane in planes[:count]:
        num = _dot(_sub(plane.point, line_point), plane.normal)
        den = _dot(line_dir, plane.normal)
        if den * den <= _EPS:
            if num > 0.0:
                return None
            continue
        t = num / den
        if den >= 0.0:
            t_left = max(t_left, t)
        else:
            t_right = min(t_right, t)
        if t_left > t_right:
            return None
    if direction_opt:
        t = t_right if _dot(v_opt, line_dir) > 0.0 else t_left
    else:
        t = min(max(_dot(_sub(v_opt, line_point), line_dir), t_left), t_right)
    return _add(line_point, _scale(line_dir, t))


def _program_plane(planes: list[HalfSpaceConstraint], index: int, radius: float,
                   v_opt: Vec3, direction_opt: bool) -> Optional[Vec3]:
    plane = planes[index]
    plane_dist = _dot(plane.point, plane.normal)
    radius_sq = radius * radius
    if plane_dist * plane_dist > radius_sq:
        return None  # boundary plane misses the speed ball entirely
    plane_radius_sq = radius_sq - plane_dist * plane_dist
    plane_center = _scale(plane.normal, plane_dist)
    if direction_opt:
        tangential = _sub(v_opt, _scale(plane.normal, _dot(v_opt, plane.normal)))
        t_len_sq = _norm_sq(tangential)
        if t_len_sq <= _EPS:
            result = plane_center
        else:
            result = _add(plane_center,
                          _scale(tangential, math.sqrt(plane_radius_sq / t_len_sq)))
    else:
        result = _add(v_opt, _scale(plane.normal,
                                    _dot(_sub(plane.point, v_opt), plane.normal)))
        if _norm_sq(result) > radius_sq:
            offset = _sub(result, plane_center)
            result = _add(plane_center,
                          _scale(offset, math.sqrt(plane_radius_sq / _norm_sq(offset))))
    for i in range(index):
        if _dot(_sub(planes[i].point, result), planes[i].normal) > 0.0:
            crossp = _cross(planes[i].normal, plane.normal)
            if _norm_sq(crossp) <= _EPS:
                return None
            line_dir = _unit(crossp)
            line_normal = _cross(line_dir, plane.normal)
            num = _dot(_sub(planes[i].point, plane.point), planes[i].normal)
            den = _dot(line_normal, planes[i].normal)
            line_point = _add(plane.point, _scale(line_normal, num / den))
            result = _program_line(planes, i, line_point, line_dir, radius,
                                   v_opt, direction_opt)
            if result is None:
                return None
    return result


def _program_halfspaces(planes: list[HalfSpaceConstraint], radius: float,
                        v_opt: Vec3, direction_opt: bool) -> tuple[Vec3, int]:
    """Returns (solution, index of first infeasible plane or len(planes))."""
    if direction_opt:
        result = _scale(v_opt, radius)  # v_opt is a unit direction here
    elif _norm_sq(v_opt) > radius * radius:
        result = _scale(_unit(v_opt), radius)
    else:
        result = v_opt
    for index, plane in enumerate(planes):
        if _dot(_sub(plane.point, result), plane.normal) > 0.0:
            new_result = _program_plane(planes, index, radius, v_opt, direction_opt)
            if new_result is None:
                return result, index
            result = new_result
    return result, len(planes)


def _program_least_violation(planes: list[HalfSpaceConstraint], begin: int,
                             radius: float, result: Vec3) -> Vec3:
    """Infeasible fallback: minimize the largest half-space violation."""
    distance = 0.0
    for index in range(begin, len(planes)):
        plane = planes[index]
        if _dot(_sub(plane.point, result), plane.normal) > distance:
            proj_planes: list[HalfSpaceConstraint] = []
            for j in range(index):
                other = planes[j]
                crossp = _cross(other.normal, plane.normal)
                if _norm_sq(crossp) <= _EPS:
                    if _dot(plane.normal, other.normal) > 0.0:
                        continue
                    point = _scale(_add(plane.point, other.point), 0.5)
                else:
                    line_normal = _cross(crossp, plane.normal)
                    num = _dot(_sub(other.point, plane.point), other.normal)
                    den = _dot(line_normal, other.normal)
                    point = _add(plane.point, _scale(line_normal, num / den))
                diff = _sub(other.normal, plane.normal)
                proj_planes.append(HalfSpaceConstraint(point, _unit(diff)))
            new_result, fail = _program_halfspaces(proj_planes, radius,
                                                   plane.normal, True)
            if fail >= len(proj_planes):
                result = new_result
            distance = _dot(_sub(plane.point, result), plane.normal)
    return result


def solve_closest(constraints: list[HalfSpaceConstraint], v_max: float,
                  v_pref: Vec3) -> tuple[Vec3, bool]:
    """Closest point to v_pref in the constraint intersection within the speed ball."""
    if v_max <= 0.0:
        return (0.0, 0.0, 0.0), True
    result, fail = _program_halfspaces(constraints, v_max, v_pref, False)
    if fail < len(constraints):
        result = _program_least_violation(constraints, fail, v_max, result)
        return result, False
    return result, True


def constraints_as_json(agent_id: int, t: float,
                        constraints: Sequence[HalfSpaceConstraint]) -> dict:
    return {
        "t": t,
        "id": agent_id,
        "constraints": [
            {"point": list(c.point), "normal": list(c.normal)} for c in constraints
        ],
    }
