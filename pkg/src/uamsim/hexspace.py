"""Multi-layer hexagonal airspace network: geometry, localization, closures, routing graph.

Flat-top hexagons on axial (q, r) coordinates.  Cell centers are spaced
sqrt(3) * circumradius apart, so every horizontal routing edge has the same
weight.  Layers are horizontal altitude bands connected only through vertical
tubes at designated cells.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from shapely.geometry import Point, Polygon

SQRT3 = math.sqrt(3.0)

# Axial neighbor offsets for flat-top hexagons, in fixed scan order.
HEX_DIRECTIONS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


class RegionId(NamedTuple):
    layer: int
    q: int
    r: int


class InvalidGeometryError(ValueError):
    pass


class DanglingTubeError(ValueError):
    pass


class UnknownRegionError(KeyError):
    pass


class OutOfBoundsError(ValueError):
    pass


def axial_to_xy(q: int, r: int, circumradius: float) -> tuple[float, float]:
    x = 1.5 * circumradius * q
    y = SQRT3 * circumradius * (r + q / 2.0)
    return x, y


def xy_to_axial_frac(x: float, y: float, circumradius: float) -> tuple[float, float]:
    q = (2.0 / 3.0) * x / circumradius
    r = (-x / 3.0 + (SQRT3 / 3.0) * y) / circumradius
    return q, r


def axial_round(qf: float, rf: float) -> tuple[int, int]:
    # cube rounding: q + r + s = 0
    sf = -qf - rf
    q, r, s = round(qf), round(rf), round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)


def hex_corners(cx: float, cy: float, circumradius: float) -> list[tuple[float, float]]:
    """Corners of a flat-top hexagon centered at (cx, cy), counterclockwise."""
    return [
        (cx + circumradius * math.cos(k * math.pi / 3.0),
         cy + circumradius * math.sin(k * math.pi / 3.0))
        for k in range(6)
    ]


@dataclass
class HexRegion:
    id: RegionId
    centroid: tuple[float, float, float]
    circumradius: float
    n_cr: float
    v_max_region: float
    closed: bool = False
    subcells_open: list[bool] = field(default_factory=lambda: [True] * 6)

    def hexagon(self) -> Polygon:
        return Polygon(hex_corners(self.centroid[0], self.centroid[1], self.circumradius))

    def subcell_triangle(self, k: int) -> Polygon:
        """Triangular sub-cell k: apex at the centroid, base on corner edge k."""
        corners = hex_corners(self.centroid[0], self.centroid[1], self.circumradius)
        return Polygon([(self.centroid[0], self.centroid[1]),
                        corners[k], corners[(k + 1) % 6]])


class TubeLink(NamedTuple):
    lower: RegionId
    upper: RegionId


@dataclass
class AirspaceNetwork:
    layer_altitudes: list[float]
    circumradius: float
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    regions: dict[RegionId, HexRegion]
    tubes: list[TubeLink]
    # closure schedule: region -> list of [start, end] closed intervals (inclusive)
    closure_schedule: dict[RegionId, list[tuple[float, float]]] = field(default_factory=dict)

    def __post_init__(self):
        # layer band boundaries; a point exactly on a boundary belongs to the lower layer
        self._band_edges = [
            0.5 * (a + b)
            for a, b in zip(self.layer_altitudes, self.layer_altitudes[1:])
        ]
        self._tube_map: dict[RegionId, list[RegionId]] = {}
        for tube in self.tubes:
            self._tube_map.setdefault(tube.lower, []).append(tube.upper)
            self._tube_map.setdefault(tube.upper, []).append(tube.lower)

    # -- queries ------------------------------------------------------------

    def layer_of_altitude(self, z: float) -> int:
        return bisect.bisect_left(self._band_edges, z)

    def in_bounds(self, point: Sequence[float]) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= point[0] <= xmax and ymin <= point[1] <= ymax

    def locate(self, point: Sequence[float]) -> RegionId:
        """Region of the nearest cell center on the layer whose band contains the point."""
        if not self.in_bounds(point):
            raise OutOfBoundsError(f"point {tuple(point)} outside bounds {self.bounds}")
        layer = self.layer_of_altitude(point[2])
        qf, rf = xy_to_axial_frac(point[0], point[1], self.circumradius)
        q0, r0 = axial_round(qf, rf)
        best: Optional[RegionId] = None
        best_d = math.inf
        tol = 1e-9 * self.circumradius
        for dq, dr in ((0, 0),) + HEX_DIRECTIONS:
            rid = RegionId(layer, q0 + dq, r0 + dr)
            region = self.regions.get(rid)
            if region is None:
                continue
            d = math.hypot(point[0] - region.centroid[0], point[1] - region.centroid[1])
            if d < best_d - tol or (abs(d - best_d) <= tol and (best is None or rid < best)):
                best, best_d = rid, d
        if best is None:
            raise OutOfBoundsError(f"no region covers point {tuple(point)}")
        return best

    def clamp(self, point: Sequence[float]) -> tuple[float, float, float]:
        xmin, ymin, xmax, ymax = self.bounds
        return (min(max(point[0], xmin), xmax),
                min(max(point[1], ymin), ymax),
                point[2])

    def locate_clamped(self, point: Sequence[float]) -> RegionId:
        """locate() after clamping the horizontal coordinates into bounds.

        Avoidance maneuvers can push aircraft marginally outside the tiled
        area; localization then charges them to the nearest boundary cell.
        """
        return self.locate(self.clamp(point))

    def is_closed(self, rid: RegionId, at_time: Optional[float] = None) -> bool:
        region = self.regions[rid]
        if region.closed:
            return True
        if at_time is not None:
            for start, end in self.closure_schedule.get(rid, ()):
                if start <= at_time <= end:
                    return True
        return False

    def neighbors(self, rid: RegionId, at_time: Optional[float] = None) -> list[RegionId]:
        """Open horizontal neighbors plus tube-connected regions."""
        if rid not in self.regions:
            raise UnknownRegionError(rid)
        out = []
        for dq, dr in HEX_DIRECTIONS:
            nid = RegionId(rid.layer, rid.q + dq, rid.r + dr)
            if nid in self.regions and not self.is_closed(nid, at_time):
                out.append(nid)
        for nid in self._tube_map.get(rid, ()):
            if not self.is_closed(nid, at_time):
                out.append(nid)
        return out

    def routing_graph(self, at_time: Optional[float] = None) -> "WeightedGraph":
        graph = WeightedGraph()
        open_ids = [rid for rid in self.regions if not self.is_closed(rid, at_time)]
        for rid in open_ids:
            graph.add_node(rid)
        for rid in open_ids:
            c0 = self.regions[rid].centroid
            for nid in self.neighbors(rid, at_time):
                c1 = self.regions[nid].centroid
                w = math.dist(c0, c1)
                graph.add_edge(rid, nid, w)
        return graph

    def waypoint_for_region(self, rid: RegionId) -> tuple[float, float, float]:
        """Routing waypoint for a region.

        Normally the cell center; when some triangular sub-cells are closed the
        waypoint shifts to the area centroid of the open portion so planned
        trajectories stay clear of the closed sub-cells.
        """
        region = self.regions[rid]
        if all(region.subcells_open):
            return region.centroid
        open_tris = [region.subcell_triangle(k) for k in range(6) if region.subcells_open[k]]
        if not open_tris:
            return region.centroid
        union = open_tris[0]
        for tri in open_tris[1:]:
            union = union.union(tri)
        c = union.centroid
        return (c.x, c.y, region.centroid[2])

    # -- mutation (applied between ticks) -----------------------------------

    def add_closure(self, rid: RegionId, start: float, end: float) -> None:
        if rid not in self.regions:
            raise UnknownRegionError(rid)
        self.closure_schedule.setdefault(rid, []).append((start, end))

    def apply_polygon_nofly(self, polygon: Sequence[tuple[float, float]] | Polygon,
                            mode: str = "full-cell") -> "AirspaceNetwork":
        """Close regions (or their triangular sub-cells) intersecting a 2D polygon."""
        if not isinstance(polygon, Polygon):
            if len(polygon) < 3:
                raise InvalidGeometryError("polygon needs at least 3 vertices")
            polygon = Polygon(polygon)
        if not polygon.is_valid:
            raise InvalidGeometryError("polygon is degenerate or self-intersecting")
        if mode not in ("full-cell", "subcell"):
            raise ValueError(f"unknown no-fly mode {mode!r}")
        for region in self.regions.values():
            if not polygon.intersects(region.hexagon()):
                continue
            if mode == "full-cell":
                region.closed = True
            else:
                for k in range(6):
                    if polygon.intersects(region.subcell_triangle(k)) and \
                            polygon.intersection(region.subcell_triangle(k)).area > 0:
                        region.subcells_open[k] = False
                if not any(region.subcells_open):
                    region.closed = True
        return self

    # -- serialization -------------------------------------------------------

    def summary(self) -> dict:
        graph = self.routing_graph()
        return {
            "layers": list(self.layer_altitudes),
            "circumradius": self.circumradius,
            "bounds": list(self.bounds),
            "region_count": len(self.regions),
            "edge_count": sum(len(adj) for adj in graph.adj.values()),
            "closed_regions": sorted(
                list(rid) for rid, reg in self.regions.items() if reg.closed
            ),
            "scheduled_closures": sorted(
                [list(rid), s, e]
                for rid, spans in self.closure_schedule.items()
                for s, e in spans
            ),
            "tube_count": len(self.tubes),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


class WeightedGraph:
    """Directed graph over region ids, weights in meters."""

    def __init__(self):
        self.nodes: set[RegionId] = set()
        self.adj: dict[RegionId, dict[RegionId, float]] = {}

    def add_node(self, node: RegionId) -> None:
        self.nodes.add(node)
        self.adj.setdefault(node, {})

    def add_edge(self, a: RegionId, b: RegionId, weight: float) -> None:
        self.add_node(a)
        self.add_node(b)
        self.adj[a][b] = weight

    def remove_node(self, node: RegionId) -> None:
        self.nodes.discard(node)
        self.adj.pop(node, None)
        for nbrs in self.adj.values():
            nbrs.pop(node, None)

    def copy(self) -> "WeightedGraph":
        g = WeightedGraph()
        g.nodes = set(self.nodes)
        g.adj = {n: dict(nbrs) for n, nbrs in self.adj.items()}
        return g

    def shortest_path(self, src: RegionId, dst: RegionId) -> Optional[list[RegionId]]:
        """Dijkstra with deterministic lexicographic tie-breaking on region ids."""
        if src not in self.nodes or dst not in self.nodes:
            return None
        import heapq

        dist: dict[RegionId, float] = {src: 0.0}
        prev: dict[RegionId, RegionId] = {}
        heap: list[tuple[float, RegionId]] = [(0.0, src)]
        done: set[RegionId] = set()
        while heap:
            d, node = heapq.heappop(heap)
            if node in done:
                continue
            done.add(node)
            if node == dst:
                break
            for nbr, w in sorted(self.adj.get(node, {}).items()):
                nd = d + w
                if nd < dist.get(nbr, math.inf) - 1e-12 or (
                    abs(nd - dist.get(nbr, math.inf)) <= 1e-12 and node < prev.get(nbr, node)
                ):
                    dist[nbr] = nd
                    prev[nbr] = node
                    heapq.heappush(heap, (nd, nbr))
        if dst not in done:
            return None
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        path.reverse()
        return path

    def path_length(self, path: Sequence[RegionId]) -> float:
        return sum(self.adj[a][b] for a, b in zip(path, path[1:]))


def build_network(layer_altitudes: Sequence[float],
                  circumradius: float,
                  bounds: Sequence[float],
                  tubes: Iterable[tuple[int, int, int]] = (),
                  n_cr: float = 10.0,
                  v_max_region: float = 20.0) -> AirspaceNetwork:
    """Tile the bounds with hexagonal regions on every layer.

    ``tubes`` entries are (q, r, lower_layer); each connects the cell to the
    vertically aligned cell on lower_layer + 1.
    """
    if circumradius <= 0:
        raise InvalidGeometryError("circumradius must be positive")
    xmin, ymin, xmax, ymax = bounds
    if xmax <= xmin or ymax <= ymin:
        raise InvalidGeometryError("empty bounds")
    alts = list(layer_altitudes)
    if not alts or any(b <= a for a, b in zip(alts, alts[1:])):
        raise InvalidGeometryError("layer altitudes must be strictly increasing")

    # include every cell whose hexagon can overlap the bounds
    pad = circumradius
    qlo = math.floor(xy_to_axial_frac(xmin - pad, 0, circumradius)[0]) - 1
    qhi = math.ceil(xy_to_axial_frac(xmax + pad, 0, circumradius)[0]) + 1
    regions: dict[RegionId, HexRegion] = {}
    for layer, z in enumerate(alts):
        for q in range(qlo, qhi + 1):
            x = 1.5 * circumradius * q
            if x < xmin - pad or x > xmax + pad:
                continue
            rlo = math.floor((ymin - pad) / (SQRT3 * circumradius) - q / 2.0) - 1
            rhi = math.ceil((ymax + pad) / (SQRT3 * circumradius) - q / 2.0) + 1
            for r in range(rlo, rhi + 1):
                cx, cy = axial_to_xy(q, r, circumradius)
                if cx < xmin - pad or cx > xmax + pad or cy < ymin - pad or cy > ymax + pad:
                    continue
                rid = RegionId(layer, q, r)
                regions[rid] = HexRegion(
                    id=rid, centroid=(cx, cy, z), circumradius=circumradius,
                    n_cr=n_cr, v_max_region=v_max_region,
                )

    tube_links = []
    for q, r, lower_layer in tubes:
        lo = RegionId(lower_layer, q, r)
        hi = RegionId(lower_layer + 1, q, r)
        if lo not in regions or hi not in regions:
            raise DanglingTubeError(f"tube cell ({q}, {r}) layer {lower_layer} out of bounds")
        tube_links.append(TubeLink(lo, hi))

    return AirspaceNetwork(
        layer_altitudes=alts, circumradius=circumradius,
        bounds=(xmin, ymin, xmax, ymax), regions=regions, tubes=tube_links,
    )


def network_from_config(config: dict) -> AirspaceNetwork:
    """Build a network from a JSON-style configuration document."""
    net = build_network(
        layer_altitudes=config["layer_altitudes"],
        circumradius=config["circumradius"],
        bounds=config["bounds"],
        tubes=[tuple(t) for t in config.get("tubes", [])],
        n_cr=config.get("n_cr", 10.0),
        v_max_region=config.get("v_max_region", 20.0),
    )
    for entry in config.get("closures", []):
        rid = RegionId(*entry["region"])
        net.add_closure(rid, entry["start"], entry["end"])
    for entry in config.get("nofly_polygons", []):
        net.apply_polygon_nofly(entry["vertices"], mode=entry.get("mode", "full-cell"))
    return net
