"""Demand generation and canonical corridor-intersection scenarios.

All randomness flows from explicit seeds through numpy generators, so every
scenario artifact is a pure function of (spec, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .hexspace import AirspaceNetwork, build_network

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Zone:
    """Axis-aligned 3D box used for spawn placement."""
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    zmin: float
    zmax: float

    def sample(self, rng: np.random.Generator) -> Vec3:
        return (float(rng.uniform(self.xmin, self.xmax)),
                float(rng.uniform(self.ymin, self.ymax)),
                float(rng.uniform(self.zmin, self.zmax)) if self.zmax > self.zmin
                else self.zmin)


@dataclass
class Flow:
    origin_zone: Zone
    dest_zone: Zone
    # piecewise-constant rate: list of (start_time, rate aircraft/s); each rate
    # holds from its start time until the next breakpoint (or the horizon)
    rate_profile: list[tuple[float, float]]

    def __post_init__(self):
        times = [t for t, _ in self.rate_profile]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("rate profile breakpoints must be strictly increasing")
        if any(r < 0 for _, r in self.rate_profile):
            raise ValueError("rates must be nonnegative")


@dataclass
class DemandSpec:
    flows: list[Flow]
    seed: int = 0


@dataclass(frozen=True)
class SpawnEvent:
    time: float
    origin: Vec3
    destination: Vec3


@dataclass
class ScenarioConfig:
    name: str
    network: AirspaceNetwork
    demand: DemandSpec
    horizon: float
    guidance_mode: str = "proposed"  # proposed | baseline
    measurement_zone: Optional[tuple[float, float, float]] = None  # (cx, cy, radius)
    closures: list[tuple[tuple[int, int, int], float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.guidance_mode not in ("proposed", "baseline"):
            raise ValueError(f"unknown guidance mode {self.guidance_mode!r}")


def generate_demand(spec: DemandSpec, horizon: float) -> list[SpawnEvent]:
    """Poisson arrivals per flow at the piecewise-constant profile rate."""
    events: list[SpawnEvent] = []
    for flow_index, flow in enumerate(spec.flows):
        rng = np.random.default_rng([spec.seed, flow_index])
        profile = flow.rate_profile
        for seg, (start, rate) in enumerate(profile):
            end = profile[seg + 1][0] if seg + 1 < len(profile) else horizon
            end = min(end, horizon)
            if rate <= 0 or end <= start:
                continue
            t = start
            while True:
                t += float(rng.exponential(1.0 / rate))
                if t >= end:
                    break
                origin = flow.origin_zone.sample(rng)
                dest = flow.dest_zone.sample(rng)
                if origin == dest:
                    continue
                events.append(SpawnEvent(t, origin, dest))
    events.sort(key=lambda e: (e.time, e.origin, e.destination))
    return events


def baseline_guidance(event: SpawnEvent, network: AirspaceNetwork):
    """Direct two-waypoint route; the corridor constraint is advisory only."""
    from .routeplan import direct_path

    return direct_path(event.origin, event.destination, network)


def _endpoint_zone(cx: float, cy: float, half: float, zlo: float, zhi: float) -> Zone:
    return Zone(cx - half, cy - half, cx + half, cy + half, zlo, zhi)


ALTITUDE_BANDS = {
    "2D": (500.0, 500.0),
    "3D-thin": (450.0, 550.0),
    "3D-thick": (400.0, 600.0),
}


def corridor_scenario(kind: str = "plus",
                      altitude_mode: str = "2D",
                      rate: float = 0.05,
                      horizon: float = 3000.0,
                      seed: int = 0,
                      guidance_mode: str = "proposed",
                      rate_profile: Optional[list[tuple[float, float]]] = None,
                      circumradius: float = 250.0,
                      n_cr: float = 10.0) -> ScenarioConfig:
    """Corridor-intersection presets.

    "plus": two orthogonal corridors; "hash": two oblique corridors; "star":
    three corridors.  Opposing directions of each corridor carry equal rate
    profiles.  The measurement circle sits at the common intersection.
    """
    if kind not in ("plus", "hash", "star"):
        raise ValueError(f"unknown scenario kind {kind!r}")
    zlo, zhi = ALTITUDE_BANDS[altitude_mode]
    extent = 4000.0
    cx = cy = extent / 2.0
    network = build_network(
        layer_altitudes=[500.0], circumradius=circumradius,
        bounds=(0.0, 0.0, extent, extent), n_cr=n_cr, v_max_region=20.0,
    )

    margin = 400.0
    half = 250.0
    reach = extent / 2.0 - margin
    if kind == "plus":
        angles = [0.0, 90.0]
    elif kind == "hash":
        angles = [45.0, 135.0]
    else:
        angles = [0.0, 60.0, 120.0]

    profile = rate_profile if rate_profile is not None else [(0.0, rate)]
    flows: list[Flow] = []
    for ang in angles:
        a = math.radians(ang)
        end_a = _endpoint_zone(cx + reach * math.cos(a), cy + reach * math.sin(a),
                               half, zlo, zhi)
        end_b = _endpoint_zone(cx - reach * math.cos(a), cy - reach * math.sin(a),
                               half, zlo, zhi)
        flows.append(Flow(end_a, end_b, list(profile)))
        flows.append(Flow(end_b, end_a, list(profile)))

    return ScenarioConfig(
        name=f"{kind}-{altitude_mode}",
        network=network,
        demand=DemandSpec(flows=flows, seed=seed),
        horizon=horizon,
        guidance_mode=guidance_mode,
        measurement_zone=(cx, cy, 2.0 * circumradius),
    )


def two_layer_scenario(rate: float = 0.05,
                       horizon: float = 3000.0,
                       seed: int = 0,
                       guidance_mode: str = "proposed",
                       circumradius: float = 250.0,
                       n_cr: float = 10.0) -> ScenarioConfig:
    """Two layers joined by two vertical tubes; demand confined to the lower layer."""
    extent = 4000.0
    network = build_network(
        layer_altitudes=[400.0, 600.0], circumradius=circumradius,
        bounds=(0.0, 0.0, extent, extent),
        tubes=[(3, 1, 0), (7, -1, 0)],
        n_cr=n_cr, v_max_region=20.0,
    )
    zlo = zhi = 400.0
    west = _endpoint_zone(600.0, extent / 2.0, 250.0, zlo, zhi)
    east = _endpoint_zone(extent - 600.0, extent / 2.0, 250.0, zlo, zhi)
    flows = [
        Flow(west, east, [(0.0, rate)]),
        Flow(east, west, [(0.0, rate)]),
    ]
    return ScenarioConfig(
        name="two-layer",
        network=network,
        demand=DemandSpec(flows=flows, seed=seed),
        horizon=horizon,
        guidance_mode=guidance_mode,
        measurement_zone=(extent / 2.0, extent / 2.0, 2.0 * circumradius),
    )
