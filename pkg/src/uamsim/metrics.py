"""Trajectory-derived performance indices, MFD sampling, and flow-curve fitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize


class EmptyStatisticError(ValueError):
    pass


class FitFailureError(RuntimeError):
    pass


class Record(NamedTuple):
    t: float
    id: int
    x: float
    y: float
    z: float
    vx: float
    vy: float
    vz: float
    layer: int
    q: int
    r: int
    phase: str


@dataclass
class Trip:
    id: int
    origin: tuple[float, float, float]
    destination: tuple[float, float, float]
    spawn_time: float
    arrival_time: Optional[float] = None

    @property
    def completed(self) -> bool:
        return self.arrival_time is not None


@dataclass
class TrajectoryLog:
    records: list[Record] = field(default_factory=list)
    trips: dict[int, Trip] = field(default_factory=dict)

    def by_tick(self) -> dict[float, list[Record]]:
        ticks: dict[float, list[Record]] = {}
        for rec in self.records:
            ticks.setdefault(rec.t, []).append(rec)
        return ticks

    def tick_interval(self) -> float:
        times = sorted({rec.t for rec in self.records})
        if len(times) < 2:
            return 1.0
        return times[1] - times[0]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(Record._fields)
            for rec in self.records:
                writer.writerow(rec)

    @classmethod
    def read_csv(cls, path) -> "TrajectoryLog":
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                log.records.append(Record(
                    float(row["t"]), int(row["id"]),
                    float(row["x"]), float(row["y"]), float(row["z"]),
                    float(row["vx"]), float(row["vy"]), float(row["vz"]),
                    int(row["layer"]), int(row["q"]), int(row["r"]),
                    row["phase"],
                ))
        # reconstruct trip bookkeeping from first/last appearances
        for rec in log.records:
            trip = log.trips.get(rec.id)
            if trip is None:
                log.trips[rec.id] = Trip(
                    rec.id, (rec.x, rec.y, rec.z), (rec.x, rec.y, rec.z), rec.t)
            elif rec.phase == "arrived":
                trip.arrival_time = rec.t
        return log


# -- Performance indices ------------------------------------------------------

def min_separation_stats(log: TrajectoryLog) -> float:
    """Mean over completed trips of each trip's minimum distance to any other
    active aircraft.  Trips that never coexist with another aircraft are excluded."""
    minima: dict[int, float] = {}
    for recs in log.by_tick().values():
        if len(recs) < 2:
            continue
        pos = np.array([[r.x, r.y, r.z] for r in recs])
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        nearest = dist.min(axis=1)
        for rec, d in zip(recs, nearest):
            if d < minima.get(rec.id, math.inf):
                minima[rec.id] = float(d)
    values = [minima[tid] for tid, trip in sorted(log.trips.items())
              if trip.completed and tid in minima]
    if not values:
        raise EmptyStatisticError("no completed trip ever coexisted with another aircraft")
    return sum(values) / len(values)


def avg_travel_speed(log: TrajectoryLog) -> float:
    """Mean over completed trips of straight-line OD distance over duration."""
    speeds = []
    for _, trip in sorted(log.trips.items()):
        if not trip.completed:
            continue
        duration = trip.arrival_time - trip.spawn_time
        if duration > 0:
            speeds.append(math.dist(trip.origin, trip.destination) / duration)
    if not speeds:
        raise EmptyStatisticError("no completed trips")
    return sum(speeds) / len(speeds)


def trip_completion_rate(log: TrajectoryLog, window: float) -> float:
    if window <= 0:
        raise ValueError("window must be positive")
    done = sum(1 for trip in log.trips.values()
               if trip.completed and trip.arrival_time <= window)
    return done / window


def energy_per_trip(log: TrajectoryLog,
                    hover_power: float = 1.0,
                    drag_coeff: float = 0.001) -> float:
    """Surrogate hover-plus-quadratic-drag energy, kWh per completed trip.

    The coefficients are configurable placeholders, not calibrated values;
    only comparisons between runs with identical coefficients are meaningful.
    """
    if hover_power < 0 or drag_coeff < 0:
        raise ValueError("coefficients must be nonnegative")
    dt = log.tick_interval()
    energy_kj: dict[int, float] = {}
    for rec in log.records:
        speed_sq = rec.vx ** 2 + rec.vy ** 2 + rec.vz ** 2
        energy_kj[rec.id] = energy_kj.get(rec.id, 0.0) + \
            (hover_power + drag_coeff * speed_sq) * dt
    values = [energy_kj[tid] / 3600.0 for tid, trip in sorted(log.trips.items())
              if trip.completed and tid in energy_kj]
    if not values:
        raise EmptyStatisticError("no completed trips")
    return sum(values) / len(values)


# -- MFD sampling and fitting -------------------------------------------------

@dataclass(frozen=True)
class MfdSample:
    window_start: float
    accumulation: float   # mean aircraft count inside the zone
    outflow: float        # trips/s exiting the zone
    density: float        # aircraft/km^2
    flow: float           # aircraft/s/km^2


@dataclass(frozen=True)
class FitParams:
    alpha: float
    beta: float
    n_cr_fit: float
    residual: float = 0.0

    def curve(self, accumulation) -> np.ndarray:
        n = np.asarray(accumulation, dtype=float)
        return self.alpha * n * np.exp(-(1.0 / self.beta) *
                                       (n / self.n_cr_fit) ** self.beta)

    def critical_point(self) -> tuple[float, float]:
        return (self.n_cr_fit,
                self.alpha * self.n_cr_fit * math.exp(-1.0 / self.beta))


def mfd_samples(log: TrajectoryLog, zone: tuple[float, float, float],
                window: float) -> list[MfdSample]:
    """Windowed accumulation and outflow for a circular measurement zone.

    ``zone`` is (cx, cy, radius); membership is by horizontal distance, any
    altitude.  Outflow counts aircraft crossing the boundary outward.
    """
    cx, cy, radius = zone
    if radius <= 0:
        raise ValueError("zero-area measurement zone")
    area_km2 = math.pi * radius * radius / 1e6
    ticks = sorted(log.by_tick().items())
    if not ticks:
        return []
    dt = log.tick_interval()
    if window < dt:
        raise ValueError("window must cover at least one tick")

    inside_prev: set[int] = set()
    samples: list[MfdSample] = []
    win_start = ticks[0][0]
    counts: list[int] = []
    exits = 0

    def flush(start: float, counts: list[int], exits: int) -> None:
        if not counts:
            return
        acc = sum(counts) / len(counts)
        out = exits / window
        samples.append(MfdSample(start, acc, out, acc / area_km2, out / area_km2))

    for t, recs in ticks:
        if t >= win_start + window:
            flush(win_start, counts, exits)
            win_start += window * math.floor((t - win_start) / window)
            counts, exits = [], 0
        inside = {r.id for r in recs
                  if math.hypot(r.x - cx, r.y - cy) <= radius}
        exits += len(inside_prev - inside)
        counts.append(len(inside))
        inside_prev = inside
    flush(win_start, counts, exits)
    return samples


def fit_mfd(samples: Sequence[MfdSample] | Sequence[tuple[float, float]]) -> FitParams:
    """Least-squares fit of the concave flow curve via multi-start Nelder-Mead.

    Accepts MfdSample records (using accumulation/outflow) or raw (n, g) pairs.
    Parameters are optimized in log space to stay positive.
    """
    if samples and isinstance(samples[0], MfdSample):
        pairs = [(s.accumulation, s.outflow) for s in samples]
    else:
        pairs = [(float(a), float(b)) for a, b in samples]
    pairs = [(n, g) for n, g in pairs if n > 0]
    if len(pairs) < 10:
        raise FitFailureError("need at least 10 samples with nonzero accumulation")
    n_arr = np.array([p[0] for p in pairs])
    g_arr = np.array([p[1] for p in pairs])
    if np.allclose(g_arr, 0.0):
        raise FitFailureError("all-zero flow samples")

    def sse(log_params: np.ndarray) -> float:
        # wild intermediate parameter values during the simplex walk can
        # overflow; the resulting inf objective just steers the walk back
        with np.errstate(over="ignore", invalid="ignore"):
            alpha, beta, n_cr = np.exp(log_params)
            model = alpha * n_arr * np.exp(-(1.0 / beta) *
                                           (n_arr / n_cr) ** beta)
            err = float(((model - g_arr) ** 2).sum())
        return err if math.isfinite(err) else float("inf")

    n_hi = float(n_arr.max())
    alpha0 = float(g_arr.max() / max(n_arr[g_arr.argmax()], 1e-9))
    starts = []
    for a in np.geomspace(max(alpha0 / 4, 1e-6), max(alpha0 * 4, 1e-5), 3):
        for b in (0.5, 1.0, 2.0, 4.0):
            for nc in np.geomspace(max(n_hi / 8, 1e-3), max(n_hi * 2, 1e-2), 4):
                starts.append(np.log([a, b, nc]))

    best = None
    for x0 in starts:
        res = minimize(sse, x0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
    alpha, beta, n_cr = np.exp(best.x)
    return FitParams(float(alpha), float(beta), float(n_cr), float(best.fun))


@dataclass(frozen=True)
class CapacityMetrics:
    k_jam: float
    k_cr: float
    q_cr: float
    k_jam_is_lower_bound: bool


def capacity_metrics(fit: FitParams, zone_area_km2: float,
                     samples: Sequence[MfdSample]) -> CapacityMetrics:
    """Critical density/flow from the fit; jam density from the observations.

    The fitted curve never reaches zero, so the jam density is taken from
    data: the lowest observed density beyond the critical density whose flow
    falls below 5% of the critical flow.  With no such congested samples the
    maximum observed density is reported as a lower bound.
    """
    if zone_area_km2 <= 0:
        raise ValueError("zone area must be positive")
    k_cr = fit.n_cr_fit / zone_area_km2
    q_cr = fit.critical_point()[1] / zone_area_km2
    congested = [s.density for s in samples
                 if s.density > k_cr and s.flow < 0.05 * q_cr]
    if congested:
        return CapacityMetrics(min(congested), k_cr, q_cr, False)
    max_density = max((s.density for s in samples), default=0.0)
    return CapacityMetrics(max_density, k_cr, q_cr, True)


def samples_to_csv(samples: Sequence[MfdSample], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_start", "accumulation", "outflow", "density", "flow"])
        for s in samples:
            writer.writerow([s.window_start, s.accumulation, s.outflow,
                             s.density, s.flow])


def samples_from_csv(path) -> list[MfdSample]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(MfdSample(
                float(row["window_start"]), float(row["accumulation"]),
                float(row["outflow"]), float(row["density"]), float(row["flow"])))
    return out


def fit_report_json(fit: FitParams, path=None) -> str:
    ncr, qcr = fit.critical_point()
    doc = json.dumps({
        "alpha": fit.alpha, "beta": fit.beta, "n_cr": fit.n_cr_fit,
        "residual": fit.residual,
        "critical_point": {"accumulation": ncr, "flow": qcr},
    }, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(doc)
    return doc
