import math

import pytest

from uamsim.flightdyn import (
    AircraftBody,
    IntegratorConfig,
    Phase,
    acceleration,
    advance_waypoint,
    step,
)
from uamsim.orca import AgentState
from uamsim.routeplan import Path


def body(pos, vel, gain=5.0, waypoints=None):
    agent = AgentState(id=0, position=pos, velocity=vel, safety_radius=50.0,
                       detection_radius=200.0, v_max=20.0)
    waypoints = waypoints or (pos, (10_000.0, 0.0, 500.0))
    return AircraftBody(agent=agent, control_gain=gain,
                        path=Path(tuple(waypoints), (), 0.0))


class TestAcceleration:
    def test_equilibrium(self):
        assert acceleration((7.0, -3.0, 1.0), (7.0, -3.0, 1.0), 5.0) == (0, 0, 0)

    def test_proportional_to_error(self):
        assert acceleration((0.0, 0.0, 0.0), (10.0, 0.0, 0.0), 5.0) == \
            pytest.approx((50.0, 0.0, 0.0))
        assert acceleration((4.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.5) == \
            pytest.approx((-2.0, 0.0, 0.0))


class TestStep:
    def test_midpoint_weighting_below_clamp(self):
        b = body((0.0, 0.0, 500.0), (0.0, 0.0, 0.0), gain=0.5)
        step(b, (20.0, 0.0, 0.0), IntegratorConfig(dt=1.0))
        assert b.agent.velocity == pytest.approx((10.0, 0.0, 0.0))

    def test_clamped_gain_snaps_to_command(self):
        # gain 5 with dt 1 gives omega 5, clamped to 1
        b = body((0.0, 0.0, 500.0), (3.0, 1.0, 0.0), gain=5.0)
        step(b, (0.0, 12.0, 0.0), IntegratorConfig(dt=1.0))
        assert b.agent.velocity == pytest.approx((0.0, 12.0, 0.0))

    def test_position_uses_pre_update_velocity(self):
        b = body((0.0, 0.0, 500.0), (12.0, 0.0, 0.0), gain=5.0)
        step(b, (12.0, 0.0, 0.0), IntegratorConfig(dt=1.0))
        assert b.agent.position == pytest.approx((12.0, 0.0, 500.0))
        assert b.agent.velocity == pytest.approx((12.0, 0.0, 0.0))

    def test_speed_recapped_after_blend(self):
        b = body((0.0, 0.0, 500.0), (0.0, 0.0, 0.0), gain=0.9)
        step(b, (40.0, 0.0, 0.0), IntegratorConfig(dt=1.0))
        assert math.hypot(*b.agent.velocity) <= 20.0 + 1e-12

    def test_unclamped_gain_allowed_when_disabled(self):
        b = body((0.0, 0.0, 500.0), (0.0, 0.0, 0.0), gain=2.0)
        step(b, (10.0, 0.0, 0.0), IntegratorConfig(dt=1.0, omega_clamp=False))
        assert b.agent.velocity == pytest.approx((20.0, 0.0, 0.0))


class TestWaypoints:
    WPTS = ((0.0, 0.0, 500.0), (500.0, 0.0, 500.0), (1000.0, 0.0, 500.0))

    def test_far_from_target_unchanged(self):
        b = body((0.0, 0.0, 500.0), (0.0, 0.0, 0.0), waypoints=self.WPTS)
        advance_waypoint(b, IntegratorConfig())
        assert b.target_index == 1
        assert b.phase is Phase.ENROUTE

    def test_intermediate_advances(self):
        b = body((480.0, 0.0, 500.0), (0.0, 0.0, 0.0), waypoints=self.WPTS)
        advance_waypoint(b, IntegratorConfig())
        assert b.target_index == 2

    def test_terminal_arrival(self):
        b = body((985.0, 0.0, 500.0), (0.0, 0.0, 0.0), waypoints=self.WPTS)
        b.target_index = 2
        advance_waypoint(b, IntegratorConfig())
        assert b.phase is Phase.ARRIVED

    def test_skips_clustered_waypoints(self):
        wpts = ((0.0, 0.0, 500.0), (500.0, 0.0, 500.0), (510.0, 0.0, 500.0),
                (2000.0, 0.0, 500.0))
        b = body((495.0, 0.0, 500.0), (0.0, 0.0, 0.0), waypoints=wpts)
        advance_waypoint(b, IntegratorConfig())
        assert b.target_index == 3

    def test_free_flight_reaches_destination_on_schedule(self):
        d = 2000.0
        b = body((0.0, 0.0, 500.0), (0.0, 0.0, 0.0),
                 waypoints=((0.0, 0.0, 500.0), (d, 0.0, 500.0)))
        cfg = IntegratorConfig(dt=1.0)
        ticks = 0
        while b.phase is Phase.ENROUTE and ticks < 500:
            direction = (1.0, 0.0, 0.0)
            step(b, tuple(20.0 * c for c in direction), cfg)
            ticks += 1
        assert b.phase is Phase.ARRIVED
        expected = math.ceil((d - cfg.waypoint_threshold) / 20.0)
        assert abs(ticks - expected) <= 1
