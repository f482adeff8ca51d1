import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uamsim.hexspace import RegionId, build_network
from uamsim.routeplan import (
    CandidateSet,
    JointDecision,
    Path,
    PlannerConfig,
    SearchBudgetError,
    UnreachableDestinationError,
    approx_optimal_paths,
    candidate_paths,
    direct_path,
    exhaustive_optimal_paths,
    fast_joint_cost,
    path_cost,
    predict_trajectories,
    regulated_speed,
)

from conftest import flower_network

SQRT3 = math.sqrt(3.0)
LEG = SQRT3 * 250.0


class TestRegulatedSpeed:
    def test_half_speed_at_critical(self):
        for v_max in (5.0, 20.0, 33.0):
            for n_cr in (1.0, 10.0, 50.0):
                assert regulated_speed(n_cr, n_cr, v_max) == pytest.approx(v_max / 2)

    def test_reference_values(self):
        # sigmoid evaluated at n=0 and n=12 with n_cr=10, v_max=20
        assert regulated_speed(0, 10, 20) == pytest.approx(19.999092, abs=1e-5)
        assert regulated_speed(12, 10, 20) == pytest.approx(2.384058, abs=1e-5)

    def test_no_overflow_far_past_critical(self):
        assert regulated_speed(10000, 10, 20) == 0.0
        assert regulated_speed(-10000, 10, 20) == pytest.approx(20.0)

    @given(st.floats(0, 500), st.floats(0.1, 100), st.floats(0.1, 50))
    @settings(max_examples=200, deadline=None)
    def test_bounded_and_monotone(self, n, n_cr, v_max):
        v = regulated_speed(n, n_cr, v_max)
        assert 0.0 <= v <= v_max
        assert regulated_speed(n + 1.0, n_cr, v_max) <= v


class TestCandidatePaths:
    def test_same_region_degenerate(self, single_layer):
        graph = single_layer.routing_graph()
        o, d = (10.0, 10.0, 500.0), (40.0, -20.0, 500.0)
        cs = candidate_paths(graph, o, d, single_layer)
        assert len(cs.paths) == 1
        assert cs.paths[0].waypoints == (o, d)
        assert cs.paths[0].pass_by == ()

    def test_flower_candidates_match_brute_force(self):
        net = flower_network()
        graph = net.routing_graph()
        west = net.regions[RegionId(0, -1, 0)].centroid
        east = net.regions[RegionId(0, 1, 0)].centroid
        cs = candidate_paths(graph, west, east, net)

        # brute-force all simple region paths on the 7-node graph
        def simple_paths(src, dst):
            out = []
            stack = [(src, [src])]
            while stack:
                node, path = stack.pop()
                if node == dst:
                    out.append(path)
                    continue
                for nxt in graph.adj[node]:
                    if nxt not in path:
                        stack.append((nxt, path + [nxt]))
            return out

        all_paths = simple_paths(RegionId(0, -1, 0), RegionId(0, 1, 0))
        shortest = min(all_paths, key=lambda p: graph.path_length(p))
        # first candidate goes through the center cell
        assert cs.paths[0].pass_by == tuple(shortest[1:-1])
        assert cs.paths[0].pass_by == (RegionId(0, 0, 0),)
        # later candidates detour around the ring with >= 2 intermediates
        for path in cs.paths[1:]:
            assert len(path.pass_by) >= 2
        # candidates are region-disjoint and ordered shortest-first
        seen = set()
        for path in cs.paths:
            assert not (seen & set(path.pass_by))
            seen |= set(path.pass_by)
        lengths = [p.graph_length for p in cs.paths]
        assert lengths == sorted(lengths)

    def test_unreachable_destination_raises(self, single_layer):
        graph = single_layer.routing_graph()
        dest_rid = single_layer.locate((1500.0, 0.0, 500.0))
        for nid in list(graph.adj[dest_rid]):
            graph.remove_node(nid)
        graph_isolated = graph
        with pytest.raises(UnreachableDestinationError):
            candidate_paths(graph_isolated, (-1500.0, 0.0, 500.0),
                            (1500.0, 0.0, 500.0), single_layer)

    @given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3),
           st.integers(-3, 3))
    @settings(max_examples=60, deadline=None)
    def test_disjointness_property(self, q1, r1, q2, r2):
        net = build_network([500.0], 250.0, (-2000, -2000, 2000, 2000))
        graph = net.routing_graph()
        o = net.regions[RegionId(0, q1, r1)].centroid
        d = net.regions[RegionId(0, q2, r2)].centroid
        cs = candidate_paths(graph, o, d, net)
        seen = set()
        for path in cs.paths:
            assert not (seen & set(path.pass_by))
            seen |= set(path.pass_by)


class TestDirectPath:
    def test_two_waypoints(self, single_layer):
        p = direct_path((-100.0, 0.0, 500.0), (700.0, 0.0, 500.0), single_layer)
        assert p.waypoints == ((-100.0, 0.0, 500.0), (700.0, 0.0, 500.0))

    def test_degenerate_zero_length(self, single_layer):
        p = direct_path((5.0, 5.0, 500.0), (5.0, 5.0, 500.0), single_layer)
        assert p.graph_length == 0.0

    def test_three_region_traversal_order(self, single_layer):
        o = single_layer.regions[RegionId(0, 0, -1)].centroid
        d = single_layer.regions[RegionId(0, 0, 1)].centroid
        p = direct_path(o, d, single_layer)
        assert p.pass_by == (RegionId(0, 0, -1), RegionId(0, 0, 0),
                             RegionId(0, 0, 1))


def _free_flow_net(n_cr=1000.0):
    return build_network([500.0], 250.0, (-2000, -2000, 2000, 2000), n_cr=n_cr)


class TestPrediction:
    def test_constant_speed_arrival_time(self):
        net = _free_flow_net()
        graph = net.routing_graph()
        cs = candidate_paths(graph, (-800.0, 0.0, 500.0), (800.0, 0.0, 500.0), net)
        path = cs.paths[0]
        cfg = PlannerConfig()
        traj = predict_trajectories(JointDecision([path]), cfg, net)[0]
        d = sum(math.dist(a, b) for a, b in zip(path.waypoints, path.waypoints[1:]))
        t_arr = traj[-1][0]
        # free flow at v_max, allowing one step plus the retirement radius
        assert abs(t_arr - d / 20.0) <= 1.0 + cfg.arrival_epsilon / 20.0

    def test_immediate_retirement(self):
        net = _free_flow_net()
        path = Path(((0.0, 0.0, 500.0), (5.0, 0.0, 500.0)), (), 5.0)
        traj = predict_trajectories(JointDecision([path]), PlannerConfig(), net)[0]
        assert len(traj) == 1
        assert path_cost(traj, path.origin, path.destination) == 0.0

    def test_shared_region_slows_both(self):
        net = build_network([500.0], 250.0, (-2000, -2000, 2000, 2000), n_cr=1.0)
        o, d = (-800.0, 0.0, 500.0), (800.0, 0.0, 500.0)
        cs = candidate_paths(net.routing_graph(), o, d, net)
        decision = JointDecision([cs.paths[0], cs.paths[0]])
        trajs = predict_trajectories(decision, PlannerConfig(), net)
        # both in one region each step: speed 20/(1+e) at occupancy 2
        expected = 20.0 / (1.0 + math.e)
        for traj in trajs:
            step = math.dist(traj[0][1], traj[1][1])
            assert step == pytest.approx(expected, abs=1e-9)
        solo = predict_trajectories(JointDecision([cs.paths[0]]),
                                    PlannerConfig(), net)[0]
        assert math.dist(solo[0][1], solo[1][1]) == pytest.approx(10.0, abs=1e-9)


class TestPathCost:
    def test_endpoint_argmins(self):
        traj = [(0.0, (0.0, 0.0, 0.0)), (5.0, (50.0, 0.0, 0.0)),
                (10.0, (100.0, 0.0, 0.0))]
        assert path_cost(traj, (0, 0, 0), (100, 0, 0)) == 10.0

    def test_single_sample(self):
        traj = [(3.0, (7.0, 0.0, 0.0))]
        assert path_cost(traj, (7, 0, 0), (7, 0, 0)) == 0.0

    def test_constant_speed_straight(self):
        v, d = 12.5, 1000.0
        traj = [(t, (v * t, 0.0, 0.0)) for t in range(0, 85)]
        assert abs(path_cost(traj, (0, 0, 0), (d, 0, 0)) - d / v) <= 1.0


class TestFastJointCost:
    def test_single_aircraft_free_flow(self):
        net = _free_flow_net()
        rids = (RegionId(0, 0, 0), RegionId(0, 1, 0), RegionId(0, 1, 1))
        path = Path(((0, 0, 500),) + tuple(net.regions[r].centroid for r in rids)
                    + ((900, 900, 500),), rids, 3 * LEG)
        cost = fast_joint_cost(JointDecision([path]), PlannerConfig(), net)
        assert cost == pytest.approx(3 * LEG / 20.0, rel=1e-6)
        assert cost == pytest.approx(64.95, abs=0.01)

    def test_empty_decision(self):
        net = _free_flow_net()
        assert fast_joint_cost(JointDecision([]), PlannerConfig(), net) == 0.0

    def test_column_occupancy(self):
        net = build_network([500.0], 250.0, (-2000, -2000, 2000, 2000), n_cr=2.0)
        a, b = RegionId(0, 0, 0), RegionId(0, 1, 0)
        mk = lambda rid: Path(((0, 0, 500), net.regions[rid].centroid,
                               (0, 0, 500)), (rid,), LEG)
        cost = fast_joint_cost(JointDecision([mk(a), mk(a), mk(b)]),
                               PlannerConfig(), net)
        v_a = regulated_speed(2, 2, 20)  # exactly 10 by sigmoid symmetry
        v_b = regulated_speed(1, 2, 20)
        assert v_a == pytest.approx(10.0)
        assert cost == pytest.approx(2 * LEG / v_a + LEG / v_b, rel=1e-9)

    def test_null_padding_of_short_paths(self):
        net = build_network([500.0], 250.0, (-2000, -2000, 2000, 2000), n_cr=2.0)
        a, b, c = RegionId(0, 0, 0), RegionId(0, 1, 0), RegionId(0, 0, 1)
        long = Path(((0, 0, 500), net.regions[a].centroid,
                     net.regions[b].centroid, (0, 0, 500)), (a, b), 2 * LEG)
        short = Path(((0, 0, 500), net.regions[c].centroid, (0, 0, 500)),
                     (c,), LEG)
        cost = fast_joint_cost(JointDecision([long, short]), PlannerConfig(), net)
        # columns: [a, c] then [b, null]; every region at occupancy 1
        v1 = regulated_speed(1, 2, 20)
        assert cost == pytest.approx(3 * LEG / v1, rel=1e-9)


def _crossing_instance(n_cr=1.0):
    # flower layout: both shortest routes must transit the center cell
    net = flower_network(n_cr=n_cr)
    graph = net.routing_graph()
    pairs = [(net.regions[RegionId(0, -1, 0)].centroid,
              net.regions[RegionId(0, 1, 0)].centroid),
             (net.regions[RegionId(0, 0, -1)].centroid,
              net.regions[RegionId(0, 0, 1)].centroid)]
    return net, [candidate_paths(graph, o, d, net, owner=i)
                 for i, (o, d) in enumerate(pairs)]


class TestJointSearch:
    def test_single_aircraft_takes_shortest(self, single_layer):
        graph = single_layer.routing_graph()
        cs = candidate_paths(graph, (-900.0, 0.0, 500.0), (900.0, 0.0, 500.0),
                             single_layer)
        result = approx_optimal_paths([cs], PlannerConfig(), single_layer)
        assert result.decision.selection[0] is cs.paths[0]
        assert result.evaluations == 1
        exact = exhaustive_optimal_paths([cs], PlannerConfig(), single_layer)
        assert exact.cost == pytest.approx(
            fast_joint_cost(JointDecision([cs.paths[0]]), PlannerConfig(),
                            single_layer))

    def test_forced_single_candidates(self, single_layer):
        graph = single_layer.routing_graph()
        sets = []
        for k, x in enumerate((-900.0, -300.0, 300.0)):
            cs = candidate_paths(graph, (x, -900.0, 500.0), (x, 900.0, 500.0),
                                 single_layer, owner=k)
            sets.append(CandidateSet(k, cs.paths[:1]))
        result = exhaustive_optimal_paths(sets, PlannerConfig(), single_layer)
        assert result.evaluations == 1
        assert [p for p in result.decision.selection] == [s.paths[0] for s in sets]

    def test_exhaustive_equals_brute_force(self):
        net, sets = _crossing_instance()
        cfg = PlannerConfig()
        trimmed = [CandidateSet(s.owner, s.paths[:3]) for s in sets]
        result = exhaustive_optimal_paths(trimmed, cfg, net)
        assert result.evaluations == 9
        best = min(
            (fast_joint_cost(JointDecision(list(combo)), cfg, net)
             for combo in itertools.product(*(s.paths for s in trimmed))),
        )
        assert result.cost == pytest.approx(best)

    def test_crossing_pair_detour_decision(self):
        net, sets = _crossing_instance()
        cfg = PlannerConfig()
        approx = approx_optimal_paths(sets, cfg, net)
        exact = exhaustive_optimal_paths(sets, cfg, net)
        assert exact.cost <= approx.cost + 1e-9
        # shared-region congestion at n_cr = 1 makes a detour pay off
        naive = fast_joint_cost(JointDecision([s.paths[0] for s in sets]), cfg, net)
        assert exact.cost < naive

    def test_evaluation_counters(self):
        net, sets = _crossing_instance()
        cfg = PlannerConfig()
        sizes = [len(s.paths) for s in sets]
        od = [s.paths[0].od_distance() for s in sets]
        first = min(range(len(sets)), key=lambda i: (od[i], i))
        approx = approx_optimal_paths(sets, cfg, net)
        assert approx.evaluations == sum(sizes) - sizes[first] + 1
        exact = exhaustive_optimal_paths(sets, cfg, net)
        assert exact.evaluations == sizes[0] * sizes[1]

    def test_budget_guard(self):
        net, sets = _crossing_instance()
        cfg = PlannerConfig(exhaustive_budget=3)
        with pytest.raises(SearchBudgetError):
            exhaustive_optimal_paths(sets, cfg, net)

    def test_tie_break_prefers_lexicographic(self):
        net = _free_flow_net()
        graph = net.routing_graph()
        # far apart, no interaction: every combo of shortest paths ties
        a = candidate_paths(graph, (-1500.0, -1500.0, 500.0),
                            (-900.0, -1500.0, 500.0), net, owner=0)
        b = candidate_paths(graph, (1500.0, 1500.0, 500.0),
                            (900.0, 1500.0, 500.0), net, owner=1)
        exact = exhaustive_optimal_paths([a, b], PlannerConfig(), net)
        assert exact.decision.selection[0] is a.paths[0]
        assert exact.decision.selection[1] is b.paths[0]
