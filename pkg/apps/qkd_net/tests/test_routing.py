import numpy as np
import pytest

from src.domain.entanglement import LinkModel, RoundLinkState, sample_links
from src.domain.routing import (
    CandidatePath,
    PriorityList,
    attempt_swapping,
    dynamic_route,
    get_strategy,
    shortest_path,
    static_route,
    validate_paths,
)
from src.domain.topology import Link, NodeKind, PlacementPreset, Topology, build_topology
from src.exceptions import SimulationError


def line_topology():
    """A - r - B"""
    return Topology(
        grid_side=3,
        node_kind={(0, 0): NodeKind.ALICE, (0, 1): NodeKind.REPEATER, (0, 2): NodeKind.BOB},
        links=(Link((0, 0), (0, 1), 1.0), Link((0, 1), (0, 2), 1.0)),
        terminals=((0, 0), (0, 2)),
    )


def square_topology():
    """A=(0,0) and B=(1,1) joined through two repeaters"""
    return Topology(
        grid_side=2,
        node_kind={(0, 0): NodeKind.ALICE, (0, 1): NodeKind.REPEATER,
                   (1, 0): NodeKind.REPEATER, (1, 1): NodeKind.BOB},
        links=(
            Link((0, 0), (0, 1), 1.0),
            Link((0, 0), (1, 0), 1.0),
            Link((0, 1), (1, 1), 1.0),
            Link((1, 0), (1, 1), 1.0),
        ),
        terminals=((0, 0), (1, 1)),
    )


def without(t, *failed):
    state = RoundLinkState.all_established(t)
    state.consume([t.link_between(u, v) for u, v in failed])
    return state


def assert_nearest_first(paths, t):
    """Each pair forms one block of non-decreasing hops, blocks ordered by terminal distance"""
    blocks = []
    for path in paths:
        if blocks and blocks[-1][0] == path.endpoints:
            assert path.hops >= blocks[-1][1][-1]
            blocks[-1][1].append(path.hops)
        else:
            blocks.append((path.endpoints, [path.hops]))
    pairs = [pair for pair, _ in blocks]
    assert len(pairs) == len(set(pairs))
    distances = [t.terminal_distance(*pair) for pair in pairs]
    assert distances == sorted(distances)


@pytest.fixture
def two_tn():
    # T1=(3,3), T2=(4,4)
    return build_topology(7, PlacementPreset.DIAG_4_2_6)


@pytest.fixture
def t1_cut_off(two_tn):
    return without(two_tn, ((2, 3), (3, 3)), ((3, 2), (3, 3)))


class TestShortestPath:
    def test_unique_path(self):
        t = line_topology()
        path = shortest_path(RoundLinkState.all_established(t), t, (0, 1), np.random.default_rng(0))
        assert path.k == 1
        assert path.nodes == ((0, 0), (0, 1), (0, 2))
        assert path.interior == ((0, 1),)

    def test_disconnected(self):
        t = line_topology()
        state = without(t, ((0, 0), (0, 1)))
        assert shortest_path(state, t, (0, 1), np.random.default_rng(0)) is None

    def test_ties_are_uniform(self):
        t = square_topology()
        state = RoundLinkState.all_established(t)
        rng = np.random.default_rng(3)
        trials = 10000
        upper = sum(shortest_path(state, t, (0, 1), rng).interior == ((0, 1),) for _ in range(trials))
        assert abs(upper / trials - 0.5) < 4 * np.sqrt(0.25 / trials)

    def test_terminals_are_not_crossed(self, two_tn):
        state = RoundLinkState.all_established(two_tn)
        path = shortest_path(state, two_tn, (0, 3), np.random.default_rng(1))
        assert path.hops == 12
        assert all(two_tn.node_kind[node] is NodeKind.REPEATER for node in path.interior)

    def test_endpoint_order_is_normalized(self):
        t = line_topology()
        path = shortest_path(RoundLinkState.all_established(t), t, (1, 0), np.random.default_rng(0))
        assert path.endpoints == (0, 1)


class TestStaticRoute:
    def test_full_grid_without_trusted_nodes(self):
        t = build_topology(7, PlacementPreset.NO_TN)
        paths = static_route(RoundLinkState.all_established(t), t, np.random.default_rng(0))
        assert paths[0].hops == 12
        assert paths[0].k == 11
        hops = [p.hops for p in paths]
        assert hops == sorted(hops)
        validate_paths(paths, RoundLinkState.all_established(t), t)

    def test_empty_state(self, two_tn):
        empty = RoundLinkState(np.zeros(len(two_tn.links), dtype=bool))
        assert static_route(empty, two_tn, np.random.default_rng(0)) == []

    def test_state_is_not_modified(self, two_tn):
        state = RoundLinkState.all_established(two_tn)
        static_route(state, two_tn, np.random.default_rng(0))
        assert len(state) == len(two_tn.links)

    def test_nearest_pair_is_exhausted_first(self):
        # T1=(2,2) sits two hops from Alice and takes all four of her links
        t = build_topology(7, PlacementPreset.DIAG_2_6_4)
        state = RoundLinkState.all_established(t)
        paths = static_route(state, t, np.random.default_rng(5))
        assert [(p.endpoints, p.hops) for p in paths[:4]] == [((0, 1), 2), ((0, 1), 2), ((0, 1), 6), ((0, 1), 6)]
        assert all(0 not in p.endpoints and 1 not in p.endpoints for p in paths[4:])
        assert paths[4].endpoints == (2, 3)
        validate_paths(paths, state, t)

    def test_cut_off_tn_spends_links_on_short_pair(self, two_tn, t1_cut_off):
        paths = static_route(t1_cut_off, two_tn, np.random.default_rng(2))
        assert [(p.endpoints, p.hops) for p in paths[:2]] == [((1, 2), 2), ((1, 2), 2)]
        assert all(1 not in p.endpoints for p in paths[2:])


class TestDynamicRoute:
    def test_priority_pair_gets_long_path(self, two_tn, t1_cut_off):
        prio = PriorityList(frozenset({(0, 1)}))
        paths = dynamic_route(t1_cut_off, two_tn, prio, np.random.default_rng(2))
        assert paths[0].endpoints == (0, 1)
        assert paths[0].hops == 6
        validate_paths(paths, t1_cut_off, two_tn)

    def test_empty_priorities_match_static(self, two_tn):
        state = sample_links(two_tn, LinkModel(success_prob=0.8), np.random.default_rng(9))
        static = static_route(state, two_tn, np.random.default_rng(4))
        dynamic = dynamic_route(state, two_tn, PriorityList(), np.random.default_rng(4))
        assert static == dynamic

    def test_all_pairs_prioritized_match_static(self, two_tn):
        state = sample_links(two_tn, LinkModel(success_prob=0.8), np.random.default_rng(10))
        prio = PriorityList(frozenset(two_tn.terminal_pairs()))
        static = static_route(state, two_tn, np.random.default_rng(4))
        dynamic = dynamic_route(state, two_tn, prio, np.random.default_rng(4))
        assert static == dynamic

    def test_strategy_lookup(self):
        assert get_strategy("Static").name == "static"
        assert get_strategy("dynamic").uses_priorities
        with pytest.raises(ValueError):
            get_strategy("flooding")


class TestPathProperties:
    @pytest.mark.parametrize("preset", [PlacementPreset.DIAG_2_6_4, PlacementPreset.OFF_CENTER,
                                        PlacementPreset.TWO_TN_CORNER])
    def test_disjoint_established_and_repeater_interior(self, preset):
        t = build_topology(7, preset)
        m = LinkModel(success_prob=0.75)
        rng = np.random.default_rng(21)
        prio = PriorityList(frozenset({t.terminal_pairs()[0]}))
        for _ in range(40):
            state = sample_links(t, m, rng)
            static = static_route(state, t, rng)
            validate_paths(static, state, t)
            assert_nearest_first(static, t)
            validate_paths(dynamic_route(state, t, prio, rng), state, t)


class TestValidatePaths:
    def test_shared_link_rejected(self):
        t = line_topology()
        state = RoundLinkState.all_established(t)
        path = shortest_path(state, t, (0, 1), np.random.default_rng(0))
        with pytest.raises(SimulationError):
            validate_paths([path, path], state, t)

    def test_missing_link_rejected(self):
        t = line_topology()
        path = shortest_path(RoundLinkState.all_established(t), t, (0, 1), np.random.default_rng(0))
        with pytest.raises(SimulationError):
            validate_paths([path], without(t, ((0, 1), (0, 2))), t)

    def test_terminal_interior_rejected(self):
        t = Topology(
            grid_side=3,
            node_kind={(0, 0): NodeKind.ALICE, (0, 1): NodeKind.TRUSTED, (0, 2): NodeKind.BOB},
            links=(Link((0, 0), (0, 1), 1.0), Link((0, 1), (0, 2), 1.0)),
            terminals=((0, 0), (0, 1), (0, 2)),
        )
        path = CandidatePath(endpoints=(0, 2), nodes=((0, 0), (0, 1), (0, 2)), links=(0, 1))
        with pytest.raises(SimulationError, match="crosses terminal"):
            validate_paths([path], RoundLinkState.all_established(t), t)


class TestSwapping:
    def make_path(self, k):
        nodes = tuple((0, i) for i in range(k + 2))
        return CandidatePath(endpoints=(0, 1), nodes=nodes, links=tuple(range(k + 1)))

    def test_direct_link_always_survives(self):
        paths = [self.make_path(0)] * 100
        assert len(attempt_swapping(paths, 0.1, np.random.default_rng(0))) == 100

    def test_perfect_measurements(self):
        paths = [self.make_path(5)] * 50
        assert len(attempt_swapping(paths, 1.0, np.random.default_rng(0))) == 50

    def test_survival_rate(self):
        trials = 100000
        survivors = attempt_swapping([self.make_path(2)] * trials, 0.85, np.random.default_rng(8))
        p = 0.85 ** 2
        assert abs(len(survivors) / trials - p) < 4 * np.sqrt(p * (1 - p) / trials)

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            attempt_swapping([], 1.5, np.random.default_rng(0))
