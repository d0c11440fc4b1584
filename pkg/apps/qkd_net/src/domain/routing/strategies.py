from typing import List

import numpy as np

from src.domain.entanglement import RoundLinkState
from src.domain.routing.balancing import PriorityList
from src.domain.routing.base import RoutingStrategy
from src.domain.routing.paths import CandidatePath, greedy_select
from src.domain.topology import Topology


def static_route(state: RoundLinkState, t: Topology, rng: np.random.Generator) -> List[CandidatePath]:
    return greedy_select(state.copy(), t, t.terminal_pairs(), rng)


def dynamic_route(state: RoundLinkState, t: Topology, prio: PriorityList,
                  rng: np.random.Generator) -> List[CandidatePath]:
    working = state.copy()
    paths = greedy_select(working, t, prio.pairs, rng)
    # prioritized pairs rejoin the pool in the fallback phase
    paths.extend(greedy_select(working, t, t.terminal_pairs(), rng))
    return paths


class StaticRouting(RoutingStrategy):
    name = "static"

    def route(self, state: RoundLinkState, t: Topology, prio: PriorityList,
              rng: np.random.Generator) -> List[CandidatePath]:
        return static_route(state, t, rng)


class DynamicRouting(RoutingStrategy):
    name = "dynamic"
    uses_priorities = True

    def route(self, state: RoundLinkState, t: Topology, prio: PriorityList,
              rng: np.random.Generator) -> List[CandidatePath]:
        return dynamic_route(state, t, prio, rng)


STRATEGIES = {cls.name: cls for cls in (StaticRouting, DynamicRouting)}


def get_strategy(policy: str) -> RoutingStrategy:
    try:
        return STRATEGIES[policy.strip().lower()]()
    except KeyError:
        raise ValueError(f"Unknown routing policy '{policy}', expected one of {sorted(STRATEGIES)}") from None
