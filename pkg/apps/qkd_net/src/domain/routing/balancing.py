"""
Priority rules that steer dynamic routing toward under-filled key pools.

Domain Context:
- The final key is limited by the weakest terminal pair on Alice's best corridor to Bob
- Capacity estimates are the secret key bits accumulated per terminal pair so far

Business Rules:
- Surplus balancing: take the fullest edge e_max, the shortest A-B terminal path
  through it, and prioritize the near-minimal edges on that path that are
  clearly below c_max
- Bottleneck balancing: prioritize the saturated edge whose extra capacity
  would raise the max-flow the most
- Pairs at distance >= theta * dist(A,B) are never prioritized
- Nothing is prioritized while every pool is empty

Architecture:
- Balancer is the strategy interface; the simulator holds one instance per run
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import FrozenSet, List, Sequence, Tuple

import networkx as nx
import numpy as np

from src.domain.flow import FLOW_TOLERANCE, FlowGraph, max_flow, residual_network, residual_reach
from src.domain.topology import TerminalPair, Topology

logger = logging.getLogger(__name__)

TIE_BREAK_SCALE = 1e-3


@dataclass(frozen=True)
class BalancerParams:
    sigma: float = 0.15
    delta: float = 0.05
    theta: float = 0.75

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must be in (0, 1), got {self.theta}")


@dataclass(frozen=True)
class PriorityList:
    pairs: FrozenSet[TerminalPair] = field(default_factory=frozenset)

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)


def _pair(i: int, j: int) -> TerminalPair:
    return (i, j) if i < j else (j, i)


def distance_filter(pairs: Sequence[TerminalPair], t: Topology, theta: float) -> List[TerminalPair]:
    limit = theta * t.terminal_distance(0, len(t.terminals) - 1)
    return [pair for pair in pairs if t.terminal_distance(*pair) < limit]


class Balancer(ABC):
    """Computes the terminal pairs to route first in the coming round"""

    def __init__(self, params: BalancerParams):
        self.params = params

    @abstractmethod
    def compute(self, caps: FlowGraph, t: Topology, rng: np.random.Generator) -> PriorityList:
        """
        Args:
            caps: current capacity estimates for every terminal pair
            t: network topology
            rng: generator used for tie-breaking

        Returns:
            Pairs to prioritize; empty when the network is balanced
        """
        pass


class SurplusBalancer(Balancer):
    def compute(self, caps: FlowGraph, t: Topology, rng: np.random.Generator) -> PriorityList:
        pairs = caps.pairs()
        values = np.array([caps.capacity(*pair) for pair in pairs])
        c_max = float(values.max())
        if c_max <= 0:
            return PriorityList()

        fullest = np.flatnonzero(values == c_max)
        e_max = pairs[int(fullest[0]) if len(fullest) == 1 else int(rng.choice(fullest))]
        corridor = self._corridor(e_max, t, rng)

        sigma, delta = self.params.sigma, self.params.delta
        underfull = [e for e in corridor if (1 + sigma) * caps.capacity(*e) <= c_max]
        if not underfull:
            return PriorityList()
        c_min = min(caps.capacity(*e) for e in underfull)
        near_min = [e for e in underfull if caps.capacity(*e) <= (1 + delta) * c_min]
        chosen = distance_filter(near_min, t, self.params.theta)
        logger.debug(f"e_max={t.pair_label(e_max)} c_max={c_max:.1f} corridor={corridor} prioritized={chosen}")
        return PriorityList(frozenset(chosen))

    def _corridor(self, e_max: TerminalPair, t: Topology, rng: np.random.Generator) -> List[TerminalPair]:
        """Edges of the shortest A-B terminal path through e_max, distances perturbed for tie-breaking"""
        n = len(t.terminals)
        alice, bob = 0, n - 1
        graph = nx.Graph()
        pairs = t.terminal_pairs()
        jitter = rng.uniform(0.0, TIE_BREAK_SCALE, size=len(pairs))
        for (i, j), eps in zip(pairs, jitter):
            graph.add_edge(i, j, weight=t.terminal_distance(i, j) - eps)

        best = None
        for ti, tj in (e_max, e_max[::-1]):
            head_len, head = nx.single_source_dijkstra(graph, alice, ti)
            tail_len, tail = nx.single_source_dijkstra(graph, tj, bob)
            total = head_len + graph[ti][tj]["weight"] + tail_len
            if best is None or total < best[0]:
                best = (total, head + tail)

        edges: List[TerminalPair] = []
        nodes = best[1]
        for u, v in zip(nodes, nodes[1:]):
            e = _pair(u, v)
            if e not in edges:
                edges.append(e)
        return edges


class BottleneckBalancer(Balancer):
    """Prioritizes the saturated cut edge with the largest max-flow gain"""

    def compute(self, caps: FlowGraph, t: Topology, rng: np.random.Generator) -> PriorityList:
        values = [caps.capacity(*pair) for pair in caps.pairs()]
        c_max, c_min = max(values), min(values)
        if c_max <= (1 + self.params.sigma) * c_min:
            return PriorityList()
        extra = c_max - c_min

        residual = residual_network(caps)
        base = float(residual.graph["flow_value"])
        from_alice = residual_reach(residual, caps.source)
        to_bob = residual_reach(residual, caps.sink, reverse=True)

        bottlenecks = [
            (i, j) for i, j in caps.pairs()
            if (i in from_alice and j in to_bob) or (j in from_alice and i in to_bob)
        ]
        candidates: List[Tuple[TerminalPair, float]] = []
        for pair in distance_filter(bottlenecks, t, self.params.theta):
            gain = max_flow(caps.with_capacity(pair, caps.capacity(*pair) + extra)).value - base
            if gain > self.params.delta * extra + FLOW_TOLERANCE:
                candidates.append((pair, gain))
        if not candidates:
            return PriorityList()

        shortest = min(t.terminal_distance(*pair) for pair, _ in candidates)
        candidates = [(pair, gain) for pair, gain in candidates if t.terminal_distance(*pair) == shortest]
        top_gain = max(gain for _, gain in candidates)
        finalists = [pair for pair, gain in candidates if gain >= top_gain - FLOW_TOLERANCE]
        pick = finalists[0] if len(finalists) == 1 else finalists[int(rng.integers(len(finalists)))]
        logger.debug(f"bottleneck {t.pair_label(pick)} gain={top_gain:.1f}")
        return PriorityList(frozenset([pick]))


BALANCERS = {
    "surplus": SurplusBalancer,
    "bottleneck": BottleneckBalancer,
}


def get_balancer(name: str, params: BalancerParams) -> Balancer:
    try:
        return BALANCERS[name](params)
    except KeyError:
        raise ValueError(f"Unknown balancer '{name}', expected one of {sorted(BALANCERS)}") from None


def compute_priorities(caps: FlowGraph, t: Topology, p: BalancerParams,
                       rng: np.random.Generator) -> PriorityList:
    return SurplusBalancer(p).compute(caps, t, rng)
