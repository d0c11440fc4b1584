"""
Final-stage key extraction: max-flow of secret key material from Alice to Bob.

Domain Context:
- Trusted nodes relay keys by XOR of adjacent pool keys, so key material between
  two terminals behaves like an undirected pipe of that capacity
- The A->B flow value is the end-to-end secret key volume

Business Rules:
- Capacities are nonnegative reals; missing pairs mean capacity 0
- Key material that cannot be pushed to Bob is reported as waste
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from src.domain.topology import TerminalPair

FLOW_TOLERANCE = 1e-9


@dataclass
class FlowGraph:
    """Terminal-level graph; terminal 0 is Alice, the last terminal is Bob"""
    size: int
    capacities: Dict[TerminalPair, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"A flow graph needs Alice and Bob, got {self.size} terminals")
        normalized = {}
        for (i, j), c in self.capacities.items():
            if i == j or not (0 <= i < self.size and 0 <= j < self.size):
                raise ValueError(f"Invalid terminal pair ({i}, {j})")
            if c < 0:
                raise ValueError(f"Capacity of ({i}, {j}) must be >= 0, got {c}")
            key = (i, j) if i < j else (j, i)
            normalized[key] = normalized.get(key, 0.0) + float(c)
        self.capacities = normalized

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.size - 1

    @property
    def terminals(self) -> range:
        return range(self.size)

    def pairs(self):
        return [(i, j) for i in range(self.size) for j in range(i + 1, self.size)]

    def capacity(self, i: int, j: int) -> float:
        return self.capacities.get((i, j) if i < j else (j, i), 0.0)

    def with_capacity(self, pair: TerminalPair, capacity: float) -> "FlowGraph":
        capacities = dict(self.capacities)
        capacities[pair if pair[0] < pair[1] else (pair[1], pair[0])] = capacity
        return FlowGraph(self.size, capacities)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.terminals)
        for (i, j), c in self.capacities.items():
            graph.add_edge(i, j, capacity=c)
        return graph


@dataclass(frozen=True)
class FlowResult:
    value: float
    flows: Mapping[TerminalPair, float]  # net flow from the lower to the higher terminal index


def residual_network(g: FlowGraph) -> nx.DiGraph:
    """Edmonds-Karp residual network; undirected edges become two opposed arcs"""
    return edmonds_karp(g.to_networkx(), g.source, g.sink)


def max_flow(g: FlowGraph) -> FlowResult:
    residual = residual_network(g)
    value = float(residual.graph["flow_value"])
    flows = {}
    for i, j in g.pairs():
        if residual.has_edge(i, j):
            net = residual[i][j]["flow"]
            flows[(i, j)] = float(net) if abs(net) > FLOW_TOLERANCE else 0.0
        else:
            flows[(i, j)] = 0.0
    return FlowResult(value=value, flows=flows)


def final_key_rate(flow_value: float, N: int) -> float:
    if N <= 0:
        raise ValueError(f"Round count must be positive, got {N}")
    return flow_value / N


def wasted_key(g: FlowGraph, flows: Mapping[TerminalPair, float]) -> Dict[TerminalPair, float]:
    return {pair: max(0.0, g.capacity(*pair) - abs(flows.get(pair, 0.0))) for pair in g.pairs()}


def total_waste(g: FlowGraph, flows: Mapping[TerminalPair, float]) -> float:
    return sum(wasted_key(g, flows).values())


def residual_reach(residual: nx.DiGraph, start: int, reverse: bool = False) -> set:
    """Nodes reachable from `start` (or reaching it when reverse) over unsaturated arcs"""
    open_arcs = residual.edge_subgraph(
        (u, v) for u, v, data in residual.edges(data=True) if data["capacity"] - data["flow"] > FLOW_TOLERANCE
    )
    if start not in open_arcs:
        return {start}
    reached = nx.ancestors(open_arcs, start) if reverse else nx.descendants(open_arcs, start)
    return reached | {start}
