"""
Shortest-path search over the links established in one round.

Domain Context:
- A candidate path joins two terminals through quantum repeaters only
- Paths compete for links: every link carries one entangled pair per round

Business Rules:
- Path length is counted in hops; k = hops - 1 repeaters perform swapping
- Terminals other than the path endpoints are never crossed
- Among equally short paths the choice is uniform over paths
- Greedy selection serves pairs in order of terminal distance and exhausts
  each pair, removing the links of every path it takes, before the next

System Constraints:
- Searches run on a working copy of the round state; the caller's state is untouched
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.domain.entanglement import RoundLinkState
from src.domain.topology import Position, TerminalPair, Topology, NodeKind
from src.exceptions import SimulationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidatePath:
    endpoints: TerminalPair
    nodes: Tuple[Position, ...]
    links: Tuple[int, ...]

    @property
    def k(self) -> int:
        """Repeater count"""
        return len(self.links) - 1

    @property
    def hops(self) -> int:
        return len(self.links)

    @property
    def interior(self) -> Tuple[Position, ...]:
        return self.nodes[1:-1]


@dataclass
class SearchTree:
    """BFS layers from one terminal with shortest-path counts per node"""
    source: Position
    distance: Dict[Position, int] = field(default_factory=dict)
    count: Dict[Position, int] = field(default_factory=dict)
    parents: Dict[Position, List[Tuple[Position, int]]] = field(default_factory=dict)

    def reaches(self, pos: Position) -> bool:
        return pos in self.distance

    def sample_path(self, target: Position, rng: np.random.Generator) -> Tuple[Tuple[Position, ...], Tuple[int, ...]]:
        """Walk back from target, choosing each parent in proportion to its path count"""
        nodes = [target]
        links = []
        current = target
        while current != self.source:
            options = self.parents[current]
            if len(options) == 1:
                parent, link_id = options[0]
            else:
                weights = np.array([self.count[p] for p, _ in options], dtype=float)
                parent, link_id = options[rng.choice(len(options), p=weights / weights.sum())]
            nodes.append(parent)
            links.append(link_id)
            current = parent
        nodes.reverse()
        links.reverse()
        return tuple(nodes), tuple(links)


def search_from(state: RoundLinkState, t: Topology, source: Position) -> SearchTree:
    """
    Breadth-first search over established links.

    Terminals are reached but not expanded, so every discovered path has
    repeaters as interior nodes.
    """
    tree = SearchTree(source=source)
    tree.distance[source] = 0
    tree.count[source] = 1
    queue = deque([source])
    alive = state.alive
    while queue:
        u = queue.popleft()
        if u != source and t.is_terminal(u):
            continue
        du = tree.distance[u]
        for v, link_id in t.adjacency[u]:
            if not alive[link_id]:
                continue
            dv = tree.distance.get(v)
            if dv is None:
                tree.distance[v] = du + 1
                tree.count[v] = tree.count[u]
                tree.parents[v] = [(u, link_id)]
                queue.append(v)
            elif dv == du + 1:
                tree.count[v] += tree.count[u]
                tree.parents[v].append((u, link_id))
    return tree


def _normalize(pair: Sequence[int]) -> TerminalPair:
    i, j = int(pair[0]), int(pair[1])
    return (i, j) if i < j else (j, i)


def shortest_path(state: RoundLinkState, t: Topology, pair: TerminalPair,
                  rng: np.random.Generator) -> Optional[CandidatePath]:
    i, j = _normalize(pair)
    source, target = t.terminals[i], t.terminals[j]
    tree = search_from(state, t, source)
    if not tree.reaches(target):
        return None
    nodes, links = tree.sample_path(target, rng)
    return CandidatePath(endpoints=(i, j), nodes=nodes, links=links)


def exhaust_pair(state: RoundLinkState, t: Topology, pair: TerminalPair,
                 rng: np.random.Generator) -> List[CandidatePath]:
    """Take shortest paths for one pair until it is disconnected, consuming links in place"""
    selected: List[CandidatePath] = []
    while True:
        path = shortest_path(state, t, pair, rng)
        if path is None:
            return selected
        state.consume(path.links)
        selected.append(path)


def distance_order(t: Topology, pairs: Iterable[TerminalPair],
                   rng: np.random.Generator) -> List[TerminalPair]:
    """Pairs by terminal Manhattan distance, equal distances in random order"""
    eligible = sorted({_normalize(p) for p in pairs})
    if len(eligible) < 2:
        return eligible
    keys = rng.random(len(eligible))
    order = sorted(range(len(eligible)), key=lambda n: (t.terminal_distance(*eligible[n]), keys[n]))
    return [eligible[n] for n in order]


def greedy_select(state: RoundLinkState, t: Topology, pairs: Iterable[TerminalPair],
                  rng: np.random.Generator) -> List[CandidatePath]:
    """
    Serve pairs nearest first, exhausting each before moving to the next.

    Consumes links from `state` in place. A near pair keeps taking longer
    detours once its short paths are gone, ahead of any farther pair.
    """
    selected: List[CandidatePath] = []
    for pair in distance_order(t, pairs, rng):
        selected.extend(exhaust_pair(state, t, pair, rng))
    return selected


def attempt_swapping(paths: List[CandidatePath], R: float,
                     rng: np.random.Generator) -> List[CandidatePath]:
    """Each path survives with probability R^k; a failed swap discards the whole path"""
    if not 0.0 <= R <= 1.0:
        raise ValueError(f"BSM success probability must be in [0, 1], got {R}")
    if not paths:
        return []
    draws = rng.random(len(paths))
    return [path for path, u in zip(paths, draws) if u < R ** path.k]


def validate_paths(paths: List[CandidatePath], state: RoundLinkState, t: Topology) -> None:
    """Raise SimulationError unless paths are link-disjoint, established and repeater-interior"""
    used = set()
    for path in paths:
        i, j = path.endpoints
        if path.nodes[0] != t.terminals[i] or path.nodes[-1] != t.terminals[j]:
            raise SimulationError(f"Path {path.nodes} does not join {t.pair_label(path.endpoints)}")
        if len(path.nodes) != len(path.links) + 1:
            raise SimulationError(f"Path {path.nodes} has {len(path.links)} links")
        for node in path.interior:
            if t.node_kind[node] is not NodeKind.REPEATER:
                raise SimulationError(f"Path {t.pair_label(path.endpoints)} crosses terminal {node}")
        for u, v, link_id in zip(path.nodes, path.nodes[1:], path.links):
            if t.link_between(u, v) != link_id:
                raise SimulationError(f"Link {link_id} does not join {u} and {v}")
            if link_id not in state:
                raise SimulationError(f"Link {u}-{v} was not established this round")
            if link_id in used:
                raise SimulationError(f"Link {u}-{v} used by more than one path")
            used.add(link_id)
