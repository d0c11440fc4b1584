"""
Lattice topology for the repeater / trusted-node network.

Domain Context:
- The network is an (S+2)x(S+2) grid; Alice and Bob sit at opposite corners
  of the inner SxS lattice, on its main diagonal
- Every node is Alice, Bob, a trusted node (TN) or a quantum repeater
- Terminals are ordered T_0 = Alice, T_1..T_n trusted nodes, T_{n+1} = Bob

Business Rules:
- Links join 4-neighbour grid positions only and have a positive length
- Trusted nodes sit on the grid, never on Alice/Bob, never twice on one position
- diag-a-b-c presets put both TNs on the main diagonal with Manhattan gaps a, b, c

Architecture:
- Topology is immutable once built and is shared by every simulated round
- Presets are resolved to coordinates for the requested lattice size
"""
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from src.exceptions import PlacementError

Position = Tuple[int, int]
TerminalPair = Tuple[int, int]

PRESET_ALIASES = {
    "diag-4-4-4": "2tn-ideal",
    "none": "no-tn",
}


class NodeKind(Enum):
    ALICE = "alice"
    BOB = "bob"
    TRUSTED = "trusted"
    REPEATER = "repeater"


class PlacementPreset(Enum):
    NO_TN = "no-tn"
    ONE_TN_IDEAL = "1tn-ideal"
    OFF_CENTER = "off-center"
    TWO_TN_IDEAL = "2tn-ideal"
    TWO_TN_CORNER = "2tn-corner"
    DIAG_2_6_4 = "diag-2-6-4"
    DIAG_4_2_6 = "diag-4-2-6"
    OFF_DIAG = "off-diag"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, name: str) -> "PlacementPreset":
        key = name.strip().lower()
        key = PRESET_ALIASES.get(key, key)
        for preset in cls:
            if preset.value == key:
                return preset
        raise PlacementError(f"Unknown placement preset '{name}'")


@dataclass(frozen=True)
class Link:
    a: Position
    b: Position
    length_km: float

    @property
    def key(self) -> Tuple[Position, Position]:
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class Topology:
    """
    Grid network with its terminal ordering.

    System Constraints:
    - terminals[0] is Alice, terminals[-1] is Bob, everything between is a TN
    - link keys are ordered position pairs (smaller position first)
    """
    grid_side: int
    node_kind: Mapping[Position, NodeKind]
    links: Tuple[Link, ...]
    terminals: Tuple[Position, ...]

    @property
    def lattice_size(self) -> int:
        return self.grid_side - 2

    @property
    def alice(self) -> Position:
        return self.terminals[0]

    @property
    def bob(self) -> Position:
        return self.terminals[-1]

    @property
    def trusted_nodes(self) -> Tuple[Position, ...]:
        return self.terminals[1:-1]

    @cached_property
    def link_index(self) -> Dict[Tuple[Position, Position], int]:
        return {link.key: i for i, link in enumerate(self.links)}

    @cached_property
    def adjacency(self) -> Dict[Position, Tuple[Tuple[Position, int], ...]]:
        """Neighbour position and link id for every node"""
        adjacent: Dict[Position, List[Tuple[Position, int]]] = {pos: [] for pos in self.node_kind}
        for i, link in enumerate(self.links):
            adjacent[link.a].append((link.b, i))
            adjacent[link.b].append((link.a, i))
        return {pos: tuple(items) for pos, items in adjacent.items()}

    @cached_property
    def terminal_index(self) -> Dict[Position, int]:
        return {pos: i for i, pos in enumerate(self.terminals)}

    def is_terminal(self, pos: Position) -> bool:
        return pos in self.terminal_index

    def link_between(self, u: Position, v: Position) -> int:
        return self.link_index[_ordered(u, v)]

    def terminal_pairs(self) -> List[TerminalPair]:
        n = len(self.terminals)
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def terminal_distance(self, i: int, j: int) -> int:
        return manhattan_distance(self, self.terminals[i], self.terminals[j])

    def terminal_label(self, i: int) -> str:
        if i == 0:
            return "A"
        if i == len(self.terminals) - 1:
            return "B"
        return f"T{i}"

    def pair_label(self, pair: TerminalPair) -> str:
        return f"{self.terminal_label(pair[0])}-{self.terminal_label(pair[1])}"


def _position(raw: Sequence[int]) -> Position:
    return (int(raw[0]), int(raw[1]))


def _ordered(u: Position, v: Position) -> Tuple[Position, Position]:
    return (u, v) if u <= v else (v, u)


def manhattan_distance(t: Topology, u: Position, v: Position) -> int:
    return abs(u[0] - v[0]) + abs(u[1] - v[1])


def neighbors(t: Topology, u: Position) -> Set[Position]:
    return {v for v, _ in t.adjacency[u]}


def _diagonal(S: int, distance: int) -> Position:
    """Inner-diagonal position at the given Manhattan distance from Alice"""
    if distance % 2 or not 0 < distance < 2 * (S - 1):
        raise PlacementError(
            f"No diagonal position at distance {distance} from Alice for lattice size {S}"
        )
    step = distance // 2
    return (1 + step, 1 + step)


def _diagonal_chain(S: int, gaps: Sequence[int]) -> List[Position]:
    if sum(gaps) != 2 * (S - 1):
        raise PlacementError(
            f"Gaps {'-'.join(map(str, gaps))} need dist(A,B)={sum(gaps)}, "
            f"lattice size {S} gives {2 * (S - 1)}"
        )
    positions = []
    travelled = 0
    for gap in gaps[:-1]:
        travelled += gap
        positions.append(_diagonal(S, travelled))
    return positions


def preset_positions(preset: PlacementPreset, S: int,
                     custom: Optional[Iterable[Sequence[int]]] = None) -> List[Position]:
    """Trusted-node coordinates of a preset on the (S+2)-sided grid"""
    if preset is PlacementPreset.NO_TN:
        return []
    if preset is PlacementPreset.CUSTOM:
        return [_position(p) for p in (custom or [])]
    if preset is PlacementPreset.ONE_TN_IDEAL:
        return [_diagonal(S, S - 1)]
    if preset is PlacementPreset.OFF_CENTER:
        return [_diagonal(S, 4)]
    if preset is PlacementPreset.TWO_TN_IDEAL:
        span = 2 * (S - 1)
        if span % 3:
            raise PlacementError(f"Lattice size {S} cannot be split into three equal diagonal gaps")
        return _diagonal_chain(S, [span // 3] * 3)
    if preset is PlacementPreset.TWO_TN_CORNER:
        return [(1, S), (S, 1)]
    if preset is PlacementPreset.DIAG_2_6_4:
        return _diagonal_chain(S, [2, 6, 4])
    if preset is PlacementPreset.DIAG_4_2_6:
        return _diagonal_chain(S, [4, 2, 6])
    if preset is PlacementPreset.OFF_DIAG:
        first = _diagonal(S, 2)
        half = S - 2  # remaining A-B distance split evenly between T1-T2 and T2-B
        down = half // 2
        second = (first[0] + down, first[1] + half - down)
        if second[0] == second[1]:
            raise PlacementError(f"off-diag has no off-diagonal equidistant position for lattice size {S}")
        return [first, second]
    raise PlacementError(f"Unsupported preset {preset}")


def _validate_placement(positions: List[Position], side: int,
                        alice: Position, bob: Position) -> None:
    seen = set()
    for pos in positions:
        if not (0 <= pos[0] < side and 0 <= pos[1] < side):
            raise PlacementError(f"Trusted node {pos} is off the {side}x{side} grid")
        if pos in (alice, bob):
            raise PlacementError(f"Trusted node {pos} coincides with Alice or Bob")
        if pos in seen:
            raise PlacementError(f"Trusted node {pos} is placed twice")
        seen.add(pos)


def build_topology(S: int, preset: PlacementPreset, L: float = 1.0,
                   custom_positions: Optional[Iterable[Sequence[int]]] = None,
                   link_lengths: Optional[Mapping[Tuple[Position, Position], float]] = None) -> Topology:
    """
    Build the embedded lattice with trusted nodes placed per preset.

    Args:
        S: inner lattice size, the grid has S+2 nodes per side
        preset: trusted-node placement
        L: uniform link length in km
        custom_positions: (row, col) pairs, used by the custom preset
        link_lengths: per-link length overrides keyed by position pairs
    """
    if S < 2:
        raise ValueError(f"Lattice size must be >= 2, got {S}")
    if L <= 0:
        raise ValueError(f"Link length must be positive, got {L}")

    side = S + 2
    alice, bob = (1, 1), (S, S)
    trusted = preset_positions(preset, S, custom_positions)
    _validate_placement(trusted, side, alice, bob)

    grid = nx.grid_2d_graph(side, side)
    node_kind = {pos: NodeKind.REPEATER for pos in grid.nodes}
    node_kind[alice] = NodeKind.ALICE
    node_kind[bob] = NodeKind.BOB
    for pos in trusted:
        node_kind[pos] = NodeKind.TRUSTED

    overrides = {_ordered(_position(u), _position(v)): float(km) for (u, v), km in (link_lengths or {}).items()}
    links = []
    for u, v in sorted(_ordered(u, v) for u, v in grid.edges):
        length = overrides.pop((u, v), L)
        if length <= 0:
            raise ValueError(f"Link {u}-{v} must have a positive length, got {length}")
        links.append(Link(u, v, length))
    if overrides:
        raise PlacementError(f"Length overrides for non-adjacent positions: {sorted(overrides)}")

    return Topology(
        grid_side=side,
        node_kind=node_kind,
        links=tuple(links),
        terminals=(alice, *trusted, bob),
    )
