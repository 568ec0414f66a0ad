"""
Districting plans, the single-node flip operator, conflicted edges and plan validity.

A `Plan` is single-owner mutable state. Samplers advance it in place with `Plan.flip` and
undo tentative proposals with `Plan.flipped`; the module level `apply_flip` returns a new plan.
"""

import csv
import io
import logging
from collections import deque
from contextlib import contextmanager
from functools import lru_cache
from typing import NamedTuple

from districtflow.exceptions import EmptyDistrictError, PlanFormatError, PreconditionError
from districtflow.fingerprint import MAX_DISTRICTS, PlanKey
from districtflow.graph import FIXED_POINT_SCALE, PrecinctGraph
from districtflow.schema import ValiditySpec
from districtflow.validators import validate_plan_rows

logger = logging.getLogger(__name__)


class Move(NamedTuple):
    """A member of N(ξ): vertex `vertex` takes label `label` via the flip (`source`, `vertex`)."""

    vertex: int
    label: int
    source: int

    @property
    def flip(self):
        # type: () -> tuple[int, int]
        return self.source, self.vertex


class NeighborPlan(NamedTuple):
    flip: tuple[int, int]
    plan: "Plan"


@lru_cache(maxsize=64)
def _bounds(validity):
    # type: (ValiditySpec) -> tuple[float, float, bool]
    """District bounds in the units the plan caches use (member counts or fixed-point population)."""
    by_count = validity.measure == "count"
    scale = 1 if by_count else FIXED_POINT_SCALE
    lo = validity.pop_min * scale
    hi = float("inf") if validity.pop_max is None else validity.pop_max * scale
    return lo, hi, by_count


class Plan:
    """District labeling with incrementally maintained district aggregates and cut statistics."""

    def __init__(self, graph, labels, n_districts=None):
        # type: (PrecinctGraph, list[int]|tuple[int, ...], int|None) -> None
        """
        Create a plan from labels in vertex-id order.

        :param graph: Precinct graph the plan lives on
        :param labels: District label 1..n_districts per vertex
        :param n_districts: District count (defaults to the largest label)
        :raises PlanFormatError: If labels do not match the graph or the district range
        """
        labels = list(labels)
        if len(labels) != len(graph):
            raise PlanFormatError(f"expected {len(graph)} labels, got {len(labels)}")
        if n_districts is None:
            n_districts = max(labels)
        if not 1 <= n_districts <= MAX_DISTRICTS:
            raise PlanFormatError(f"district count must be between 1 and {MAX_DISTRICTS}, got {n_districts}")
        for label in labels:
            if not isinstance(label, int) or not 1 <= label <= n_districts:
                raise PlanFormatError(f"label {label!r} outside 1..{n_districts}")

        self.graph = graph
        self.n_districts = n_districts
        self._labels = labels
        aggregates = self.fresh_aggregates()
        self._count = aggregates["count"]
        self._pop_q = aggregates["pop_q"]
        self._area_q = aggregates["area_q"]
        self._moment_x_q = aggregates["moment_x_q"]
        self._moment_y_q = aggregates["moment_y_q"]
        self._cut_count = aggregates["cut_count"]
        self._cut_shared_q = aggregates["cut_shared_q"]
        self._moves = None  # type: tuple[ValiditySpec, list[Move]]|None

    def copy(self):
        # type: () -> Plan
        clone = Plan.__new__(Plan)
        clone.graph = self.graph
        clone.n_districts = self.n_districts
        clone._labels = list(self._labels)
        clone._count = list(self._count)
        clone._pop_q = list(self._pop_q)
        clone._area_q = list(self._area_q)
        clone._moment_x_q = list(self._moment_x_q)
        clone._moment_y_q = list(self._moment_y_q)
        clone._cut_count = self._cut_count
        clone._cut_shared_q = self._cut_shared_q
        clone._moves = None
        return clone

    def __repr__(self):
        # type: () -> str
        sizes = "/".join(str(c) for c in self._count[1:])
        return f"Plan(n_districts={self.n_districts}, sizes={sizes}, cut={self._cut_count})"

    def __eq__(self, other):
        # type: (object) -> bool
        if isinstance(other, Plan):
            return self.graph is other.graph and self._labels == other._labels
        return NotImplemented

    def __hash__(self):
        # type: () -> int
        return hash(bytes(self._labels))

    ################################################################################################
    # Queries                                                                                      #
    ################################################################################################

    @property
    def labels(self):
        # type: () -> tuple[int, ...]
        return tuple(self._labels)

    def label(self, v):
        # type: (int) -> int
        return self._labels[v]

    def fingerprint(self):
        # type: () -> PlanKey
        return PlanKey(bytes(self._labels))

    def members(self, i):
        # type: (int) -> list[int]
        return [v for v, label in enumerate(self._labels) if label == i]

    def district_size(self, i):
        # type: (int) -> int
        return self._count[i]

    def district_population(self, i):
        # type: (int) -> float
        return self._pop_q[i] / FIXED_POINT_SCALE

    def district_area(self, i):
        # type: (int) -> float
        return self._area_q[i] / FIXED_POINT_SCALE

    def centroid(self, i):
        # type: (int) -> tuple[float, float]
        """Area weighted centroid of district i."""
        if not self._count[i]:
            raise EmptyDistrictError(i)
        area = self._area_q[i]
        return self._moment_x_q[i] / area, self._moment_y_q[i] / area

    def centroid_with(self, i, v, joining):
        # type: (int, int, bool) -> tuple[float, float]
        """
        Centroid of district i after vertex v joins (or leaves) it, without mutating the plan.

        :raises EmptyDistrictError: If the district would be empty
        """
        g = self.graph
        sign = 1 if joining else -1
        area = self._area_q[i] + sign * g.area_q[v]
        if (self._count[i] + sign) <= 0 or area <= 0:
            raise EmptyDistrictError(i)
        return (
            (self._moment_x_q[i] + sign * g.moment_x_q[v]) / area,
            (self._moment_y_q[i] + sign * g.moment_y_q[v]) / area,
        )

    @property
    def cut_edge_count(self):
        # type: () -> int
        """Number of undirected edges whose endpoints carry different labels."""
        return self._cut_count

    @property
    def cut_shared_length(self):
        # type: () -> float
        """Total shared boundary length along cut edges."""
        return self._cut_shared_q / FIXED_POINT_SCALE

    def district_populations(self):
        # type: () -> list[float]
        return [self.district_population(i) for i in range(1, self.n_districts + 1)]

    def aggregates(self):
        # type: () -> dict
        """Snapshot of the incrementally maintained caches."""
        return {
            "count": list(self._count),
            "pop_q": list(self._pop_q),
            "area_q": list(self._area_q),
            "moment_x_q": list(self._moment_x_q),
            "moment_y_q": list(self._moment_y_q),
            "cut_count": self._cut_count,
            "cut_shared_q": self._cut_shared_q,
        }

    def fresh_aggregates(self):
        # type: () -> dict
        """Recompute all caches from the labels."""
        g = self.graph
        size = self.n_districts + 1
        count, pop, area, mx, my = [0] * size, [0] * size, [0] * size, [0] * size, [0] * size
        for v, label in enumerate(self._labels):
            count[label] += 1
            pop[label] += g.pop_q[v]
            area[label] += g.area_q[v]
            mx[label] += g.moment_x_q[v]
            my[label] += g.moment_y_q[v]
        cut = 0
        cut_shared = 0
        for e in g.edges:
            if self._labels[e.u] != self._labels[e.v]:
                cut += 1
                cut_shared += g.shared_q[(e.u, e.v)]
        return {
            "count": count,
            "pop_q": pop,
            "area_q": area,
            "moment_x_q": mx,
            "moment_y_q": my,
            "cut_count": cut,
            "cut_shared_q": cut_shared,
        }

    ################################################################################################
    # Mutation                                                                                     #
    ################################################################################################

    def flip(self, u, v):
        # type: (int, int) -> int
        """
        Apply F_(u,v) in place: vertex v takes the label of vertex u.

        :return: Previous label of v
        :raises PreconditionError: If u, v are not adjacent or carry the same label
        """
        if not self.graph.is_adjacent(u, v):
            raise PreconditionError(f"vertices {u} and {v} are not adjacent")
        old = self._labels[v]
        if self._labels[u] == old:
            raise PreconditionError(f"vertices {u} and {v} carry the same label {old}")
        self.move(v, self._labels[u])
        return old

    @contextmanager
    def flipped(self, u, v):
        """Apply F_(u,v) for the duration of the block, then restore the label of v."""
        old = self.flip(u, v)
        try:
            yield self
        finally:
            self.move(v, old)

    def move(self, v, new):
        # type: (int, int) -> None
        """Relabel a single vertex, touching only the caches of the two involved districts."""
        labels = self._labels
        old = labels[v]
        if old == new:
            return
        g = self.graph
        self._count[old] -= 1
        self._count[new] += 1
        pq, aq, mx, my = g.pop_q[v], g.area_q[v], g.moment_x_q[v], g.moment_y_q[v]
        self._pop_q[old] -= pq
        self._pop_q[new] += pq
        self._area_q[old] -= aq
        self._area_q[new] += aq
        self._moment_x_q[old] -= mx
        self._moment_x_q[new] += mx
        self._moment_y_q[old] -= my
        self._moment_y_q[new] += my
        for w in g.adjacency[v]:
            lw = labels[w]
            if lw == old:
                self._cut_count += 1
                self._cut_shared_q += g.shared_q[(v, w)]
            elif lw == new:
                self._cut_count -= 1
                self._cut_shared_q -= g.shared_q[(v, w)]
        labels[v] = new
        self._moves = None

    ################################################################################################
    # Validity                                                                                     #
    ################################################################################################

    def _within(self, amount, validity):
        # type: (int, ValiditySpec) -> bool
        lo, hi, _ = _bounds(validity)
        return lo <= amount <= hi

    def move_is_valid(self, v, new, validity):
        # type: (int, int, ValiditySpec) -> bool
        """Whether relabeling v to `new` keeps a valid plan valid."""
        old = self._labels[v]
        if new == old or self._count[old] == 1:
            return False
        _, _, by_count = _bounds(validity)
        if by_count:
            shrunk, grown = self._count[old] - 1, self._count[new] + 1
        else:
            pq = self.graph.pop_q[v]
            shrunk, grown = self._pop_q[old] - pq, self._pop_q[new] + pq
        if not (self._within(shrunk, validity) and self._within(grown, validity)):
            return False
        if validity.require_connected:
            if self._count[new] and not any(self._labels[w] == new for w in self.graph.adjacency[v]):
                return False
            if not self._removable(v):
                return False
        if validity.require_simply_connected and not self._hole_free(new, extra=v):
            return False
        return True

    def _removable(self, v):
        # type: (int) -> bool
        """Whether the district of v stays connected without v."""
        labels = self._labels
        adjacency = self.graph.adjacency
        old = labels[v]
        same = [w for w in adjacency[v] if labels[w] == old]
        if len(same) <= 1:
            return len(same) == 1
        # Once all same-district neighbors are reached the remainder is connected
        pending = set(same[1:])
        seen = {v, same[0]}
        queue = deque([same[0]])
        while queue:
            x = queue.popleft()
            for w in adjacency[x]:
                if w not in seen and labels[w] == old:
                    seen.add(w)
                    pending.discard(w)
                    if not pending:
                        return True
                    queue.append(w)
        return False

    def _hole_free(self, district, extra=None):
        # type: (int, int|None) -> bool
        """Whether every component of the district's complement touches the outer boundary."""
        labels = self._labels
        adjacency = self.graph.adjacency
        outer = self.graph.outer_boundary

        def inside(x):
            # type: (int) -> bool
            return x == extra or labels[x] == district

        seen = set()
        for start in range(len(labels)):
            if start in seen or inside(start):
                continue
            seen.add(start)
            queue = deque([start])
            touches = False
            while queue:
                x = queue.popleft()
                touches = touches or outer[x] > 0
                for w in adjacency[x]:
                    if w not in seen and not inside(w):
                        seen.add(w)
                        queue.append(w)
            if not touches:
                return False
        return True

    def _district_connected(self, i):
        # type: (int) -> bool
        members = self.members(i)
        if not members:
            return False
        labels = self._labels
        adjacency = self.graph.adjacency
        seen = {members[0]}
        queue = deque([members[0]])
        while queue:
            x = queue.popleft()
            for w in adjacency[x]:
                if w not in seen and labels[w] == i:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(members)

    def is_valid(self, validity):
        # type: (ValiditySpec) -> bool
        """Whether all districts are nonempty, within bounds and (optionally) (simply) connected."""
        _, _, by_count = _bounds(validity)
        for i in range(1, self.n_districts + 1):
            if not self._count[i]:
                return False
            if not self._within(self._count[i] if by_count else self._pop_q[i], validity):
                return False
            if validity.require_connected and not self._district_connected(i):
                return False
            if validity.require_simply_connected and not self._hole_free(i):
                return False
        return True

    def candidate_moves(self, validity):
        # type: (ValiditySpec) -> list[Move]
        """
        The valid neighborhood N(ξ) as moves, deduplicated by resulting labeling.

        Each move carries the smallest-id source vertex generating it. Order is by (vertex, label).
        """
        if self._moves is not None and self._moves[0] == validity:
            return self._moves[1]
        labels = self._labels
        adjacency = self.graph.adjacency
        sources = {}  # type: dict[tuple[int, int], int]
        for v, lv in enumerate(labels):
            for w in adjacency[v]:
                lw = labels[w]
                if lw != lv and (v, lw) not in sources:
                    sources[(v, lw)] = w
        moves = [
            Move(v, label, sources[(v, label)])
            for v, label in sorted(sources)
            if self.move_is_valid(v, label, validity)
        ]
        self._moves = (validity, moves)
        return moves

    def conflicted_edges(self, validity):
        # type: (ValiditySpec) -> frozenset[tuple[int, int]]
        """C(ξ): ordered pairs (u, v) with different labels whose flip yields a valid plan."""
        labels = self._labels
        adjacency = self.graph.adjacency
        return frozenset(
            (u, m.vertex)
            for m in self.candidate_moves(validity)
            for u in adjacency[m.vertex]
            if labels[u] == m.label
        )


####################################################################################################
# Functional API                                                                                   #
####################################################################################################


def apply_flip(plan, edge):
    # type: (Plan, tuple[int, int]) -> Plan
    """Return F_(u,v)(ξ) as a new plan; the input plan is not modified."""
    u, v = edge
    result = plan.copy()
    result.flip(u, v)
    return result


def conflicted_edges(plan, validity):
    # type: (Plan, ValiditySpec) -> frozenset[tuple[int, int]]
    return plan.conflicted_edges(validity)


def is_valid(plan, validity):
    # type: (Plan, ValiditySpec) -> bool
    return plan.is_valid(validity)


def valid_neighborhood(plan, validity):
    # type: (Plan, ValiditySpec) -> list[NeighborPlan]
    """N(ξ) as materialized plans, each with a generating flip."""
    return [NeighborPlan(m.flip, apply_flip(plan, m.flip)) for m in plan.candidate_moves(validity)]


def district_graph(plan, validity):
    # type: (Plan, ValiditySpec) -> frozenset[tuple[int, int]]
    """E_d(ξ): district pairs (i, j), i < j, sharing at least one valid conflicted-edge orientation."""
    pairs = set()
    for m in plan.candidate_moves(validity):
        old = plan.label(m.vertex)
        pairs.add((min(old, m.label), max(old, m.label)))
    return frozenset(pairs)


def district_centroid(plan, i):
    # type: (Plan, int) -> tuple[float, float]
    return plan.centroid(i)


####################################################################################################
# Constructors and plan files                                                                      #
####################################################################################################


def horizontal_stripes(graph, n_districts):
    # type: (PrecinctGraph, int) -> Plan
    """Lattice plan of horizontal bands, district 1 at the top (largest row)."""
    width, height = _lattice_shape(graph)
    labels = [0] * len(graph)
    for v in range(len(graph)):
        row = v // width
        labels[v] = (height - 1 - row) * n_districts // height + 1
    return Plan(graph, labels, n_districts)


def vertical_stripes(graph, n_districts):
    # type: (PrecinctGraph, int) -> Plan
    """Lattice plan of vertical bands, district 1 at the left (column 0)."""
    width, _ = _lattice_shape(graph)
    labels = [(v % width) * n_districts // width + 1 for v in range(len(graph))]
    return Plan(graph, labels, n_districts)


def _lattice_shape(graph):
    # type: (PrecinctGraph) -> tuple[int, int]
    if graph.shape is None:
        raise PlanFormatError("stripe plans require a lattice graph")
    return graph.shape


def read_plan_csv(text, graph, n_districts):
    # type: (str, PrecinctGraph, int) -> Plan
    """Parse a plan file with header `vertex_id,district`."""
    reader = csv.DictReader(io.StringIO(text))
    labels = validate_plan_rows(reader.fieldnames, list(reader), len(graph), n_districts)
    return Plan(graph, labels, n_districts)


def write_plan_csv(plan):
    # type: (Plan) -> str
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["vertex_id", "district"])
    writer.writerows(enumerate(plan.labels))
    return out.getvalue()
