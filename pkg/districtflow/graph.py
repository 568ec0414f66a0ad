"""
Precinct graph: the immutable substrate districting plans are defined on.

Vertex attributes are held in plain tuples for fast per-vertex access inside sampler loops,
and as numpy arrays for vectorized diagnostics. Centroid aggregates are additionally kept as
fixed-point integers so that district centroids are an exact function of the member set.
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from districtflow.exceptions import DisconnectedGraphError, MalformedGraphError, ValidationError
from districtflow.validators import validate_graph_payload

logger = logging.getLogger(__name__)

FIXED_POINT_SCALE = 1 << 48


@dataclass(frozen=True, slots=True)
class Vertex:
    id: int
    pop: float
    area: float
    centroid: tuple[float, float]
    outer_boundary: float = 0.0


@dataclass(frozen=True, slots=True)
class Edge:
    u: int
    v: int
    shared: float = 1.0


class PrecinctGraph:
    """Connected undirected graph with population, area, embedding and boundary lengths."""

    def __init__(self, vertices, edges, shape=None):
        # type: (list[Vertex], list[Edge], tuple[int, int]|None) -> None
        """
        Build and validate a precinct graph.

        :param vertices: Vertices with dense ids 0..|V|-1 (any order)
        :param edges: Undirected edges, each listed once
        :param shape: Lattice (width, height) if the graph is a rook lattice
        :raises ValidationError: If ids are not dense or an edge is malformed
        :raises DisconnectedGraphError: If the graph is not connected
        """
        vertices = sorted(vertices, key=lambda x: x.id)
        if [x.id for x in vertices] != list(range(len(vertices))):
            raise MalformedGraphError("vertex ids must be unique and dense 0..|V|-1", "nodes")
        n = len(vertices)
        if n == 0:
            raise MalformedGraphError("graph has no vertices", "nodes")

        adjacency = [[] for _ in range(n)]  # type: list[list[int]]
        shared = {}  # type: dict[tuple[int, int], float]
        for e in edges:
            if e.u == e.v or not (0 <= e.u < n and 0 <= e.v < n):
                raise ValidationError(f"invalid edge ({e.u}, {e.v})", "invalid_edge", "edges")
            if (e.u, e.v) in shared:
                continue
            adjacency[e.u].append(e.v)
            adjacency[e.v].append(e.u)
            shared[(e.u, e.v)] = shared[(e.v, e.u)] = e.shared

        self.vertices = tuple(vertices)  # type: tuple[Vertex, ...]
        self.edges = tuple(Edge(u, v, shared[(u, v)]) for u, v in sorted(k for k in shared if k[0] < k[1]))
        self.adjacency = tuple(tuple(sorted(a)) for a in adjacency)  # type: tuple[tuple[int, ...], ...]
        self.shape = shape
        self._shared = shared

        self.pop = tuple(x.pop for x in vertices)
        self.area = tuple(x.area for x in vertices)
        self.outer_boundary = tuple(x.outer_boundary for x in vertices)
        self.centroids = tuple(x.centroid for x in vertices)
        # Fixed-point aggregates: exact, order independent sums
        self.pop_q = tuple(round(x.pop * FIXED_POINT_SCALE) for x in vertices)
        self.area_q = tuple(round(x.area * FIXED_POINT_SCALE) for x in vertices)
        self.moment_x_q = tuple(round(x.area * x.centroid[0] * FIXED_POINT_SCALE) for x in vertices)
        self.moment_y_q = tuple(round(x.area * x.centroid[1] * FIXED_POINT_SCALE) for x in vertices)
        self.shared_q = {k: round(s * FIXED_POINT_SCALE) for k, s in shared.items()}
        self.total_pop = float(sum(self.pop))
        self.total_outer_boundary = float(sum(self.outer_boundary))

        n_components = nx.number_connected_components(self.to_networkx())
        if n_components != 1:
            raise DisconnectedGraphError(n_components)

    def __len__(self):
        # type: () -> int
        return len(self.vertices)

    def __repr__(self):
        # type: () -> str
        return f"PrecinctGraph(vertices={len(self.vertices)}, edges={len(self.edges)}, shape={self.shape})"

    def neighbors(self, v):
        # type: (int) -> tuple[int, ...]
        return self.adjacency[v]

    def is_adjacent(self, u, v):
        # type: (int, int) -> bool
        return (u, v) in self._shared

    def shared(self, u, v):
        # type: (int, int) -> float
        """Shared boundary length of an edge."""
        return self._shared[(u, v)]

    def to_networkx(self):
        # type: () -> nx.Graph
        """Undirected networkx view with vertex and edge attributes."""
        g = nx.Graph()
        for x in self.vertices:
            g.add_node(x.id, pop=x.pop, area=x.area, centroid=x.centroid, outer_boundary=x.outer_boundary)
        g.add_edges_from((e.u, e.v, {"shared": e.shared}) for e in self.edges)
        return g

    @cached_property
    def centroid_array(self):
        # type: () -> np.ndarray
        """Vertex embedding as an (n, 2) array."""
        return np.array(self.centroids, dtype=float).reshape(len(self.vertices), 2)

    @cached_property
    def center(self):
        # type: () -> tuple[float, float]
        """Area-weighted centroid of the whole graph."""
        area = sum(self.area_q)
        return sum(self.moment_x_q) / area, sum(self.moment_y_q) / area


def build_lattice(width, height):
    # type: (int, int) -> PrecinctGraph
    """
    Build a rook-adjacent lattice with unit population, area and shared boundary.

    Vertex id is `row * width + col`, centroid is `(col, row)` and the outer boundary counts the
    exposed unit sides.

    :raises ValidationError: If a dimension is smaller than 2
    """
    if width < 2 or height < 2:
        msg = f"lattice dimensions must be at least 2, got {width}x{height}"
        raise ValidationError(msg, "invalid_argument")

    vertices = []
    edges = []
    for row in range(height):
        for col in range(width):
            vid = row * width + col
            exposed = (col == 0) + (col == width - 1) + (row == 0) + (row == height - 1)
            vertices.append(Vertex(vid, 1.0, 1.0, (float(col), float(row)), float(exposed)))
            if col + 1 < width:
                edges.append(Edge(vid, vid + 1, 1.0))
            if row + 1 < height:
                edges.append(Edge(vid, vid + width, 1.0))
    return PrecinctGraph(vertices, edges, shape=(width, height))


def load_graph(data):
    # type: (bytes|str) -> PrecinctGraph
    """
    Load a precinct graph from its JSON document.

    :raises GraphLoadError: On malformed input, duplicate ids, unknown vertices, asymmetric
        edges or a disconnected graph
    """
    try:
        payload = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedGraphError(f"graph document is not valid JSON: {e}") from e

    doc = validate_graph_payload(payload)
    vertices = [Vertex(n["id"], n["pop"], n["area"], n["centroid"], n["outer_boundary"]) for n in doc["nodes"]]
    edges = [Edge(u, v, s) for u, v, s in doc["edges"]]
    graph = PrecinctGraph(vertices, edges, shape=doc["shape"])
    logger.debug("Loaded %r", graph)
    return graph


def dump_graph(graph):
    # type: (PrecinctGraph) -> bytes
    """Serialize a precinct graph to its JSON document."""
    doc = {
        "nodes": [
            {
                "id": x.id,
                "pop": x.pop,
                "area": x.area,
                "centroid": list(x.centroid),
                "outer_boundary": x.outer_boundary,
            }
            for x in graph.vertices
        ],
        "edges": [{"u": e.u, "v": e.v, "shared": e.shared} for e in graph.edges],
    }
    if graph.shape is not None:
        doc["shape"] = list(graph.shape)
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")
