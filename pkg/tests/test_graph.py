"""Tests for the precinct graph model."""

import json

import networkx as nx
import pytest

from districtflow.exceptions import (
    AsymmetricEdgeError,
    DisconnectedGraphError,
    DuplicateIdError,
    MalformedGraphError,
    UnknownVertexError,
    ValidationError,
)
from districtflow.graph import (
    FIXED_POINT_SCALE,
    Edge,
    PrecinctGraph,
    Vertex,
    build_lattice,
    dump_graph,
    load_graph,
)
from tests.conftest import graph_bytes, graph_document, path_graph


class TestBuildLattice:
    """Test rook lattice construction."""

    def test_sizes(self, lattice_3x2):
        # type: (PrecinctGraph) -> None
        """Test vertex and edge counts."""
        assert len(lattice_3x2) == 6
        assert len(lattice_3x2.edges) == 7
        assert lattice_3x2.shape == (3, 2)

    def test_ids_and_centroids(self, lattice_3x2):
        # type: (PrecinctGraph) -> None
        """Test id = row * width + col and centroid = (col, row)."""
        assert lattice_3x2.centroids[4] == (1.0, 1.0)
        assert lattice_3x2.centroids[2] == (2.0, 0.0)
        assert lattice_3x2.neighbors(0) == (1, 3)
        assert lattice_3x2.neighbors(4) == (1, 3, 5)

    def test_outer_boundary_counts_exposed_sides(self, lattice_4x4):
        # type: (PrecinctGraph) -> None
        """Test corners expose 2 sides, edge cells 1 and interior cells 0."""
        assert lattice_4x4.outer_boundary[0] == 2.0
        assert lattice_4x4.outer_boundary[1] == 1.0
        assert lattice_4x4.outer_boundary[5] == 0.0
        assert lattice_4x4.total_outer_boundary == 16.0

    def test_unit_attributes(self, lattice_4x4):
        # type: (PrecinctGraph) -> None
        """Test unit population, area and shared lengths."""
        assert lattice_4x4.total_pop == 16.0
        assert set(lattice_4x4.area) == {1.0}
        assert lattice_4x4.shared(0, 1) == lattice_4x4.shared(1, 0) == 1.0

    def test_center(self, lattice_3x2):
        # type: (PrecinctGraph) -> None
        """Test the area weighted center of the lattice."""
        assert lattice_3x2.center == (1.0, 0.5)

    @pytest.mark.parametrize("width,height", [(1, 4), (4, 1), (0, 0)])
    def test_too_small(self, width, height):
        # type: (int, int) -> None
        """Test degenerate lattices are rejected."""
        with pytest.raises(ValidationError) as exc_info:
            build_lattice(width, height)
        assert exc_info.value.code == "invalid_argument"


class TestPrecinctGraph:
    """Test direct graph construction."""

    def test_adjacency_symmetric(self, lattice_4x4):
        # type: (PrecinctGraph) -> None
        """Test adjacency lists are symmetric and sorted."""
        for v, nbrs in enumerate(lattice_4x4.adjacency):
            assert list(nbrs) == sorted(nbrs)
            for w in nbrs:
                assert v in lattice_4x4.adjacency[w]
                assert lattice_4x4.is_adjacent(v, w)
        assert not lattice_4x4.is_adjacent(0, 5)

    def test_fixed_point_moments(self):
        # type: () -> None
        """Test fixed-point moments scale area times centroid."""
        graph = path_graph(3)
        assert graph.moment_x_q == (0, FIXED_POINT_SCALE, 2 * FIXED_POINT_SCALE)
        assert graph.area_q == (FIXED_POINT_SCALE,) * 3

    def test_duplicate_edges_ignored(self):
        # type: () -> None
        """Test an edge listed twice is kept once."""
        vertices = [Vertex(0, 1, 1, (0, 0)), Vertex(1, 1, 1, (1, 0))]
        graph = PrecinctGraph(vertices, [Edge(0, 1), Edge(0, 1)])
        assert len(graph.edges) == 1

    def test_disconnected(self):
        # type: () -> None
        """Test disconnected graphs are rejected."""
        vertices = [Vertex(i, 1, 1, (i, 0)) for i in range(3)]
        with pytest.raises(DisconnectedGraphError, match="2 components"):
            PrecinctGraph(vertices, [Edge(0, 1)])

    def test_empty(self):
        # type: () -> None
        """Test an empty graph is rejected."""
        with pytest.raises(MalformedGraphError):
            PrecinctGraph([], [])

    def test_non_dense_ids(self):
        # type: () -> None
        """Test vertex ids must be dense."""
        with pytest.raises(MalformedGraphError):
            PrecinctGraph([Vertex(0, 1, 1, (0, 0)), Vertex(2, 1, 1, (1, 0))], [Edge(0, 2)])

    def test_to_networkx(self, lattice_3x2):
        # type: (PrecinctGraph) -> None
        """Test the networkx view carries attributes."""
        g = lattice_3x2.to_networkx()
        assert isinstance(g, nx.Graph)
        assert g.number_of_nodes() == 6
        assert g.number_of_edges() == 7
        assert g.nodes[4]["centroid"] == (1.0, 1.0)
        assert g.edges[0, 1]["shared"] == 1.0

    def test_centroid_array(self, lattice_3x2):
        # type: (PrecinctGraph) -> None
        """Test the vectorized embedding."""
        arr = lattice_3x2.centroid_array
        assert arr.shape == (6, 2)
        assert arr[5].tolist() == [2.0, 1.0]


class TestLoadGraph:
    """Test loading graph documents."""

    def test_load(self):
        # type: () -> None
        """Test a valid document loads."""
        graph = load_graph(graph_bytes())
        assert len(graph) == 4
        assert graph.shape == (2, 2)
        assert graph.neighbors(0) == (1, 2)

    def test_load_from_str(self):
        # type: () -> None
        """Test text input is accepted."""
        assert len(load_graph(json.dumps(graph_document()))) == 4

    def test_dump_and_load(self, lattice_3x2):
        # type: (PrecinctGraph) -> None
        """Test a dumped lattice loads back with the same structure."""
        graph = load_graph(dump_graph(lattice_3x2))
        assert graph.edges == lattice_3x2.edges
        assert graph.centroids == lattice_3x2.centroids
        assert graph.outer_boundary == lattice_3x2.outer_boundary
        assert graph.shape == (3, 2)

    def test_invalid_json(self):
        # type: () -> None
        """Test invalid JSON is a malformed graph."""
        with pytest.raises(MalformedGraphError, match="not valid JSON"):
            load_graph(b"{nodes:")

    def test_unknown_vertex(self):
        # type: () -> None
        """Test edge to missing vertex."""
        edges = graph_document()["edges"] + [{"u": 0, "v": 4}]
        with pytest.raises(UnknownVertexError):
            load_graph(graph_bytes(edges=edges))

    def test_duplicate_id(self):
        # type: () -> None
        """Test duplicate vertex id."""
        nodes = graph_document()["nodes"]
        nodes[3]["id"] = 2
        with pytest.raises(DuplicateIdError):
            load_graph(graph_bytes(nodes=nodes))

    def test_asymmetric(self):
        # type: () -> None
        """Test asymmetric edge attributes."""
        edges = graph_document()["edges"] + [{"u": 2, "v": 0, "shared": 0.5}]
        with pytest.raises(AsymmetricEdgeError):
            load_graph(graph_bytes(edges=edges))

    def test_disconnected(self):
        # type: () -> None
        """Test a document whose graph is disconnected."""
        with pytest.raises(DisconnectedGraphError):
            load_graph(graph_bytes(edges=[{"u": 0, "v": 1}, {"u": 2, "v": 3}]))
