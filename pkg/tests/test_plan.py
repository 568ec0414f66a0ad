"""Tests for plans, the flip operator and plan validity."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from districtflow.exceptions import EmptyDistrictError, PlanFormatError, PreconditionError
from districtflow.graph import build_lattice
from districtflow.plan import (
    Move,
    Plan,
    apply_flip,
    conflicted_edges,
    district_centroid,
    district_graph,
    horizontal_stripes,
    is_valid,
    read_plan_csv,
    valid_neighborhood,
    vertical_stripes,
    write_plan_csv,
)
from districtflow.schema import ValiditySpec
from tests.conftest import BOUNDS_3X2, BOUNDS_4X4, UNBOUNDED, path_graph

LATTICE_4X4 = build_lattice(4, 4)


class TestConstruction:
    """Test plan construction and stripe constructors."""

    def test_wrong_length(self):
        # type: () -> None
        """Test label count must match the graph."""
        with pytest.raises(PlanFormatError, match="expected 3 labels"):
            Plan(path_graph(3), [1, 2])

    @pytest.mark.parametrize("labels", [[0, 1, 2], [1, 3, 2], [1, 1.0, 2]])
    def test_label_out_of_range(self, labels):
        # type: (list) -> None
        """Test labels must be integers in 1..n_districts."""
        with pytest.raises(PlanFormatError):
            Plan(path_graph(3), labels, 2)

    def test_too_many_districts(self):
        # type: () -> None
        """Test the district count upper limit."""
        with pytest.raises(PlanFormatError, match="between 1 and 255"):
            Plan(path_graph(3), [1, 1, 1], 256)

    def test_default_district_count(self):
        # type: () -> None
        """Test the district count defaults to the largest label."""
        assert Plan(path_graph(3), [1, 3, 2]).n_districts == 3

    def test_horizontal_stripes(self, lattice_4x4):
        # type: (object) -> None
        """Test district 1 occupies the top rows."""
        plan = horizontal_stripes(lattice_4x4, 2)
        assert plan.labels == (2,) * 8 + (1,) * 8
        assert plan.cut_edge_count == 4
        assert plan.centroid(1) == (1.5, 2.5)
        assert plan.centroid(2) == (1.5, 0.5)

    def test_vertical_stripes(self, lattice_4x4):
        # type: (object) -> None
        """Test district 1 occupies the left columns."""
        plan = vertical_stripes(lattice_4x4, 2)
        assert plan.labels[:4] == (1, 1, 2, 2)
        assert plan.centroid(1) == (0.5, 1.5)
        assert plan.cut_edge_count == 4

    def test_stripes_need_lattice(self):
        # type: () -> None
        """Test stripe constructors reject graphs without a lattice shape."""
        with pytest.raises(PlanFormatError, match="lattice"):
            horizontal_stripes(path_graph(4), 2)

    def test_copy_is_independent(self, lattice_4x4):
        # type: (object) -> None
        """Test copies share the graph but not the labels."""
        plan = horizontal_stripes(lattice_4x4, 2)
        clone = plan.copy()
        assert clone == plan
        assert hash(clone) == hash(plan)
        clone.flip(4, 8)
        assert clone != plan
        assert plan.label(8) == 1

    def test_repr(self):
        # type: () -> None
        """Test repr shows sizes and cut."""
        assert repr(Plan(path_graph(3), [1, 1, 2])) == "Plan(n_districts=2, sizes=2/1, cut=1)"


class TestFlip:
    """Test the single-node flip operator."""

    def test_flip_takes_source_label(self):
        # type: () -> None
        """Test vertex v takes the label of u."""
        plan = Plan(path_graph(3), [1, 1, 2])
        assert plan.flip(2, 1) == 1
        assert plan.labels == (1, 2, 2)
        assert plan.cut_edge_count == 1
        assert plan.district_size(2) == 2

    def test_flip_not_adjacent(self):
        # type: () -> None
        """Test flipping non-adjacent vertices fails."""
        with pytest.raises(PreconditionError, match="not adjacent"):
            Plan(path_graph(3), [1, 1, 2]).flip(0, 2)

    def test_flip_same_label(self):
        # type: () -> None
        """Test flipping within a district fails."""
        with pytest.raises(PreconditionError, match="same label"):
            Plan(path_graph(3), [1, 1, 2]).flip(0, 1)

    def test_flipped_restores(self):
        # type: () -> None
        """Test the context manager undoes the flip."""
        plan = Plan(path_graph(3), [1, 1, 2])
        before = plan.aggregates()
        with plan.flipped(1, 2) as tentative:
            assert tentative.labels == (1, 1, 1)
            assert tentative.cut_edge_count == 0
        assert plan.labels == (1, 1, 2)
        assert plan.aggregates() == before

    def test_apply_flip_returns_new_plan(self):
        # type: () -> None
        """Test the functional flip leaves the input untouched."""
        plan = Plan(path_graph(3), [1, 1, 2])
        result = apply_flip(plan, (2, 1))
        assert result.labels == (1, 2, 2)
        assert plan.labels == (1, 1, 2)

    def test_fingerprint(self):
        # type: () -> None
        """Test the fingerprint carries the labels."""
        assert Plan(path_graph(3), [1, 1, 2]).fingerprint().labels == (1, 1, 2)


class TestCentroids:
    """Test district centroids."""

    def test_district_centroid(self):
        # type: () -> None
        """Test the area weighted centroid."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        assert district_centroid(plan, 1) == (0.5, 0.0)
        assert plan.district_area(2) == 2.0
        assert plan.district_population(2) == 2.0

    def test_centroid_with(self):
        # type: () -> None
        """Test the tentative centroid of a joining or leaving vertex."""
        plan = Plan(path_graph(3), [1, 1, 2])
        assert plan.centroid_with(2, 1, True) == (1.5, 0.0)
        assert plan.centroid_with(1, 1, False) == (0.0, 0.0)
        assert plan.labels == (1, 1, 2)

    def test_centroid_of_empty_district(self):
        # type: () -> None
        """Test empty districts have no centroid."""
        plan = Plan(path_graph(3), [1, 1, 2])
        with pytest.raises(EmptyDistrictError):
            plan.centroid_with(2, 2, False)
        with pytest.raises(EmptyDistrictError):
            Plan(path_graph(3), [1, 1, 1], 2).centroid(2)


class TestValidity:
    """Test plan validity and the valid neighborhood."""

    def test_empty_district_invalid(self):
        # type: () -> None
        """Test a plan with an empty district is invalid."""
        assert not is_valid(Plan(path_graph(3), [1, 1, 1], 2), UNBOUNDED)

    def test_disconnected_district(self):
        # type: () -> None
        """Test connectivity is required by default."""
        plan = Plan(path_graph(3), [1, 2, 1])
        assert not plan.is_valid(UNBOUNDED)
        assert plan.is_valid(ValiditySpec(require_connected=False))

    def test_simply_connected(self):
        # type: () -> None
        """Test a district enclosing another one has a hole."""
        graph = build_lattice(3, 3)
        plan = Plan(graph, [1, 1, 1, 1, 2, 1, 1, 1, 1])
        assert plan.is_valid(UNBOUNDED)
        assert not plan.is_valid(ValiditySpec(require_simply_connected=True))

    def test_population_bounds(self, lattice_3x2):
        # type: (object) -> None
        """Test bounds are inclusive."""
        plan = Plan(lattice_3x2, [1, 1, 1, 2, 2, 2])
        assert plan.is_valid(ValiditySpec(pop_min=3, pop_max=3))
        assert not plan.is_valid(ValiditySpec(pop_min=4))
        assert not plan.is_valid(ValiditySpec(pop_max=2))

    def test_candidate_moves_on_path(self):
        # type: () -> None
        """Test N(ξ) of a path split in two halves."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        assert plan.candidate_moves(UNBOUNDED) == [Move(1, 2, 2), Move(2, 1, 1)]
        assert conflicted_edges(plan, UNBOUNDED) == {(2, 1), (1, 2)}
        assert district_graph(plan, UNBOUNDED) == {(1, 2)}

    def test_district_graph_follows_bounds(self):
        # type: () -> None
        """Test E_d only keeps pairs with a move that is valid under the chain's bounds."""
        plan = Plan(build_lattice(2, 2), [1, 1, 2, 2])
        assert district_graph(plan, UNBOUNDED) == {(1, 2)}
        assert district_graph(plan, ValiditySpec(pop_min=2, pop_max=2)) == frozenset()

    def test_singleton_cannot_empty(self):
        # type: () -> None
        """Test a single-vertex district cannot give its vertex away."""
        plan = Plan(path_graph(3), [1, 2, 2])
        assert plan.candidate_moves(UNBOUNDED) == [Move(1, 1, 0)]
        assert not plan.move_is_valid(0, 2, UNBOUNDED)

    def test_move_breaking_connectivity(self, lattice_3x2):
        # type: (object) -> None
        """Test a move that splits its district is invalid only when connectivity is required."""
        plan = Plan(lattice_3x2, [1, 1, 1, 2, 2, 2])
        assert not plan.move_is_valid(1, 2, UNBOUNDED)
        assert plan.move_is_valid(1, 2, ValiditySpec(require_connected=False))
        assert plan.move_is_valid(0, 2, UNBOUNDED)

    @pytest.mark.parametrize("measure", ["population", "count"])
    def test_move_respecting_bounds(self, lattice_3x2, measure):
        # type: (object, str) -> None
        """Test bounds are checked in both measures."""
        plan = Plan(lattice_3x2, [1, 1, 1, 2, 2, 2])
        assert plan.move_is_valid(0, 2, ValiditySpec(pop_min=2, pop_max=4, measure=measure))
        assert not plan.move_is_valid(0, 2, ValiditySpec(pop_min=3, pop_max=3, measure=measure))

    def test_move_into_hole(self):
        # type: () -> None
        """Test a move creating an enclosed district is rejected under simple connectivity."""
        graph = build_lattice(3, 3)
        plan = Plan(graph, [1, 1, 1, 1, 2, 2, 1, 1, 1])
        simple = ValiditySpec(require_simply_connected=True)
        assert plan.is_valid(simple)
        assert plan.move_is_valid(5, 1, UNBOUNDED)
        assert not plan.move_is_valid(5, 1, simple)

    def test_candidate_moves_memoized(self):
        # type: () -> None
        """Test the neighborhood is cached per plan version and validity."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        moves = plan.candidate_moves(UNBOUNDED)
        assert plan.candidate_moves(UNBOUNDED) is moves
        plan.flip(2, 1)
        assert plan.candidate_moves(UNBOUNDED) == [Move(1, 1, 0)]

    def test_valid_neighborhood(self, lattice_3x2):
        # type: (object) -> None
        """Test materialized neighbors are valid and one flip away."""
        plan = Plan(lattice_3x2, [1, 1, 1, 2, 2, 2])
        neighbors = valid_neighborhood(plan, BOUNDS_3X2)
        assert len(neighbors) == 4
        for flip, neighbor in neighbors:
            assert neighbor.is_valid(BOUNDS_3X2)
            diff = [v for v in range(6) if neighbor.label(v) != plan.label(v)]
            assert diff == [flip[1]]


class TestPlanFiles:
    """Test reading and writing plan files."""

    def test_write(self):
        # type: () -> None
        """Test the CSV layout."""
        assert write_plan_csv(Plan(path_graph(3), [1, 1, 2])) == "vertex_id,district\n0,1\n1,1\n2,2\n"

    def test_read_written(self, lattice_4x4):
        # type: (object) -> None
        """Test a written plan reads back equal."""
        plan = vertical_stripes(lattice_4x4, 2)
        assert read_plan_csv(write_plan_csv(plan), lattice_4x4, 2) == plan

    def test_read_bad_header(self):
        # type: () -> None
        """Test a wrong header is rejected."""
        with pytest.raises(PlanFormatError):
            read_plan_csv("id,label\n0,1\n", path_graph(2), 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10_000), max_size=60))
def test_caches_match_recomputation(choices):
    # type: (list[int]) -> None
    """Test incrementally maintained caches equal a fresh recomputation after any flip sequence."""
    plan = horizontal_stripes(LATTICE_4X4, 2)
    for choice in choices:
        moves = plan.candidate_moves(UNBOUNDED)
        if not moves:
            break
        plan.flip(*moves[choice % len(moves)].flip)
        assert plan.aggregates() == plan.fresh_aggregates()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10_000), max_size=30))
def test_neighborhood_closed_under_validity(choices):
    # type: (list[int]) -> None
    """Test every candidate move of a valid plan yields a valid plan and every other flip does not."""
    plan = horizontal_stripes(LATTICE_4X4, 2)
    for choice in choices:
        moves = plan.candidate_moves(BOUNDS_4X4)
        if not moves:
            break
        plan.flip(*moves[choice % len(moves)].flip)
    assert plan.is_valid(BOUNDS_4X4)
    valid = {(m.vertex, m.label) for m in plan.candidate_moves(BOUNDS_4X4)}
    for v in range(len(LATTICE_4X4)):
        for label in (1, 2):
            if label == plan.label(v) or not any(plan.label(w) == label for w in LATTICE_4X4.neighbors(v)):
                continue
            source = next(w for w in LATTICE_4X4.neighbors(v) if plan.label(w) == label)
            with plan.flipped(source, v):
                assert plan.is_valid(BOUNDS_4X4) == ((v, label) in valid)
