"""Tests for the center-of-mass and district-pair flow families."""

import numpy as np
import pytest

from districtflow.flows import (
    CenterOfMassFlow,
    D2dFlowState,
    DistrictPairFlow,
    VectorField,
    com_flow_step,
    d2d_flow_step,
    d2d_oriented_neighborhoods,
    move_orientation,
    orientation,
    orientation_score,
    vortex_field,
)
from districtflow.msmh import StepEvent
from districtflow.plan import Plan, horizontal_stripes, vertical_stripes
from districtflow.schema import FieldSpec, ScoreSpec, ValiditySpec
from districtflow.tempering import Candidate
from tests.conftest import BOUNDS_4X4, path_graph


class TestVectorField:
    """Test planar vector fields."""

    def test_unit_vortex(self):
        # type: () -> None
        """Test the counter-clockwise unit vortex."""
        fx, fy = vortex_field((2.0, 0.0), (0.0, 0.0))
        assert (fx, fy) == pytest.approx((0.0, 1.0))
        fx, fy = vortex_field((0.0, 3.0), (0.0, 0.0))
        assert (fx, fy) == pytest.approx((-1.0, 0.0))

    def test_scaled_clockwise_vortex(self):
        # type: () -> None
        """Test speed grows with the radius and chirality reverses direction."""
        field = vortex_field((2.0, 0.0), (0.0, 0.0), unit_speed=False, chirality=-1)
        assert field == pytest.approx((0.0, -2.0))

    def test_zero_at_center(self):
        # type: () -> None
        """Test the vortex vanishes at its center."""
        assert vortex_field((1.5, 1.5), (1.5, 1.5)) == (0.0, 0.0)

    def test_constant_and_custom(self):
        # type: () -> None
        """Test constant and function backed fields."""
        assert VectorField(kind="constant", direction=(0.0, 2.0))((5.0, 5.0)) == (0.0, 2.0)
        assert VectorField(kind="custom", func=lambda p: (p[1], p[0]))((1.0, 2.0)) == (2.0, 1.0)
        with pytest.raises(ValueError):
            VectorField(kind="custom")((0.0, 0.0))

    def test_from_spec(self, lattice_4x4):
        # type: (object) -> None
        """Test the vortex center defaults to the graph centroid."""
        field = VectorField.from_spec(FieldSpec(), lattice_4x4)
        assert field.center == (1.5, 1.5)
        assert field.describe() == {"kind": "vortex", "center": [1.5, 1.5], "unit_speed": True, "chirality": 1}
        constant = VectorField.from_spec(FieldSpec(kind="constant", direction=(1.0, 0.0)), lattice_4x4)
        assert constant.describe() == {"kind": "constant", "direction": [1.0, 0.0]}


class TestOrientation:
    """Test move orientations under the center-of-mass flow."""

    def test_constant_field_orientation(self):
        # type: () -> None
        """Test moving the boundary right along +x is positive for both districts."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        east = VectorField(kind="constant", direction=(1.0, 0.0))
        # vertex 2 joins district 1: both centroids move right
        assert orientation_score(plan, 2, 1, east) == pytest.approx(1.0 / 2 + 1.0 / 2)
        assert orientation(plan, (1, 2), east) == 1
        assert orientation(plan, (2, 1), east) == -1

    def test_reverse_move_has_opposite_sign(self, lattice_4x4, vortex_4x4):
        # type: (object, object) -> None
        """Test ξ' in N^+(ξ) implies ξ in N^-(ξ') for every neighbor."""
        plan = vertical_stripes(lattice_4x4, 2)
        for move in plan.candidate_moves(BOUNDS_4X4):
            old = plan.label(move.vertex)
            forward = move_orientation(plan, move.vertex, move.label, vortex_4x4, tie_salt=3)
            with plan.flipped(*move.flip):
                backward = move_orientation(plan, move.vertex, old, vortex_4x4, tie_salt=3)
            assert forward == -backward

    def test_tie_break_is_antisymmetric(self):
        # type: () -> None
        """Test zero scores are broken consistently in both directions."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        north = VectorField(kind="constant", direction=(0.0, 1.0))
        assert orientation_score(plan, 2, 1, north) == 0.0
        for salt in range(8):
            forward = move_orientation(plan, 2, 1, north, salt)
            with plan.flipped(1, 2):
                backward = move_orientation(plan, 2, 2, north, salt)
            assert forward == -backward

    def test_com_family_classify(self):
        # type: () -> None
        """Test the single flow index and the orientation sign."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        family = CenterOfMassFlow(VectorField(kind="constant", direction=(1.0, 0.0)))
        assert family.indices == (0,)
        assert family.classify(plan, Candidate(2, 1, 1, 0.0)) == (0, 1)
        assert family.classify(plan, Candidate(1, 2, 2, 0.0)) == (0, -1)


class TestDistrictPairFlow:
    """Test the district-to-district family."""

    def test_indices(self):
        # type: () -> None
        """Test one flow per unordered district pair."""
        assert DistrictPairFlow(3).indices == ((1, 2), (1, 3), (2, 3))

    def test_classify(self):
        # type: () -> None
        """Test +1 grows the smaller label."""
        plan = Plan(path_graph(6), [1, 1, 2, 2, 3, 3])
        family = DistrictPairFlow(3)
        assert family.classify(plan, Candidate(2, 1, 1, 0.0)) == ((1, 2), 1)
        assert family.classify(plan, Candidate(3, 3, 4, 0.0)) == ((2, 3), -1)

    def test_simplified_ratio_drops_weight_factor(self):
        # type: () -> None
        """Test the simplified variant omits the weight ratio."""
        assert DistrictPairFlow(2).weight_factor
        assert not DistrictPairFlow(2, simplified_ratio=True).weight_factor

    def test_resample_on_activation(self, rng):
        # type: (np.random.Generator) -> None
        """Test only newly active pairs get fresh momenta."""
        family = DistrictPairFlow(3)
        momenta = {(1, 2): 1, (1, 3): 1, (2, 3): 1}
        draws = set()
        for _ in range(50):
            family.on_accept(momenta, ((1, 2),), ((1, 2), (1, 3)), rng)
            assert momenta[(1, 2)] == 1
            assert momenta[(2, 3)] == 1
            draws.add(momenta[(1, 3)])
        assert draws == {1, -1}

    def test_no_resampling(self, rng):
        # type: (np.random.Generator) -> None
        """Test momenta are kept when resampling is off."""
        family = DistrictPairFlow(3, resample_on_activation=False)
        momenta = {(1, 2): 1, (1, 3): 1, (2, 3): 1}
        state = rng.bit_generator.state
        family.on_accept(momenta, ((1, 2),), ((1, 3),), rng)
        assert momenta == {(1, 2): 1, (1, 3): 1, (2, 3): 1}
        assert rng.bit_generator.state == state

    def test_oriented_neighborhoods(self):
        # type: () -> None
        """Test N_e^+ grows district i and N_e^- grows district j."""
        plan = Plan(path_graph(4), [1, 1, 2, 2])
        plus = d2d_oriented_neighborhoods(plan, (1, 2), 1, ValiditySpec())
        minus = d2d_oriented_neighborhoods(plan, (1, 2), -1, ValiditySpec())
        assert [n.plan.labels for n in plus] == [(1, 1, 1, 2)]
        assert [n.plan.labels for n in minus] == [(1, 2, 2, 2)]
        assert d2d_oriented_neighborhoods(plan, (1, 3), 1, ValiditySpec()) == []


class TestSingleSteps:
    """Test the single-step convenience API."""

    def test_com_flow_step(self, lattice_4x4, vortex_4x4, rng):
        # type: (object, object, np.random.Generator) -> None
        """Test momentum and score bookkeeping over repeated steps."""
        plan = horizontal_stripes(lattice_4x4, 2)
        theta, score = 1, None
        for _ in range(100):
            step = com_flow_step(plan, theta, 0.5, vortex_4x4, ScoreSpec(), BOUNDS_4X4, rng, score=score)
            assert step.plan is plan
            if step.event in (StepEvent.REJECTED, StepEvent.FORCED_FLIP):
                assert step.theta == -theta
            else:
                assert step.theta == theta
            theta, score = step.theta, step.score
        assert plan.is_valid(BOUNDS_4X4)

    def test_d2d_flow_step_tracks_active_pairs(self, rng):
        # type: (np.random.Generator) -> None
        """Test the active pair set follows accepted moves."""
        graph = path_graph(6)
        plan = Plan(graph, [1, 1, 2, 2, 3, 3])
        validity = ValiditySpec()
        state = D2dFlowState.initial(plan, validity, rng)
        assert state.active == {(1, 2), (2, 3)}
        assert set(state.momenta) == {(1, 2), (1, 3), (2, 3)}
        for _ in range(200):
            step = d2d_flow_step(plan, state, 0.5, ScoreSpec(), validity, rng)
            assert step.state.active == {(1, 2), (2, 3)}
            assert plan.is_valid(validity)
        assert all(abs(t) == 1 for t in state.momenta.values())

    def test_three_district_pairs_activate(self, lattice_3x2, rng):
        # type: (object, np.random.Generator) -> None
        """Test pairs can become active on a lattice with three districts."""
        plan = Plan(lattice_3x2, [1, 2, 3, 1, 2, 3])
        validity = ValiditySpec(pop_min=1, pop_max=3)
        state = D2dFlowState.initial(plan, validity, rng)
        assert state.active == {(1, 2), (2, 3)}
        seen = set()
        for _ in range(500):
            d2d_flow_step(plan, state, 0.0, ScoreSpec(), validity, rng)
            seen |= state.active
        assert (1, 3) in seen
        assert set(state.momenta) == {(1, 2), (1, 3), (2, 3)}
