"""Acceptance ratio identities over every transition of the enumerated small instances."""

import math

import pytest
from scipy.special import logsumexp

from districtflow.flows import CenterOfMassFlow, DistrictPairFlow, VectorField
from districtflow.msmh import flow_layout, log_acceptance
from districtflow.plan import Plan
from districtflow.schema import ScoreSpec
from districtflow.scoring import total_score
from districtflow.tempering import scan_neighborhood, snf_log_ratio

TOLERANCE = 1e-12
SPEC = ScoreSpec()


def transitions(space):
    """Yield (plan, candidate) for every plan of the space and every member of its neighborhood."""
    for i in range(len(space)):
        plan = space.plan(i)
        for candidate in scan_neighborhood(plan, SPEC, space.validity).candidates:
            yield plan, candidate


def neighbor(plan, vertex, label):
    # type: (Plan, int, int) -> Plan
    labels = list(plan.labels)
    labels[vertex] = label
    return Plan(plan.graph, labels, plan.n_districts)


def pair_sums(plan, validity, beta):
    # type: (Plan, object, float) -> tuple[float, dict]
    """log Z and log Z_e^θ over N(ξ), every neighbor rebuilt and scored from scratch."""
    everything = []
    grouped = {}  # type: dict[tuple, list[float]]
    for move in plan.candidate_moves(validity):
        old = plan.label(move.vertex)
        e = (min(old, move.label), max(old, move.label))
        theta = 1 if move.label == e[0] else -1
        term = -beta * total_score(neighbor(plan, move.vertex, move.label), SPEC)
        everything.append(term)
        grouped.setdefault((e, theta), []).append(term)
    return float(logsumexp(everything)), {k: float(logsumexp(v)) for k, v in grouped.items()}


def test_snf_ratio_at_full_tempering(space_4x4):
    # type: (object) -> None
    """Test the tempered acceptance at β=1 reduces to Z(ξ)/Z(ξ')."""
    for plan, candidate in transitions(space_4x4):
        here = scan_neighborhood(plan, SPEC, space_4x4.validity)
        with plan.flipped(*candidate.flip):
            there = scan_neighborhood(plan, SPEC, space_4x4.validity)
        log_r = snf_log_ratio(here.score, there.score, here.log_partition(1.0), there.log_partition(1.0), 1.0)
        assert log_r == pytest.approx(here.log_partition(1.0) - there.log_partition(1.0), abs=TOLERANCE)


def test_snf_ratio_untempered(space_4x4):
    # type: (object) -> None
    """Test the acceptance at β=0 is e^{-ΔJ}|N(ξ)|/|N(ξ')|."""
    for plan, candidate in transitions(space_4x4):
        here = scan_neighborhood(plan, SPEC, space_4x4.validity)
        with plan.flipped(*candidate.flip):
            there = scan_neighborhood(plan, SPEC, space_4x4.validity)
        log_r = snf_log_ratio(here.score, there.score, here.log_partition(0.0), there.log_partition(0.0), 0.0)
        expected = (here.score - there.score) + math.log(len(here)) - math.log(len(there))
        assert log_r == pytest.approx(expected, abs=TOLERANCE)


@pytest.mark.parametrize("instance", [pytest.param("space_4x4", marks=pytest.mark.slow), "space_3x2_three"])
def test_district_pair_ratio_from_enumeration(request, instance):
    # type: (pytest.FixtureRequest, str) -> None
    """Test the district-pair acceptance against partition functions summed over rebuilt neighbors."""
    space = request.getfixturevalue(instance)
    family = DistrictPairFlow(space.n_districts)
    beta = 1.0
    checked = 0
    for plan, candidate in transitions(space):
        old = plan.label(candidate.vertex)
        e = (min(old, candidate.label), max(old, candidate.label))
        theta = 1 if candidate.label == e[0] else -1
        score = total_score(plan, SPEC)
        moved = neighbor(plan, candidate.vertex, candidate.label)
        new_score = total_score(moved, SPEC)
        log_z, log_z_dir = pair_sums(plan, space.validity, beta)
        log_z2, log_z_dir2 = pair_sums(moved, space.validity, beta)
        log_w = float(logsumexp([log_z_dir.get((e, s), -math.inf) for s in (1, -1)])) - log_z
        log_w2 = float(logsumexp([log_z_dir2.get((e, s), -math.inf) for s in (1, -1)])) - log_z2
        expected = (
            (score - new_score)
            + (-beta * score - log_z_dir2[(e, -theta)])
            - (-beta * new_score - log_z_dir[(e, theta)])
            + log_w2
            - log_w
        )

        here = flow_layout(plan, family, beta, SPEC, space.validity)
        with plan.flipped(*candidate.flip):
            there = flow_layout(plan, family, beta, SPEC, space.validity)
        assert family.classify(plan, candidate) == (e, theta)
        assert log_acceptance(here, there, e, theta, candidate, beta) == pytest.approx(expected, abs=1e-10)
        checked += 1
    assert checked > 0


def families(space):
    vortex = VectorField(kind="vortex", center=space.graph.center)
    return [CenterOfMassFlow(vortex), DistrictPairFlow(space.n_districts)]


@pytest.mark.parametrize("instance", ["space_3x2", pytest.param("space_4x4", marks=pytest.mark.slow)])
@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
def test_skew_ratio_reciprocity(request, instance, beta):
    # type: (pytest.FixtureRequest, str, float) -> None
    """Test r_i((ξ, θ) -> ξ') times r_i((ξ', -θ) -> ξ) is one for every oriented move."""
    space = request.getfixturevalue(instance)
    for family in families(space):
        for p in range(len(space)):
            plan = space.plan(p)
            here = flow_layout(plan, family, beta, SPEC, space.validity)
            for (i, theta), group in here.groups.items():
                for candidate in group:
                    old = plan.label(candidate.vertex)
                    with plan.flipped(*candidate.flip):
                        there = flow_layout(plan, family, beta, SPEC, space.validity)
                    back = there.find(i, -theta, (candidate.vertex, old))
                    assert back is not None
                    forward = log_acceptance(here, there, i, theta, candidate, beta)
                    backward = log_acceptance(there, here, i, -theta, back, beta)
                    assert forward + backward == pytest.approx(0.0, abs=TOLERANCE)
