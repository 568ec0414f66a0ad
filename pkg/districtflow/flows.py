"""
Concrete flow families: center-of-mass flow and pairwise district-to-district flow.

The center-of-mass flow orients every move by how the centroids of the two touched districts
travel along a planar vector field. The district-to-district flow has one flow per district
pair (i, j), i < j, oriented by which of the two districts grows.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, NamedTuple

import numpy as np
from numpy.random import Generator

from districtflow.fingerprint import pair_bit
from districtflow.graph import PrecinctGraph
from districtflow.msmh import ExtendedState, FlowFamily, FlowLayout, StepEvent, msmh_step
from districtflow.plan import NeighborPlan, Plan, apply_flip, district_graph
from districtflow.schema import FieldSpec, ScoreSpec, ValiditySpec
from districtflow.tempering import Candidate

logger = logging.getLogger(__name__)

Point = tuple[float, float]


def vortex_field(point, center, unit_speed=True, chirality=1):
    # type: (Point, Point, bool, int) -> Point
    """
    Circular vortex around `center`.

    With polar offset (r, α) from the center returns (-sin α, cos α) for unit speed and
    (-r sin α, r cos α) otherwise, negated for clockwise chirality. Zero at the center.
    """
    x, y = point[0] - center[0], point[1] - center[1]
    r = math.hypot(x, y)
    if r == 0:
        return 0.0, 0.0
    alpha = math.atan2(y, x)
    speed = chirality if unit_speed else chirality * r
    return -speed * math.sin(alpha), speed * math.cos(alpha)


@dataclass(frozen=True)
class VectorField:
    """Deterministic planar vector field: circular vortex, constant, or custom function."""

    kind: str = "vortex"
    center: Point = (0.0, 0.0)
    direction: Point = (1.0, 0.0)
    unit_speed: bool = True
    chirality: int = 1
    func: Callable[[Point], Point] | None = field(default=None, compare=False)

    def __call__(self, point):
        # type: (Point) -> Point
        if self.kind == "vortex":
            return vortex_field(point, self.center, self.unit_speed, self.chirality)
        if self.kind == "constant":
            return self.direction
        if self.func is None:
            raise ValueError("custom vector field without a function")
        return self.func(point)

    @classmethod
    def from_spec(cls, spec, graph):
        # type: (FieldSpec, PrecinctGraph) -> VectorField
        """Build from a config field spec; the vortex center defaults to the graph centroid."""
        if spec.kind == "constant":
            return cls(kind="constant", direction=spec.direction)
        center = spec.center if spec.center is not None else graph.center
        return cls(kind="vortex", center=center, unit_speed=spec.unit_speed, chirality=spec.chirality)

    def describe(self):
        # type: () -> dict
        if self.kind == "vortex":
            return {
                "kind": "vortex",
                "center": list(self.center),
                "unit_speed": self.unit_speed,
                "chirality": self.chirality,
            }
        if self.kind == "constant":
            return {"kind": "constant", "direction": list(self.direction)}
        return {"kind": "custom"}


def orientation_score(plan, v, new, vector_field):
    # type: (Plan, int, int, VectorField) -> float
    """
    Alignment s of the centroid displacement with the field when vertex v moves to `new`.

    Sums v(midpoint) . displacement over the two touched districts in ascending label order.
    """
    old = plan.label(v)
    s = 0.0
    for k in sorted((old, new)):
        before = plan.centroid(k)
        after = plan.centroid_with(k, v, joining=k == new)
        mid = ((after[0] + before[0]) / 2, (after[1] + before[1]) / 2)
        fx, fy = vector_field(mid)
        s += fx * (after[0] - before[0]) + fy * (after[1] - before[1])
    return s


def move_orientation(plan, v, new, vector_field, tie_salt=0):
    # type: (Plan, int, int, VectorField, int) -> int
    """Sign of the orientation score, with an antisymmetric salted tie-break at zero."""
    s = orientation_score(plan, v, new, vector_field)
    if s > 0:
        return 1
    if s < 0:
        return -1
    key = plan.fingerprint()
    other = key.with_label(v, new)
    bit = pair_bit(key, other, tie_salt)
    return 1 if (bit == 1) == (key < other) else -1


def orientation(plan, flip, vector_field, tie_salt=0):
    # type: (Plan, tuple[int, int], VectorField, int) -> int
    """Orientation ±1 of the flip (u, v) of plan ξ."""
    u, v = flip
    return move_orientation(plan, v, plan.label(u), vector_field, tie_salt)


class CenterOfMassFlow(FlowFamily):
    """Single flow oriented by centroid motion along a vector field."""

    name = "com-flow"

    def __init__(self, vector_field, tie_salt=0):
        # type: (VectorField, int) -> None
        self.field = vector_field
        self.tie_salt = tie_salt

    @property
    def indices(self):
        # type: () -> tuple
        return (0,)

    def classify(self, plan, candidate):
        # type: (Plan, Candidate) -> tuple[int, int]
        return 0, move_orientation(plan, candidate.vertex, candidate.label, self.field, self.tie_salt)


class DistrictPairFlow(FlowFamily):
    """
    One flow per district pair e = (i, j), i < j.

    Orientation +1 moves a vertex of district j into district i, -1 the reverse. With momentum
    resampling, momenta of pairs that become adjacent after an accepted move are redrawn and
    only active pairs belong to the extended state.
    """

    name = "d2d-flow"

    def __init__(self, n_districts, resample_on_activation=True, simplified_ratio=False):
        # type: (int, bool, bool) -> None
        self.n_districts = n_districts
        self.resample_on_activation = resample_on_activation
        self.weight_factor = not simplified_ratio
        self._indices = tuple(combinations(range(1, n_districts + 1), 2))

    @property
    def indices(self):
        # type: () -> tuple
        return self._indices

    def classify(self, plan, candidate):
        # type: (Plan, Candidate) -> tuple[tuple[int, int], int]
        old = plan.label(candidate.vertex)
        i, j = (old, candidate.label) if old < candidate.label else (candidate.label, old)
        return (i, j), 1 if candidate.label == i else -1

    def tracked(self, layout):
        # type: (FlowLayout) -> tuple
        return layout.active if self.resample_on_activation else self.indices

    def on_accept(self, momenta, before, after, rng):
        # type: (dict, tuple, tuple, np.random.Generator) -> None
        if not self.resample_on_activation:
            return
        for e in after:
            if e not in before:
                momenta[e] = 1 if rng.random() < 0.5 else -1
                logger.debug("pair %s activated, momentum resampled to %s", e, momenta[e])


####################################################################################################
# Single-step API                                                                                  #
####################################################################################################


class ComStep(NamedTuple):
    plan: Plan
    theta: int
    event: StepEvent
    score: float | None


@dataclass
class D2dFlowState:
    """Momenta of all district pairs plus the active pair set E_d(ξ)."""

    momenta: dict[tuple[int, int], int]
    active: frozenset[tuple[int, int]] = frozenset()

    @classmethod
    def initial(cls, plan, validity, rng):
        # type: (Plan, ValiditySpec, np.random.Generator) -> D2dFlowState
        family = DistrictPairFlow(plan.n_districts)
        return cls(family.initial_momenta(rng), district_graph(plan, validity))


class D2dStep(NamedTuple):
    plan: Plan
    state: D2dFlowState
    event: StepEvent
    score: float | None


def com_flow_step(plan, theta, beta, vector_field, spec, validity, rng, tie_salt=0, score=None):
    # type: (Plan, int, float, VectorField, ScoreSpec, ValiditySpec, Generator, int, float|None) -> ComStep
    """One center-of-mass flow step, advancing the plan in place."""
    state = ExtendedState(plan, {0: theta}, score)
    result = msmh_step(state, CenterOfMassFlow(vector_field, tie_salt), beta, spec, validity, rng)
    return ComStep(plan, state.momenta[0], result.event, state.score)


def d2d_oriented_neighborhoods(plan, e, direction, validity):
    # type: (Plan, tuple[int, int], int, ValiditySpec) -> list[NeighborPlan]
    """N_e^+ (district i grows into j) or N_e^- (j grows into i) for e = (i, j), i < j."""
    i, j = e
    grow, shrink = (i, j) if direction == 1 else (j, i)
    return [
        NeighborPlan(m.flip, apply_flip(plan, m.flip))
        for m in plan.candidate_moves(validity)
        if m.label == grow and plan.label(m.vertex) == shrink
    ]


def d2d_flow_step(plan, state, beta, spec, validity, rng, resample=True, simplified_ratio=False, score=None):
    # type: (Plan, D2dFlowState, float, ScoreSpec, ValiditySpec, Generator, bool, bool, float|None) -> D2dStep
    """One district-to-district flow step, advancing plan and momenta in place."""
    family = DistrictPairFlow(plan.n_districts, resample, simplified_ratio)
    extended = ExtendedState(plan, state.momenta, score)
    result = msmh_step(extended, family, beta, spec, validity, rng)
    if result.accepted:
        state.active = district_graph(plan, validity)
    return D2dStep(plan, state, result.event, extended.score)
