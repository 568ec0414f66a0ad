"""
Mixed skew Metropolis-Hastings over extended states (plan, momenta).

A flow family splits the neighborhood N(ξ) into oriented groups N_i^+(ξ), N_i^-(ξ), one pair
per flow index i. A step picks a flow i with probability ω_i(ξ), proposes from the group
selected by the momentum θ_i and on rejection (or an empty group) flips θ_i instead of moving.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, NamedTuple

import numpy as np

from districtflow.exceptions import PreconditionError, WeightConditionError
from districtflow.fingerprint import PlanKey
from districtflow.plan import Plan
from districtflow.schema import ScoreSpec, ValiditySpec
from districtflow.tempering import (
    Candidate,
    Neighborhood,
    accept,
    local_partition_function,
    sample_tempered,
    scan_neighborhood,
)

logger = logging.getLogger(__name__)

NEG_INF = -math.inf
LOG2 = math.log(2.0)


class StepEvent(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    FORCED_FLIP = "forced-flip"
    STUCK = "stuck"
    LAZY_HOLD = "lazy-hold"
    LAZY_FLIP = "lazy-flip"


@dataclass
class ExtendedState:
    """Plan plus momentum components θ_i in {-1, +1}; updated in place by the step functions."""

    plan: Plan
    momenta: dict[Hashable, int] = field(default_factory=dict)
    score: float | None = None

    def flip_momentum(self, i):
        # type: (Hashable) -> None
        self.momenta[i] = -self.momenta[i]

    def involution(self, i):
        # type: (Hashable) -> ExtendedState
        """S_i(x): a copy with momentum component i reversed."""
        other = ExtendedState(self.plan.copy(), dict(self.momenta), self.score)
        other.flip_momentum(i)
        return other

    def theta(self):
        # type: () -> tuple
        return tuple(sorted(self.momenta.items()))


class StepResult(NamedTuple):
    state: ExtendedState
    accepted: bool
    flow: Hashable | None
    event: StepEvent
    vertex: int | None = None


class WeightViolation(NamedTuple):
    plan: PlanKey
    flow: Hashable
    condition: str
    detail: str


@dataclass
class WeightReport:
    violations: list[WeightViolation]
    weights: dict[PlanKey, dict[Hashable, float]]

    @property
    def ok(self):
        # type: () -> bool
        return not self.violations


class FlowFamily(ABC):
    """A set of flows over the plan state graph."""

    name = "flow"
    #: Include the ω_i(ξ')/ω_i(ξ) factor in the acceptance ratio
    weight_factor = True

    @property
    @abstractmethod
    def indices(self):
        # type: () -> tuple
        """All flow indices (n = len(indices))."""

    @abstractmethod
    def classify(self, plan, candidate):
        # type: (Plan, Candidate) -> tuple[Hashable, int]
        """Flow index and orientation (+1/-1) of the move ξ -> candidate."""

    def log_weights(self, layout):
        # type: (FlowLayout) -> dict[Hashable, float]
        """Generic weights ω_i = (Z_i^+ + Z_i^-) / Z over the active flows."""
        return {
            i: float(np.logaddexp(layout.log_z_dir(i, 1), layout.log_z_dir(i, -1))) - layout.log_z
            for i in layout.active
        }

    def tracked(self, layout):
        # type: (FlowLayout) -> tuple
        """Flow indices whose momenta are part of the extended state at this plan."""
        return self.indices

    def on_accept(self, momenta, before, after, rng):
        # type: (dict, tuple, tuple, np.random.Generator) -> None
        """Hook to refresh momenta after an accepted move from active set `before` to `after`."""

    def initial_momenta(self, rng):
        # type: (np.random.Generator) -> dict[Hashable, int]
        return {i: int(s) for i, s in zip(self.indices, rng.choice((-1, 1), size=len(self.indices)))}


class FlowLayout:
    """Oriented partition of N(ξ) for one plan, with log partition functions and log weights."""

    def __init__(self, key, neighborhood, groups, family, beta):
        # type: (PlanKey, Neighborhood, dict[tuple, list[Candidate]], FlowFamily, float) -> None
        self.key = key
        self.neighborhood = neighborhood
        self.groups = groups
        self.beta = beta
        self.log_z = neighborhood.log_partition(beta)
        self._log_z_groups = {k: local_partition_function(g, beta) for k, g in groups.items()}
        self.active = tuple(sorted({i for i, _ in groups}))
        self.log_w = family.log_weights(self)

    @property
    def score(self):
        # type: () -> float
        return self.neighborhood.score

    def group(self, i, sign):
        # type: (Hashable, int) -> list[Candidate]
        return self.groups.get((i, sign), [])

    def log_z_dir(self, i, sign):
        # type: (Hashable, int) -> float
        return self._log_z_groups.get((i, sign), NEG_INF)

    def log_weight(self, i):
        # type: (Hashable) -> float
        return self.log_w.get(i, NEG_INF)

    def find(self, i, sign, key):
        # type: (Hashable, int, tuple[int, int]) -> Candidate|None
        for c in self.group(i, sign):
            if c.key == key:
                return c
        return None


def flow_layout(plan, family, beta, spec, validity, score=None):
    # type: (Plan, FlowFamily, float, ScoreSpec, ValiditySpec, float|None) -> FlowLayout
    """Scan N(ξ) and split it into the family's oriented groups."""
    neighborhood = scan_neighborhood(plan, spec, validity, score)
    groups = {}  # type: dict[tuple, list[Candidate]]
    for c in neighborhood.candidates:
        groups.setdefault(family.classify(plan, c), []).append(c)
    return FlowLayout(plan.fingerprint(), neighborhood, groups, family, beta)


def log_acceptance(here, there, i, theta, proposal, beta, weight_factor=True):
    # type: (FlowLayout, FlowLayout, Hashable, int, Candidate, float, bool) -> float
    """
    log r_i for the move ξ -> ξ' under flow i with momentum θ_i.

    r_i = ω_i(ξ') π(ξ') Q_i(ξ' -> ξ, -θ_i) / (ω_i(ξ) π(ξ) Q_i(ξ -> ξ', θ_i))
    """
    score, new_score = here.score, proposal.score
    log_q_forward = -beta * new_score - here.log_z_dir(i, theta)
    log_q_backward = -beta * score - there.log_z_dir(i, -theta)
    log_r = (score - new_score) + log_q_backward - log_q_forward
    if weight_factor:
        log_r += there.log_weight(i) - here.log_weight(i)
    return log_r


def extended_log_target(score, n_momenta):
    # type: (float, int) -> float
    """log π((ξ, θ)) = -J(ξ) - n log 2."""
    return -score - n_momenta * LOG2


def msmh_step(state, family, beta, spec, validity, rng):
    # type: (ExtendedState, FlowFamily, float, ScoreSpec, ValiditySpec, np.random.Generator) -> StepResult
    """
    One mixed skew Metropolis-Hastings step, advancing `state` in place.

    :raises WeightConditionError: If the reverse move is impossible for an accepted-candidate
        proposal (the family violates the reversibility requirement)
    """
    plan = state.plan
    here = flow_layout(plan, family, beta, spec, validity, state.score)
    state.score = here.score
    if not here.active:
        logger.warning("Empty neighborhood, plan is isolated")
        return StepResult(state, False, None, StepEvent.STUCK)

    flows = list(here.log_w)
    if len(flows) == 1:
        i = flows[0]
    else:
        log_w = np.fromiter(here.log_w.values(), dtype=float, count=len(flows))
        i = flows[int(np.argmax(log_w + rng.gumbel(size=len(flows))))]

    theta = state.momenta[i]
    group = here.group(i, theta)
    if not group:
        state.flip_momentum(i)
        logger.debug("flow %s forced momentum flip to %s", i, -theta)
        return StepResult(state, False, i, StepEvent.FORCED_FLIP)

    proposal = sample_tempered(group, beta, rng)
    old = plan.flip(*proposal.flip)
    there = flow_layout(plan, family, beta, spec, validity, proposal.score)
    if there.find(i, -theta, (proposal.vertex, old)) is None:
        plan.move(proposal.vertex, old)
        raise WeightConditionError(here.key, there.key, i)

    log_r = log_acceptance(here, there, i, theta, proposal, beta, family.weight_factor)
    if accept(log_r, rng):
        family.on_accept(state.momenta, here.active, there.active, rng)
        state.score = proposal.score
        logger.debug("flow %s accepted v=%s -> %s log_r=%.4f", i, proposal.vertex, proposal.label, log_r)
        return StepResult(state, True, i, StepEvent.ACCEPTED, proposal.vertex)

    plan.move(proposal.vertex, old)
    state.flip_momentum(i)
    return StepResult(state, False, i, StepEvent.REJECTED)


def lazy_step(state, epsilon, lazy_hold, inner, rng, indices=None):
    # type: (ExtendedState, float, float, Callable, np.random.Generator, tuple|None) -> StepResult
    """
    Lazy mixture: hold, flip a uniformly chosen momentum, or run the inner step.

    :param epsilon: Probability of a uniform momentum flip
    :param lazy_hold: Probability of leaving the state unchanged
    :param inner: Inner step function taking (state, rng)
    :param indices: Flow indices eligible for the momentum flip (defaults to the state's momenta)
    :raises PreconditionError: If epsilon + lazy_hold exceeds 1
    """
    if epsilon < 0 or lazy_hold < 0 or epsilon + lazy_hold > 1:
        raise PreconditionError(f"invalid lazy probabilities epsilon={epsilon} lazy_hold={lazy_hold}")
    if epsilon == 0 and lazy_hold == 0:
        return inner(state, rng)

    u = rng.random()
    if u < lazy_hold:
        return StepResult(state, False, None, StepEvent.LAZY_HOLD)
    if u < lazy_hold + epsilon:
        keys = tuple(indices) if indices is not None else tuple(sorted(state.momenta))
        if not keys:
            return StepResult(state, False, None, StepEvent.LAZY_HOLD)
        i = keys[int(rng.integers(len(keys)))]
        if i in state.momenta:
            state.flip_momentum(i)
        return StepResult(state, False, i, StepEvent.LAZY_FLIP)
    return inner(state, rng)


def verify_weight_conditions(family, plans, beta, spec, validity):
    # type: (FlowFamily, list[Plan], float, ScoreSpec, ValiditySpec) -> WeightReport
    """
    Check the weight requirements of a flow family on an enumerated plan set.

    Reported conditions:
      - simplex: weights are nonnegative and sum to one wherever N(ξ) is nonempty
      - support: ω_i(ξ) > 0 exactly when N_i^+(ξ) or N_i^-(ξ) is nonempty
      - reversibility: ξ' in N_i^θ(ξ) implies ω_i(ξ') > 0 and ξ in N_i^{-θ}(ξ')

    Weights depend on the plan only, so invariance under momentum reversal holds structurally.
    """
    violations = []
    weights = {}
    for plan in plans:
        layout = flow_layout(plan, family, beta, spec, validity)
        key = layout.key
        w = {i: math.exp(layout.log_weight(i)) for i in family.indices}
        weights[key] = w

        if layout.active and abs(math.fsum(w.values()) - 1.0) > 1e-9:
            violations.append(WeightViolation(key, None, "simplex", f"weights sum to {math.fsum(w.values())}"))
        for i in family.indices:
            in_support = bool(layout.group(i, 1) or layout.group(i, -1))
            if w[i] < 0:
                violations.append(WeightViolation(key, i, "simplex", f"negative weight {w[i]}"))
            if (w[i] > 0) != in_support:
                violations.append(WeightViolation(key, i, "support", f"weight {w[i]}, in support {in_support}"))

        for (i, sign), group in layout.groups.items():
            for c in group:
                old = plan.label(c.vertex)
                with plan.flipped(*c.flip):
                    there = flow_layout(plan, family, beta, spec, validity, c.score)
                    if there.log_weight(i) == NEG_INF or there.find(i, -sign, (c.vertex, old)) is None:
                        detail = f"no reverse move from {there.key} under orientation {-sign}"
                        violations.append(WeightViolation(key, i, "reversibility", detail))
    return WeightReport(violations, weights)
