"""
Run-time state validation for sampler chains.

These checks compare the incrementally maintained plan state against a from-scratch
recomputation. The harness runs them every `check_interval` steps.
"""

import math

from districtflow.exceptions import CacheCoherenceError, InvalidPlanError
from districtflow.plan import Plan
from districtflow.schema import ScoreSpec, ValiditySpec
from districtflow.scoring import total_score

SCORE_TOLERANCE = 1e-9


def check_plan_valid(plan, validity):
    # type: (Plan, ValiditySpec) -> None
    """
    Check that the plan belongs to the valid plan space.

    :param plan: The plan to check
    :param validity: Constraints defining the valid plan space
    :raises InvalidPlanError: If a district is empty, disconnected or out of bounds
    """
    if not plan.is_valid(validity):
        raise InvalidPlanError(f"plan {plan.fingerprint()} is outside the valid plan space")


def check_cache_coherence(plan):
    # type: (Plan) -> None
    """
    Check that every cached aggregate equals its recomputation exactly.

    :param plan: The plan to check
    :raises CacheCoherenceError: On the first diverging aggregate
    """
    cached = plan.aggregates()
    fresh = plan.fresh_aggregates()
    for name, value in fresh.items():
        if cached[name] != value:
            raise CacheCoherenceError(name, cached[name], value)


def check_score_consistency(plan, score, spec):
    # type: (Plan, float, ScoreSpec) -> None
    """
    Check that a tracked score matches J recomputed from the plan.

    Scores are summed from deltas along the chain, so a relative tolerance applies.

    :param plan: The plan to score
    :param score: The score carried by the chain
    :param spec: Score weights and modes
    :raises CacheCoherenceError: If the scores disagree
    """
    fresh = total_score(plan, spec)
    if math.isinf(fresh) or math.isinf(score):
        if fresh != score:
            raise CacheCoherenceError("score", score, fresh)
        return
    if not math.isclose(score, fresh, rel_tol=SCORE_TOLERANCE, abs_tol=SCORE_TOLERANCE):
        raise CacheCoherenceError("score", score, fresh)


def validate_state(plan, validity, spec, score=None):
    # type: (Plan, ValiditySpec, ScoreSpec, float|None) -> None
    """
    Perform all state validations for a chain's current plan.

    :param plan: The current plan
    :param validity: Constraints defining the valid plan space
    :param spec: Score weights and modes
    :param score: Optional tracked score to compare against a recomputation
    :raises InvalidPlanError: If the plan is invalid
    :raises CacheCoherenceError: If caches or the tracked score diverged
    """
    check_plan_valid(plan, validity)
    check_cache_coherence(plan)
    if score is not None:
        check_score_consistency(plan, score, spec)
