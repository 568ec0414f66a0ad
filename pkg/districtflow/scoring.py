"""Score function J = w_pop * J_pop + w_c * J_c and the Gibbs target e^{-J}, with flip deltas."""

import math

from districtflow.exceptions import PreconditionError
from districtflow.graph import FIXED_POINT_SCALE
from districtflow.plan import Plan
from districtflow.schema import ScoreSpec, ValiditySpec

INF = math.inf


def _target(plan, spec):
    # type: (Plan, ScoreSpec) -> float
    if spec.pop_target is not None:
        return spec.pop_target
    return plan.graph.total_pop / plan.n_districts


def _out_of_bounds(pop, spec):
    # type: (float, ScoreSpec) -> bool
    too_small = spec.pop_min is not None and pop < spec.pop_min
    too_large = spec.pop_max is not None and pop > spec.pop_max
    return too_small or too_large


def population_score(plan, spec):
    # type: (Plan, ScoreSpec) -> float
    """J_pop: 0 or +inf in hard-bounds mode, sum of squared deviations from the target otherwise."""
    pops = plan.district_populations()
    if spec.pop_mode == "hard-bounds":
        return INF if any(_out_of_bounds(p, spec) for p in pops) else 0.0
    target = _target(plan, spec)
    return math.fsum((p - target) ** 2 for p in pops)


def compactness_score(plan, spec):
    # type: (Plan, ScoreSpec) -> float
    """J_c in the configured mode, multiplied by compact_scale."""
    if spec.compact_mode == "conflicted-edge-count":
        raw = float(plan.cut_edge_count)
    elif spec.compact_mode == "shared-boundary-length":
        raw = plan.cut_shared_length
    else:
        raw = plan.graph.total_outer_boundary + 2 * plan.cut_shared_length
    return spec.compact_scale * raw


def total_score(plan, spec, validity=None):
    # type: (Plan, ScoreSpec, ValiditySpec|None) -> float
    """
    Evaluate J(ξ).

    :param plan: Plan to score
    :param spec: Score weights and modes
    :param validity: If given, invalid plans score +inf
    :return: J, +inf outside the valid plan space
    """
    if validity is not None and not plan.is_valid(validity):
        return INF
    score = 0.0
    if spec.w_pop:
        j_pop = population_score(plan, spec)
        if j_pop == INF:
            return INF
        score += spec.w_pop * j_pop
    if spec.w_c:
        score += spec.w_c * compactness_score(plan, spec)
    return score


def score_delta(plan, flip, spec, validity=None):
    # type: (Plan, tuple[int, int], ScoreSpec, ValiditySpec|None) -> float
    """
    ΔJ = J(F_(u,v)(ξ)) - J(ξ), touching only the two modified districts.

    :raises PreconditionError: If the flip is not a label-changing flip of adjacent vertices, or
        (when `validity` is given) not in C(ξ)
    """
    u, v = flip
    graph = plan.graph
    if not graph.is_adjacent(u, v) or plan.label(u) == plan.label(v):
        raise PreconditionError(f"flip ({u}, {v}) is not a conflicted edge")
    if validity is not None and not plan.move_is_valid(v, plan.label(u), validity):
        raise PreconditionError(f"flip ({u}, {v}) leaves the valid plan space")
    return move_delta(plan, v, plan.label(u), spec)


def move_delta(plan, v, new, spec):
    # type: (Plan, int, int, ScoreSpec) -> float
    """ΔJ of relabeling vertex v to `new` (no precondition checks)."""
    old = plan.label(v)
    graph = plan.graph
    delta = 0.0

    if spec.w_pop:
        pop_v = graph.pop[v]
        pop_old = plan.district_population(old)
        pop_new = plan.district_population(new)
        if spec.pop_mode == "hard-bounds":
            before = _out_of_bounds(pop_old, spec) or _out_of_bounds(pop_new, spec)
            after = _out_of_bounds(pop_old - pop_v, spec) or _out_of_bounds(pop_new + pop_v, spec)
            if after and not before:
                return INF
            if before and not after:
                return -INF
        else:
            t = _target(plan, spec)
            after = (pop_old - pop_v - t) ** 2 + (pop_new + pop_v - t) ** 2
            before = (pop_old - t) ** 2 + (pop_new - t) ** 2
            delta += spec.w_pop * (after - before)

    if spec.w_c:
        cut = 0
        shared_q = 0
        for w in graph.adjacency[v]:
            lw = plan.label(w)
            if lw == old:
                cut += 1
                shared_q += graph.shared_q[(v, w)]
            elif lw == new:
                cut -= 1
                shared_q -= graph.shared_q[(v, w)]
        if spec.compact_mode == "conflicted-edge-count":
            raw = float(cut)
        elif spec.compact_mode == "shared-boundary-length":
            raw = shared_q / FIXED_POINT_SCALE
        else:
            raw = 2 * shared_q / FIXED_POINT_SCALE
        delta += spec.w_c * spec.compact_scale * raw

    return delta


def log_target(score):
    # type: (float) -> float
    """Unnormalized log Gibbs density log π̃ = -J."""
    return -score


def log_gibbs_ratio(plan_a, plan_b, spec):
    # type: (Plan, Plan, ScoreSpec) -> float
    """log(π̃(a) / π̃(b)) = J(b) - J(a)."""
    return total_score(plan_b, spec) - total_score(plan_a, spec)
