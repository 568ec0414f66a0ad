"""
Exact small-instance oracle.

Enumerates every valid plan of a small instance, builds the exact transition matrix of a
sampler over its extended state space (no Monte Carlo anywhere) and checks stationarity,
(skew) balance, irreducibility and the momentum-flip condition on non-escapable circuits.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, NamedTuple

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from districtflow import settings
from districtflow.exceptions import CapacityError, PreconditionError, WeightConditionError
from districtflow.fingerprint import PlanKey
from districtflow.flows import CenterOfMassFlow, DistrictPairFlow, VectorField
from districtflow.graph import PrecinctGraph, build_lattice
from districtflow.msmh import LOG2, FlowFamily, FlowLayout, flow_layout, log_acceptance
from districtflow.plan import Plan
from districtflow.schema import OracleReport, ScoreSpec, ValiditySpec
from districtflow.scoring import total_score
from districtflow.tempering import Neighborhood, scan_neighborhood, snf_log_ratio

logger = logging.getLogger(__name__)

METHODS = ("snf", "snf-tempered", "com-flow", "d2d-flow")


####################################################################################################
# Enumeration                                                                                      #
####################################################################################################


@dataclass
class EnumeratedSpace:
    """All valid plans of an instance in canonical (lexicographic label) order."""

    graph: PrecinctGraph
    validity: ValiditySpec
    n_districts: int
    keys: list[PlanKey]
    index: dict[PlanKey, int]
    quotient: bool = False

    def __len__(self):
        # type: () -> int
        return len(self.keys)

    def plan(self, i):
        # type: (int) -> Plan
        return Plan(self.graph, list(self.keys[i].labels), self.n_districts)


def _is_canonical(labels):
    # type: (tuple[int, ...]) -> bool
    """Whether labels appear in first-occurrence order 1, 2, 3, ..."""
    expected = 1
    for label in labels:
        if label == expected:
            expected += 1
        elif label > expected:
            return False
    return True


def enumerate_plans(graph, validity, n_districts, cap=None, quotient=False):
    # type: (PrecinctGraph, ValiditySpec, int, int|None, bool) -> EnumeratedSpace
    """
    Exhaustively enumerate the valid plans of an instance.

    :param cap: Maximum number of candidate labelings n_D^|V| (defaults to the configured cap)
    :param quotient: Keep one representative per district-label permutation class
    :raises CapacityError: If the labeling count exceeds the cap
    """
    cap = cap or settings.DISTRICTFLOW_ENUMERATION_CAP
    total = n_districts ** len(graph)
    if total > cap:
        raise CapacityError(
            f"{n_districts}^{len(graph)} = {total} labelings exceed the enumeration cap {cap}; "
            "use a smaller instance"
        )

    keys = []
    for labels in product(range(1, n_districts + 1), repeat=len(graph)):
        if quotient and not _is_canonical(labels):
            continue
        plan = Plan(graph, labels, n_districts)
        if plan.is_valid(validity):
            keys.append(plan.fingerprint())

    index = {key: i for i, key in enumerate(keys)}
    if len(index) != len(keys):
        raise PreconditionError("plan fingerprint collision during enumeration")
    logger.info("Enumerated %s valid plans out of %s labelings", len(keys), total)
    return EnumeratedSpace(graph, validity, n_districts, keys, index, quotient)


def compare_connectivity_definitions(graph, validity, n_districts, cap=None):
    # type: (PrecinctGraph, ValiditySpec, int, int|None) -> dict[str, int]
    """Plan counts with district connectivity only versus additionally requiring no holes."""
    connected = validity.model_copy(update={"require_connected": True, "require_simply_connected": False})
    simple = validity.model_copy(update={"require_connected": True, "require_simply_connected": True})
    n_connected = len(enumerate_plans(graph, connected, n_districts, cap))
    n_simple = len(enumerate_plans(graph, simple, n_districts, cap))
    return {"connected": n_connected, "simply_connected": n_simple, "difference": n_connected - n_simple}


####################################################################################################
# Samplers and exact kernels                                                                       #
####################################################################################################


@dataclass(frozen=True)
class SamplerSpec:
    """A sampler configuration whose exact kernel can be built."""

    method: str
    beta: float = 0.5
    score: ScoreSpec = field(default_factory=ScoreSpec)
    vector_field: VectorField | None = None
    tie_salt: int = 0
    epsilon: float = 0.0
    lazy_hold: float = 0.0
    resample_on_activation: bool = True
    simplified_ratio: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise PreconditionError(f"unknown method {self.method!r}")

    @property
    def effective_beta(self):
        # type: () -> float
        """The plain single-node flip proposes uniformly."""
        return 0.0 if self.method == "snf" else self.beta

    def family(self, n_districts):
        # type: (int) -> FlowFamily|None
        if self.method == "com-flow":
            if self.vector_field is None:
                raise PreconditionError("com-flow requires a vector field")
            return CenterOfMassFlow(self.vector_field, self.tie_salt)
        if self.method == "d2d-flow":
            return DistrictPairFlow(n_districts, self.resample_on_activation, self.simplified_ratio)
        return None

    @property
    def label(self):
        # type: () -> str
        parts = [self.method, f"beta={self.effective_beta:g}"]
        if self.epsilon or self.lazy_hold:
            parts.append(f"lazy={self.epsilon:g}/{self.lazy_hold:g}")
        if self.simplified_ratio:
            parts.append("simplified")
        return " ".join(parts)


@dataclass
class KernelMatrix:
    """Dense row-stochastic matrix over extended states (plan index, momenta)."""

    space: EnumeratedSpace
    sampler: SamplerSpec
    states: list[tuple[int, tuple]]
    index: dict[tuple[int, tuple], int]
    P: np.ndarray
    pi: np.ndarray
    flows: tuple
    weights: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)
    involutions: dict = field(default_factory=dict)

    def __len__(self):
        # type: () -> int
        return len(self.states)

    def plan_marginal(self, vector):
        # type: (np.ndarray) -> np.ndarray
        """Sum an extended-state vector over momenta."""
        out = np.zeros(len(self.space))
        np.add.at(out, np.array([p for p, _ in self.states]), vector)
        return out


class _KernelContext(NamedTuple):
    space: EnumeratedSpace
    layouts: list
    tracked: list
    index: dict
    involutions: dict
    family: FlowFamily
    beta: float


def _neighbor_index(space, key, candidate):
    # type: (EnumeratedSpace, PlanKey, object) -> int
    try:
        return space.index[key.with_label(candidate.vertex, candidate.label)]
    except KeyError:
        raise PreconditionError("enumerated space is not closed under flips (quotient space?)") from None


def plan_layouts(space, sampler):
    # type: (EnumeratedSpace, SamplerSpec) -> list[FlowLayout|Neighborhood]
    """Per-plan scored neighborhoods (baseline) or flow layouts (flow samplers)."""
    family = sampler.family(space.n_districts)
    beta = sampler.effective_beta
    layouts = []
    for i in range(len(space)):
        plan = space.plan(i)
        if family is None:
            layouts.append(scan_neighborhood(plan, sampler.score, space.validity))
        else:
            layouts.append(flow_layout(plan, family, beta, sampler.score, space.validity))
    return layouts


def build_kernel_matrix(space, sampler, cap=None, with_components=False):
    # type: (EnumeratedSpace, SamplerSpec, int|None, bool) -> KernelMatrix
    """
    Build the exact transition matrix of a sampler on an enumerated space.

    :param cap: Maximum number of extended states (defaults to the configured dense cap)
    :param with_components: Also keep the per-flow kernels P_i and weights ω_i
    :raises CapacityError: If the extended state space exceeds the cap
    """
    if space.quotient:
        raise PreconditionError("kernels are defined on the full labeled plan space")
    cap = cap or settings.DISTRICTFLOW_DENSE_STATE_CAP
    family = sampler.family(space.n_districts)
    beta = sampler.effective_beta
    layouts = plan_layouts(space, sampler)

    # Extended states
    tracked = [family.tracked(lay) if family else () for lay in layouts]
    states = []
    for p, keys in enumerate(tracked):
        for signs in product((-1, 1), repeat=len(keys)):
            states.append((p, tuple(zip(keys, signs))))
    if len(states) > cap:
        raise CapacityError(f"{len(states)} extended states exceed the dense cap {cap}")
    index = {s: x for x, s in enumerate(states)}
    n = len(states)

    log_pi = np.array([-layouts[p].score - len(theta) * LOG2 for p, theta in states])
    pi = np.exp(log_pi - logsumexp(log_pi))

    flows = family.indices if family else ()
    involutions = {}
    for i in flows:
        perm = np.arange(n)
        for x, (p, theta) in enumerate(states):
            m = dict(theta)
            if i in m:
                m[i] = -m[i]
                perm[x] = index[(p, tuple(m.items()))]
        involutions[i] = perm

    P = np.zeros((n, n))
    weights = {i: np.zeros(n) for i in flows} if with_components else {}
    components = {i: np.zeros((n, n)) for i in flows} if with_components else {}
    ctx = _KernelContext(space, layouts, tracked, index, involutions, family, beta)

    for x, (p, theta) in enumerate(states):
        lay = layouts[p]
        key = space.keys[p]
        if family is None:
            _fill_baseline_row(P, x, lay, key, space, layouts, beta)
            continue
        if not lay.active:
            P[x, x] = 1.0
            continue
        momenta = dict(theta)
        for i, log_w in lay.log_w.items():
            w = math.exp(log_w)
            row = _flow_row(ctx, x, p, i, momenta)
            for y, mass in row.items():
                P[x, y] += w * mass
                if with_components:
                    components[i][x, y] += mass
            if with_components:
                weights[i][x] = w

    if sampler.epsilon or sampler.lazy_hold:
        P = _lazy_mixture(P, sampler.epsilon, sampler.lazy_hold, flows, involutions)

    logger.info("Built %s kernel with %s states", sampler.label, n)
    return KernelMatrix(space, sampler, states, index, P, pi, flows, weights, components, involutions)


def _fill_baseline_row(P, x, nb, key, space, layouts, beta):
    # type: (np.ndarray, int, Neighborhood, PlanKey, EnumeratedSpace, list, float) -> None
    if not nb.candidates:
        P[x, x] = 1.0
        return
    log_z = nb.log_partition(beta)
    for c in nb.candidates:
        q = math.exp(-beta * c.score - log_z)
        y = _neighbor_index(space, key, c)
        log_r = snf_log_ratio(nb.score, c.score, log_z, layouts[y].log_partition(beta), beta)
        a = 1.0 if log_r >= 0 else math.exp(log_r)
        P[x, y] += q * a
        P[x, x] += q * (1.0 - a)


def _flow_row(ctx, x, p, i, momenta):
    # type: (_KernelContext, int, int, object, dict) -> dict[int, float]
    """Transition masses of flow i from extended state x (before weighting by ω_i)."""
    space, layouts, tracked, index, involutions, family, beta = ctx
    lay = layouts[p]
    key = space.keys[p]
    row = {}  # type: dict[int, float]
    flipped = int(involutions[i][x])
    theta_i = momenta[i]
    group = lay.group(i, theta_i)
    if not group:
        row[flipped] = 1.0
        return row

    log_z = lay.log_z_dir(i, theta_i)
    for c in group:
        q = math.exp(-beta * c.score - log_z)
        p2 = _neighbor_index(space, key, c)
        there = layouts[p2]
        if there.find(i, -theta_i, (c.vertex, key.labels[c.vertex])) is None:
            raise WeightConditionError(key, space.keys[p2], i)
        log_r = log_acceptance(lay, there, i, theta_i, c, beta, family.weight_factor)
        a = 1.0 if log_r >= 0 else math.exp(log_r)

        kept = {k: momenta[k] for k in tracked[p2] if k in momenta}
        fresh = [k for k in tracked[p2] if k not in momenta]
        share = q * a / 2 ** len(fresh)
        for signs in product((-1, 1), repeat=len(fresh)):
            m = dict(kept)
            m.update(zip(fresh, signs))
            y = index[(p2, tuple((k, m[k]) for k in tracked[p2]))]
            row[y] = row.get(y, 0.0) + share
        row[flipped] = row.get(flipped, 0.0) + q * (1.0 - a)
    return row


def _lazy_mixture(P, epsilon, lazy_hold, flows, involutions):
    # type: (np.ndarray, float, float, tuple, dict) -> np.ndarray
    n = P.shape[0]
    lazy = lazy_hold * np.eye(n) + (1.0 - lazy_hold - epsilon) * P
    if not flows:
        return lazy + epsilon * np.eye(n)
    for i in flows:
        lazy[np.arange(n), involutions[i]] += epsilon / len(flows)
    return lazy


####################################################################################################
# Residual checks                                                                                  #
####################################################################################################


def _matrix(matrix):
    # type: (KernelMatrix|np.ndarray) -> np.ndarray
    return matrix.P if isinstance(matrix, KernelMatrix) else np.asarray(matrix, dtype=float)


def check_stochastic(matrix):
    # type: (KernelMatrix|np.ndarray) -> float
    """max |row sum - 1|, also failing on negative entries."""
    P = _matrix(matrix)
    if (P < 0).any():
        return float(-P.min()) + 1.0
    return float(np.abs(P.sum(axis=1) - 1.0).max())


def check_invariance(matrix, target=None):
    # type: (KernelMatrix|np.ndarray, np.ndarray|None) -> float
    """‖πP - π‖_∞ (the target defaults to the matrix's own extended target)."""
    P = _matrix(matrix)
    if target is None:
        if not isinstance(matrix, KernelMatrix):
            raise PreconditionError("a target distribution is required for a bare matrix")
        target = matrix.pi
    target = np.asarray(target, dtype=float)
    if target.shape != (P.shape[0],):
        raise PreconditionError(f"target of shape {target.shape} does not match matrix {P.shape}")
    return float(np.abs(target @ P - target).max())


def check_detailed_balance(matrix):
    # type: (KernelMatrix) -> float
    """max |π(x)P(x,y) - π(y)P(y,x)|."""
    flux = matrix.pi[:, None] * matrix.P
    return float(np.abs(flux - flux.T).max())


def _skew_residual(flux, perm):
    # type: (np.ndarray, np.ndarray) -> float
    mirrored = flux[np.ix_(perm, perm)].T
    return float(np.abs(flux - mirrored).max())


def check_skew_balance(matrix, flow=None):
    # type: (KernelMatrix, object) -> float
    """max |π(x)P(x,y) - π(y)P(S(y),S(x))| for the involution of `flow` (single-flow default)."""
    if flow is None:
        if len(matrix.flows) != 1:
            raise PreconditionError("skew balance of the full kernel needs exactly one flow")
        flow = matrix.flows[0]
    return _skew_residual(matrix.pi[:, None] * matrix.P, matrix.involutions[flow])


def check_mixed_skew_balance(matrix):
    # type: (KernelMatrix) -> dict[object, float]
    """Per-flow residual of ω_i(x)π(x)P_i(x,y) = ω_i(y)π(y)P_i(S_i(y),S_i(x))."""
    if not matrix.components:
        raise PreconditionError("kernel was built without per-flow components")
    return {
        i: _skew_residual(
            (matrix.pi * matrix.weights[i])[:, None] * matrix.components[i],
            matrix.involutions[i],
        )
        for i in matrix.flows
    }


class Irreducibility(NamedTuple):
    irreducible: bool
    witness: tuple[int, int] | None


def transition_digraph(matrix):
    # type: (KernelMatrix|np.ndarray) -> nx.DiGraph
    P = _matrix(matrix)
    g = nx.DiGraph()
    g.add_nodes_from(range(P.shape[0]))
    g.add_edges_from(zip(*(a.tolist() for a in np.nonzero(P > 0))))
    return g


def check_irreducible(matrix):
    # type: (KernelMatrix|np.ndarray) -> Irreducibility
    """Strong connectivity of the positive-entry digraph; witness (x, y) with y unreachable from x."""
    g = transition_digraph(matrix)
    if nx.is_strongly_connected(g):
        return Irreducibility(True, None)
    reachable = nx.descendants(g, 0) | {0}
    for y in g.nodes:
        if y not in reachable:
            return Irreducibility(False, (0, y))
    ancestors = nx.ancestors(g, 0) | {0}
    for x in g.nodes:
        if x not in ancestors:
            return Irreducibility(False, (x, 0))
    raise AssertionError("unreachable")  # pragma: no cover


####################################################################################################
# Flow digraphs and circuits                                                                       #
####################################################################################################


def flow_digraph(space, sampler, flow, theta, layouts=None):
    # type: (EnumeratedSpace, SamplerSpec, object, int, list|None) -> nx.DiGraph
    """Directed graph over plan indices with an edge ξ -> ξ' for every ξ' in N_flow^theta(ξ)."""
    layouts = layouts or plan_layouts(space, sampler)
    g = nx.DiGraph()
    g.add_nodes_from(range(len(space)))
    for p, lay in enumerate(layouts):
        for c in lay.group(flow, theta):
            g.add_edge(p, _neighbor_index(space, space.keys[p], c))
    return g


def find_non_escapable_circuits(digraph):
    # type: (nx.DiGraph) -> list[frozenset]
    """Vertex sets of the maximal non-escapable circuits: sink SCCs containing an edge."""
    condensed = nx.condensation(digraph)
    circuits = []
    for c in condensed.nodes:
        if condensed.out_degree(c):
            continue
        members = condensed.nodes[c]["members"]
        if len(members) > 1 or any(digraph.has_edge(m, m) for m in members):
            circuits.append(frozenset(members))
    return sorted(circuits, key=min)


def check_circuit_condition(space, sampler):
    # type: (EnumeratedSpace, SamplerSpec) -> list[str]
    """Every maximal non-escapable circuit of every G_i^θ must hold a state that can flip θ_i."""
    family = sampler.family(space.n_districts)
    if family is None:
        return []
    beta = sampler.effective_beta
    layouts = plan_layouts(space, sampler)
    violations = []
    for i in family.indices:
        for theta in (1, -1):
            for circuit in find_non_escapable_circuits(flow_digraph(space, sampler, i, theta, layouts)):
                if not any(_can_flip(space, layouts, p, i, theta, family, beta) for p in circuit):
                    msg = f"flow {i} orientation {theta}: circuit of {len(circuit)} plans cannot flip"
                    violations.append(msg)
    return violations


def _can_flip(space, layouts, p, i, theta, family, beta):
    # type: (EnumeratedSpace, list, int, object, int, FlowFamily, float) -> bool
    lay = layouts[p]
    group = lay.group(i, theta)
    if not group:
        return lay.log_weight(i) > -math.inf
    for c in group:
        there = layouts[_neighbor_index(space, space.keys[p], c)]
        if log_acceptance(lay, there, i, theta, c, beta, family.weight_factor) < 0:
            return True
    return False


####################################################################################################
# Reports                                                                                          #
####################################################################################################


def exact_plan_distribution(space, spec):
    # type: (EnumeratedSpace, ScoreSpec) -> np.ndarray
    """Normalized Gibbs distribution e^{-J} over the enumerated plans."""
    log_p = np.array([-total_score(space.plan(i), spec) for i in range(len(space))])
    return np.exp(log_p - logsumexp(log_p))


def oracle_report(name, space, sampler):
    # type: (str, EnumeratedSpace, SamplerSpec) -> OracleReport
    """Run every applicable check for one instance and sampler."""
    family = sampler.family(space.n_districts)
    matrix = build_kernel_matrix(space, sampler, with_components=family is not None)
    irreducible = check_irreducible(matrix)
    lazy = bool(sampler.epsilon or sampler.lazy_hold)
    report = {
        "instance": name,
        "sampler": sampler.label,
        "n_plans": len(space),
        "n_states": len(matrix),
        "stochastic": check_stochastic(matrix),
        "invariance": check_invariance(matrix),
        "irreducible": irreducible.irreducible,
        "witness": irreducible.witness,
        "circuit_violations": check_circuit_condition(space, sampler),
    }
    if family is None:
        report["detailed_balance"] = check_detailed_balance(matrix)
    else:
        if len(family.indices) == 1:
            report["skew_balance"] = check_skew_balance(matrix)
        if not lazy:
            report["mixed_skew_balance"] = {str(k): v for k, v in check_mixed_skew_balance(matrix).items()}
    return OracleReport(**report)


####################################################################################################
# Exactness suite                                                                                  #
####################################################################################################


def default_samplers(graph, beta=0.5):
    # type: (PrecinctGraph, float) -> list[SamplerSpec]
    """The four shipped samplers plus the simplified district-pair ratio, vortex centered on the graph."""
    vortex = VectorField(kind="vortex", center=graph.center)
    return [
        SamplerSpec("snf", beta),
        SamplerSpec("snf-tempered", beta),
        SamplerSpec("com-flow", beta, vector_field=vortex),
        SamplerSpec("d2d-flow", beta),
        SamplerSpec("d2d-flow", beta, simplified_ratio=True),
    ]


def standard_instances(cap=None):
    # type: (int|None) -> list[tuple[str, EnumeratedSpace]]
    """Two-district 2x2 lattice with districts of exactly 2 and 4x4 lattice with districts of 6 to 10."""
    small = build_lattice(2, 2)
    medium = build_lattice(4, 4)
    return [
        ("2x2 [2,2]", enumerate_plans(small, ValiditySpec(pop_min=2, pop_max=2), 2, cap)),
        ("4x4 [6,10]", enumerate_plans(medium, ValiditySpec(pop_min=6, pop_max=10), 2, cap)),
    ]


def run_exactness_suite(instances=None, samplers=None):
    # type: (list[tuple[str, EnumeratedSpace]]|None, list[SamplerSpec]|Callable|None) -> list[OracleReport]
    """
    Oracle reports for every instance and sampler.

    :param instances: Named enumerated spaces (defaults to the standard instances)
    :param samplers: Sampler list, or a function of the instance graph returning one
        (defaults to `default_samplers`)
    """
    instances = instances if instances is not None else standard_instances()
    samplers = samplers if samplers is not None else default_samplers
    reports = []
    for name, space in instances:
        specs = samplers(space.graph) if callable(samplers) else samplers
        for sampler in specs:
            report = oracle_report(name, space, sampler)
            logger.info("%s / %s: invariance %.3e", name, sampler.label, report.invariance)
            reports.append(report)
    return reports
