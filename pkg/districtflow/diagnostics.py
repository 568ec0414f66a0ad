"""
Measurements on sampler trajectories.

Per-vertex occupancy, meta-stable state classification on the two-district square lattice,
transition counting between meta-states, Hamming distance and the bootstrap decorrelation
curve G(t). Accumulators are mergeable so chains can be reduced in any grouping.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from districtflow.exceptions import InsufficientTraceError, PreconditionError, UnsupportedInstanceError
from districtflow.graph import PrecinctGraph
from districtflow.plan import Plan

logger = logging.getLogger(__name__)

META_STATES = ("N", "E", "S", "W")
DESIGNATED_DISTRICT = 1


class TraceRecord(NamedTuple):
    """One chain step as seen by a trace consumer; `momentum_flips` counts sign changes in that step."""

    step: int
    score: float
    metastate: str | None
    accepted: bool
    flow: object = None
    momentum_flips: int = 0


####################################################################################################
# Occupancy                                                                                        #
####################################################################################################


def display_value(f):
    # type: (np.ndarray|float) -> np.ndarray|float
    """log(1 + |f - 1/2|) * sign(f - 1/2)."""
    d = np.asarray(f, dtype=float) - 0.5
    return np.sign(d) * np.log1p(np.abs(d))


@dataclass
class OccupancyField:
    """Fraction of observed steps each vertex spent in the designated district."""

    fractions: np.ndarray
    district: int = DESIGNATED_DISTRICT

    @property
    def display(self):
        # type: () -> np.ndarray
        return display_value(self.fractions)

    @property
    def max_deviation(self):
        # type: () -> float
        return float(np.abs(self.fractions - 0.5).max())

    def rows(self):
        # type: () -> list[tuple[int, float, float]]
        return [(v, float(f), float(d)) for v, (f, d) in enumerate(zip(self.fractions, self.display))]


class OccupancyAccumulator:
    """
    Time-integrated district membership, updated in O(1) per accepted move.

    Observation times are 1..steps (the state after each step). A move at step t changes the
    state observed from time t on.
    """

    def __init__(self, labels, district=DESIGNATED_DISTRICT, start=0):
        # type: (list[int], int, int) -> None
        self.district = district
        self.inside = np.array([label == district for label in labels], dtype=np.int64)
        self.counts = np.zeros(len(labels), dtype=np.int64)
        self.since = np.full(len(labels), start + 1, dtype=np.int64)
        self.steps = start

    def move(self, v, label, step):
        # type: (int, int, int) -> None
        now = int(label == self.district)
        if now == self.inside[v]:
            return
        self.counts[v] += self.inside[v] * (step - self.since[v])
        self.since[v] = step
        self.inside[v] = now

    def advance(self, step):
        # type: (int) -> None
        self.steps = step

    def totals(self):
        # type: () -> np.ndarray
        """Per-vertex observed-in-district counts up to the current step."""
        return self.counts + self.inside * (self.steps + 1 - self.since)

    def field(self):
        # type: () -> OccupancyField
        if self.steps == 0:
            raise InsufficientTraceError("no steps observed")
        return OccupancyField(self.totals() / self.steps, self.district)

    def state(self):
        # type: () -> dict
        return {
            "district": self.district,
            "inside": self.inside.tolist(),
            "counts": self.counts.tolist(),
            "since": self.since.tolist(),
            "steps": self.steps,
        }

    @classmethod
    def from_state(cls, state):
        # type: (dict) -> OccupancyAccumulator
        acc = cls([], state["district"])
        acc.inside = np.array(state["inside"], dtype=np.int64)
        acc.counts = np.array(state["counts"], dtype=np.int64)
        acc.since = np.array(state["since"], dtype=np.int64)
        acc.steps = state["steps"]
        return acc


def merge_occupancy(accumulators):
    # type: (list[OccupancyAccumulator]) -> OccupancyField
    """Pool several chains: total in-district time over total observed time."""
    steps = sum(a.steps for a in accumulators)
    if steps == 0:
        raise InsufficientTraceError("no steps observed")
    totals = sum(a.totals() for a in accumulators)
    return OccupancyField(totals / steps, accumulators[0].district)


####################################################################################################
# Meta-stable states                                                                               #
####################################################################################################


def _check_square(graph, n_districts):
    # type: (PrecinctGraph, int) -> tuple[int, int]
    if graph.shape is None:
        raise UnsupportedInstanceError("meta-stable states are defined on lattice graphs only")
    width, height = graph.shape
    if width != height or width % 2:
        raise UnsupportedInstanceError(f"meta-stable states need an even square lattice, got {width}x{height}")
    if n_districts != 2:
        raise UnsupportedInstanceError(f"meta-stable states need two districts, got {n_districts}")
    return width, height


def _cut_distance(index, side):
    # type: (int, int) -> int
    half = side // 2
    return index - half + 1 if index >= half else half - index


class MetastateClassifier:
    """
    Straight-cut reference plans and the vertices each must agree with.

    N/S put district 1 on the upper/lower half of the rows, E/W on the right/left half of
    the columns. A plan matches a reference when it agrees on every vertex whose lattice
    distance from the cut exceeds `band`.
    """

    def __init__(self, graph, n_districts=2, band=3):
        # type: (PrecinctGraph, int, int) -> None
        width, height = _check_square(graph, n_districts)
        self.band = band
        self.references = {}  # type: dict[str, dict[int, int]]
        for name in META_STATES:
            ref = {}
            for v in range(len(graph)):
                row, col = divmod(v, width)
                if name in "NS":
                    far = _cut_distance(row, height) > band
                    upper = row >= height // 2
                    label = 1 if upper == (name == "N") else 2
                else:
                    far = _cut_distance(col, width) > band
                    right = col >= width // 2
                    label = 1 if right == (name == "E") else 2
                if far:
                    ref[v] = label
            self.references[name] = ref

    def mismatches(self, labels):
        # type: (list[int]) -> dict[str, int]
        return {
            name: sum(labels[v] != label for v, label in ref.items()) for name, ref in self.references.items()
        }

    def classify(self, labels):
        # type: (list[int]) -> str|None
        matches = [name for name, n in self.mismatches(labels).items() if n == 0]
        return matches[0] if len(matches) == 1 else None

    def tracker(self, labels):
        # type: (list[int]) -> MetastateTracker
        return MetastateTracker(self, labels)


class MetastateTracker:
    """Incremental mismatch counts against every reference, O(1) per move."""

    def __init__(self, classifier, labels):
        # type: (MetastateClassifier, list[int]) -> None
        self.classifier = classifier
        self.misses = classifier.mismatches(labels)

    def move(self, v, old, new):
        # type: (int, int, int) -> None
        for name, ref in self.classifier.references.items():
            want = ref.get(v)
            if want is not None:
                self.misses[name] += (new != want) - (old != want)

    @property
    def current(self):
        # type: () -> str|None
        matches = [name for name, n in self.misses.items() if n == 0]
        return matches[0] if len(matches) == 1 else None


@lru_cache(maxsize=16)
def metastate_classifier(graph, n_districts=2, band=3):
    # type: (PrecinctGraph, int, int) -> MetastateClassifier
    """Shared classifier per (graph, district count, band)."""
    return MetastateClassifier(graph, n_districts, band)


def classify_metastable(plan, band=3):
    # type: (Plan, int) -> str|None
    """
    Meta-stable state of a two-district square-lattice plan.

    :return: One of N, E, S, W (the side district 1 occupies) or None
    :raises UnsupportedInstanceError: For non-square graphs or more than two districts
    """
    return metastate_classifier(plan.graph, plan.n_districts, band).classify(plan.labels)


class TransitionCounter:
    """Transitions between consecutive distinct meta-states; unlabeled steps are skipped."""

    def __init__(self):
        self.counts = Counter()  # type: Counter[tuple[str, str]]
        self.visits = Counter()  # type: Counter[str]
        self.observed = 0
        self.last = None  # type: str|None

    def observe(self, label, repeat=1):
        # type: (str|None, int) -> None
        self.observed += repeat
        if label is None:
            return
        self.visits[label] += repeat
        if self.last is not None and label != self.last:
            self.counts[(self.last, label)] += 1
        self.last = label

    @property
    def total(self):
        # type: () -> int
        return sum(self.counts.values())

    def matrix(self):
        # type: () -> np.ndarray
        m = np.zeros((len(META_STATES), len(META_STATES)), dtype=np.int64)
        for (a, b), n in self.counts.items():
            m[META_STATES.index(a), META_STATES.index(b)] = n
        return m

    def frequencies(self):
        # type: () -> dict[str, float]
        """Fraction of observed steps spent in each meta-state."""
        if not self.observed:
            return dict.fromkeys(META_STATES, 0.0)
        return {name: self.visits[name] / self.observed for name in META_STATES}

    def merge(self, other):
        # type: (TransitionCounter) -> TransitionCounter
        """Pooled counts; the chains' last states are not joined."""
        merged = TransitionCounter()
        merged.counts = self.counts + other.counts
        merged.visits = self.visits + other.visits
        merged.observed = self.observed + other.observed
        return merged

    def rows(self):
        # type: () -> list[tuple[str, str, int]]
        return [(a, b, int(self.counts[(a, b)])) for a in META_STATES for b in META_STATES if a != b]

    def state(self):
        # type: () -> dict
        return {
            "counts": [[a, b, n] for (a, b), n in sorted(self.counts.items())],
            "visits": dict(self.visits),
            "observed": self.observed,
            "last": self.last,
        }

    @classmethod
    def from_state(cls, state):
        # type: (dict) -> TransitionCounter
        counter = cls()
        counter.counts = Counter({(a, b): n for a, b, n in state["counts"]})
        counter.visits = Counter(state["visits"])
        counter.observed = state["observed"]
        counter.last = state["last"]
        return counter


def count_transitions(trace):
    # type: (list[str|None]) -> tuple[np.ndarray, int]
    """4x4 transition counts (rows: from, columns: to, in N, E, S, W order) and their total."""
    counter = TransitionCounter()
    for label in trace:
        counter.observe(label)
    return counter.matrix(), counter.total


####################################################################################################
# Overlap and decorrelation                                                                        #
####################################################################################################


def hamming(plan, plan2):
    # type: (Plan, Plan) -> int
    """Number of precincts assigned to different districts."""
    if plan.graph is not plan2.graph and plan.graph.adjacency != plan2.graph.adjacency:
        raise PreconditionError("plans belong to different graphs")
    if plan.n_districts != plan2.n_districts:
        raise PreconditionError("plans have different district counts")
    return sum(a != b for a, b in zip(plan.labels, plan2.labels))


def overlap_matrix_form(labels_a, labels_b, n_districts):
    # type: (np.ndarray|list[int], np.ndarray|list[int], int) -> float
    """d/(n(d-1)) tr((φ(ξ) - Eφ)(φ(ξ') - Eφ)^T) with one-hot assignment matrices φ."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    n, d = len(a), n_districts
    eye = np.eye(d)
    phi_a = eye[a - 1] - 1.0 / d
    phi_b = eye[b - 1] - 1.0 / d
    return float(d * np.trace(phi_a @ phi_b.T) / (n * (d - 1)))


def overlap_hamming_form(distance, n, n_districts):
    # type: (np.ndarray|int, int, int) -> np.ndarray|float
    """The same overlap from the Hamming distance: (d(n - H) - n) / (n(d - 1))."""
    d = n_districts
    return (d * (n - np.asarray(distance, dtype=float)) - n) / (n * (d - 1))


class GCurve(NamedTuple):
    t: np.ndarray
    G: np.ndarray
    stderr: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray

    def rows(self):
        # type: () -> list[tuple[int, float, float, float]]
        columns = zip(self.t, self.G, self.ci_low, self.ci_high)
        return [(int(t), float(g), float(lo), float(hi)) for t, g, lo, hi in columns]

    def first_below(self, level):
        # type: (float) -> int|None
        """Smallest t with G(t) <= level."""
        below = np.nonzero(self.G <= level)[0]
        return int(self.t[below[0]]) if len(below) else None


def estimate_G(traces, horizon, n_boot, rng, snapshot_interval=1, n_districts=2, lag_stride=1, z=1.96):
    # type: (list[np.ndarray], int, int, np.random.Generator, int, int, int, float) -> GCurve
    """
    Bootstrap estimate of the normalized overlap G(t) for t = 0..horizon.

    :param traces: Per-chain plan snapshots as (m, n) label arrays, one row per snapshot
    :param horizon: Largest lag in steps, a multiple of `snapshot_interval`
    :param n_boot: Start points drawn per chain, uniformly with replacement among those
        leaving a full horizon
    :param lag_stride: Evaluate every `lag_stride`-th snapshot lag
    :raises InsufficientTraceError: If a trace is not longer than the horizon
    """
    if horizon % snapshot_interval:
        raise PreconditionError(f"snapshot interval {snapshot_interval} does not divide horizon {horizon}")
    max_lag = horizon // snapshot_interval
    lags = np.arange(0, max_lag + 1, lag_stride)

    picks = []
    for trace in traces:
        trace = np.asarray(trace)
        n_starts = len(trace) - max_lag
        if n_starts < 1:
            raise InsufficientTraceError(
                f"trace of {len(trace)} snapshots is too short for a horizon of {max_lag} snapshots"
            )
        picks.append((trace, rng.integers(0, n_starts, size=n_boot)))

    G = np.empty(len(lags))
    stderr = np.empty(len(lags))
    for k, lag in enumerate(lags):
        values = []
        for trace, starts in picks:
            distance = (trace[starts] != trace[starts + lag]).sum(axis=1)
            values.append(overlap_hamming_form(distance, trace.shape[1], n_districts))
        pooled = np.concatenate(values)
        G[k] = pooled.mean()
        stderr[k] = pooled.std(ddof=1) / math.sqrt(len(pooled)) if len(pooled) > 1 else 0.0

    logger.debug("Estimated G over %s lags from %s chains", len(lags), len(picks))
    return GCurve(lags * snapshot_interval, G, stderr, G - z * stderr, G + z * stderr)


####################################################################################################
# Chain summaries                                                                                  #
####################################################################################################


@dataclass
class ChainSummary:
    """Event counts and meta-state statistics of one chain (or several, after merging)."""

    chains: list[int] = field(default_factory=list)
    steps: int = 0
    events: Counter = field(default_factory=Counter)
    transitions: int = 0
    metastate_steps: Counter = field(default_factory=Counter)

    @property
    def accepted(self):
        # type: () -> int
        return self.events["accepted"]

    @property
    def acceptance_rate(self):
        # type: () -> float
        return self.accepted / self.steps if self.steps else 0.0

    @property
    def forced_flips(self):
        # type: () -> int
        return self.events["forced-flip"]

    def metastate_frequencies(self):
        # type: () -> dict[str, float]
        if not self.steps:
            return dict.fromkeys(META_STATES, 0.0)
        return {name: self.metastate_steps[name] / self.steps for name in META_STATES}

    def merge(self, other):
        # type: (ChainSummary) -> ChainSummary
        return ChainSummary(
            chains=sorted(self.chains + other.chains),
            steps=self.steps + other.steps,
            events=self.events + other.events,
            transitions=self.transitions + other.transitions,
            metastate_steps=self.metastate_steps + other.metastate_steps,
        )

    def row(self):
        # type: () -> dict
        chain = "+".join(str(c) for c in self.chains) if len(self.chains) != 1 else str(self.chains[0])
        freqs = self.metastate_frequencies()
        return {
            "chain": chain,
            "steps": self.steps,
            "acceptance_rate": f"{self.acceptance_rate:.6f}",
            "forced_flips": self.forced_flips,
            "transitions": self.transitions,
            **{f"freq_{name}": f"{freqs[name]:.6f}" for name in META_STATES},
        }
