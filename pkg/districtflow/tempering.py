"""
Tempered single-node-flip proposals and the reversible baseline sampler.

Proposals over a set S of neighbor plans follow e^{-βJ}/Z_β(S). Everything is evaluated in
log space; sampling uses the Gumbel-max construction.
"""

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from districtflow.exceptions import EmptyNeighborhoodError
from districtflow.plan import Move, Plan
from districtflow.schema import ScoreSpec, ValiditySpec
from districtflow.scoring import move_delta, total_score

logger = logging.getLogger(__name__)

NEG_INF = -math.inf


class Candidate(NamedTuple):
    """A scored member of N(ξ)."""

    vertex: int
    label: int
    source: int
    score: float

    @property
    def key(self):
        # type: () -> tuple[int, int]
        return self.vertex, self.label

    @property
    def flip(self):
        # type: () -> tuple[int, int]
        return self.source, self.vertex


class Neighborhood(NamedTuple):
    """N(ξ) with scores, plus the score of ξ itself."""

    score: float
    candidates: list[Candidate]

    def __len__(self):
        # type: () -> int
        return len(self.candidates)

    def log_partition(self, beta):
        # type: (float) -> float
        return local_partition_function(self.candidates, beta)


class SnfStep(NamedTuple):
    plan: Plan
    accepted: bool
    score: float
    vertex: int | None = None


def scan_neighborhood(plan, spec, validity, score=None):
    # type: (Plan, ScoreSpec, ValiditySpec, float|None) -> Neighborhood
    """
    Score every member of N(ξ).

    :param score: Known J(ξ), recomputed when omitted
    """
    current = total_score(plan, spec) if score is None else score
    moves = plan.candidate_moves(validity)  # type: list[Move]
    candidates = [
        Candidate(m.vertex, m.label, m.source, current + move_delta(plan, m.vertex, m.label, spec))
        for m in moves
    ]
    return Neighborhood(current, candidates)


def local_partition_function(candidates, beta):
    # type: (list[Candidate], float) -> float
    """log Σ e^{-βJ} over the candidates; -inf for an empty set."""
    if not candidates:
        return NEG_INF
    if beta == 0:
        return math.log(len(candidates))
    return float(logsumexp([-beta * c.score for c in candidates]))


def sample_tempered(candidates, beta, rng):
    # type: (list[Candidate], float, np.random.Generator) -> Candidate
    """
    Draw a candidate with probability e^{-βJ}/Z_β.

    :raises EmptyNeighborhoodError: If there are no candidates
    """
    if not candidates:
        raise EmptyNeighborhoodError()
    if len(candidates) == 1:
        return candidates[0]
    log_w = np.array([-beta * c.score for c in candidates]) if beta else np.zeros(len(candidates))
    return candidates[int(np.argmax(log_w + rng.gumbel(size=len(candidates))))]


def snf_log_ratio(score, new_score, log_z, new_log_z, beta):
    # type: (float, float, float, float, float) -> float
    """log r = log [e^{-J'+βJ'} Z(ξ)] - log [e^{-J+βJ} Z(ξ')]."""
    return (-new_score + beta * new_score) - (-score + beta * score) + log_z - new_log_z


def accept(log_ratio, rng):
    # type: (float, np.random.Generator) -> bool
    """Metropolis test u < min(1, r); one uniform draw is consumed in every case."""
    u = rng.random()
    return log_ratio >= 0 or u < math.exp(log_ratio)


def snf_mh_step(plan, beta, spec, validity, rng, score=None):
    # type: (Plan, float, ScoreSpec, ValiditySpec, np.random.Generator, float|None) -> SnfStep
    """
    One step of the tempered single-node-flip Metropolis-Hastings chain, in place.

    :return: The (same) plan, whether the proposal was accepted and the current score
    """
    here = scan_neighborhood(plan, spec, validity, score)
    if not here.candidates:
        logger.warning("Empty neighborhood, plan is isolated")
        return SnfStep(plan, False, here.score)

    proposal = sample_tempered(here.candidates, beta, rng)
    log_z = here.log_partition(beta)
    old = plan.flip(*proposal.flip)
    there = scan_neighborhood(plan, spec, validity, proposal.score)
    log_r = snf_log_ratio(here.score, proposal.score, log_z, there.log_partition(beta), beta)
    if accept(log_r, rng):
        logger.debug("snf accepted v=%s -> %s log_r=%.4f", proposal.vertex, proposal.label, log_r)
        return SnfStep(plan, True, proposal.score, proposal.vertex)
    plan.move(proposal.vertex, old)
    return SnfStep(plan, False, here.score)
