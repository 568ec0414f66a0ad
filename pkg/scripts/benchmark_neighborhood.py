"""
Benchmark neighborhood scans on the 10x10 lattice.

Every sampler step scores the whole neighborhood of the current plan and, for the tempered
and flow samplers, the neighborhood of the proposed plan as well. This script measures:
- Candidate move enumeration (validity checks only)
- Scoring of the full neighborhood
- Flow layouts (scan plus orientation of every candidate)
- Complete sampler steps per method
"""

import statistics
import sys
import time
from pathlib import Path

import numpy as np

BASE_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(BASE_DIR))

from districtflow.flows import CenterOfMassFlow, DistrictPairFlow, VectorField  # noqa: E402
from districtflow.graph import build_lattice  # noqa: E402
from districtflow.harness import make_stepper  # noqa: E402
from districtflow.msmh import ExtendedState, flow_layout  # noqa: E402
from districtflow.oracle import SamplerSpec  # noqa: E402
from districtflow.plan import horizontal_stripes  # noqa: E402
from districtflow.schema import ScoreSpec, ValiditySpec  # noqa: E402
from districtflow.scoring import total_score  # noqa: E402
from districtflow.tempering import scan_neighborhood  # noqa: E402

VALIDITY = ValiditySpec(pop_min=45, pop_max=55)
SCORE = ScoreSpec(pop_min=45, pop_max=55)


def sample_plans(count, walk=200, seed=0):
    # type: (int, int, int) -> list
    """Plans spread along a random walk over valid single-node moves."""
    rng = np.random.default_rng(seed)
    plan = horizontal_stripes(build_lattice(10, 10), 2)
    plans = []
    for _ in range(count):
        for _ in range(walk):
            moves = plan.candidate_moves(VALIDITY)
            plan.flip(*moves[int(rng.integers(len(moves)))].flip)
        plans.append(plan.copy())
    return plans


def timed(label, func, items, repeat=3):
    # type: (str, callable, list, int) -> None
    """Run `func` over all items `repeat` times and print per-item latency."""
    samples = []
    for _ in range(repeat):
        for item in items:
            started = time.perf_counter()
            func(item)
            samples.append(time.perf_counter() - started)
    samples.sort()
    print(f"{label:<32} avg {statistics.mean(samples) * 1e3:8.3f} ms")
    print(f"{'':<32} p50 {samples[len(samples) // 2] * 1e3:8.3f} ms")
    print(f"{'':<32} p95 {samples[int(len(samples) * 0.95)] * 1e3:8.3f} ms")


def benchmark_scans(plans):
    # type: (list) -> None
    print(f"\n{'=' * 60}")
    print("Neighborhood scans")
    print(f"{'=' * 60}")
    sizes = [len(p.candidate_moves(VALIDITY)) for p in plans]
    print(f"Plans: {len(plans)}, neighborhood size {min(sizes)}..{max(sizes)}\n")

    # Fresh copies defeat the per-version candidate memo
    timed("candidate moves", lambda p: p.copy().candidate_moves(VALIDITY), plans)
    timed("scored neighborhood", lambda p: scan_neighborhood(p.copy(), SCORE, VALIDITY), plans)

    graph = plans[0].graph
    com = CenterOfMassFlow(VectorField(kind="vortex", center=graph.center))
    d2d = DistrictPairFlow(2)
    timed("com-flow layout", lambda p: flow_layout(p.copy(), com, 0.5, SCORE, VALIDITY), plans)
    timed("d2d-flow layout", lambda p: flow_layout(p.copy(), d2d, 0.5, SCORE, VALIDITY), plans)


def benchmark_steps(steps=2000):
    # type: (int) -> None
    print(f"\n{'=' * 60}")
    print(f"Sampler steps ({steps} per method)")
    print(f"{'=' * 60}")
    graph = build_lattice(10, 10)
    vortex = VectorField(kind="vortex", center=graph.center)
    samplers = [
        SamplerSpec("snf", score=SCORE),
        SamplerSpec("snf-tempered", score=SCORE),
        SamplerSpec("com-flow", score=SCORE, vector_field=vortex),
        SamplerSpec("d2d-flow", score=SCORE),
    ]
    for sampler in samplers:
        rng = np.random.default_rng(1)
        family, step = make_stepper(sampler, 2, VALIDITY)
        plan = horizontal_stripes(graph, 2)
        momenta = family.initial_momenta(rng) if family is not None else {}
        state = ExtendedState(plan, momenta, total_score(plan, SCORE))
        started = time.perf_counter()
        accepted = sum(step(state, rng).accepted for _ in range(steps))
        elapsed = time.perf_counter() - started
        print(
            f"{sampler.label:<32} {steps / elapsed:8.1f} steps/sec  acceptance {accepted / steps:.3f}"
        )


def main():
    # type: () -> None
    """Main entry point."""
    benchmark_scans(sample_plans(50))
    benchmark_steps()


if __name__ == "__main__":
    main()
