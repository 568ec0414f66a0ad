"""
Pytest configuration and shared builders for districtflow tests.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
BASE_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(BASE_DIR))

from districtflow.flows import VectorField  # noqa: E402
from districtflow.graph import Edge, PrecinctGraph, Vertex, build_lattice  # noqa: E402
from districtflow.oracle import enumerate_plans  # noqa: E402
from districtflow.plan import Plan  # noqa: E402
from districtflow.schema import ScoreSpec, ValiditySpec  # noqa: E402

UNBOUNDED = ValiditySpec()
BOUNDS_4X4 = ValiditySpec(pop_min=6, pop_max=10)
BOUNDS_3X2 = ValiditySpec(pop_min=2, pop_max=4)
BOUNDS_10X10 = ValiditySpec(pop_min=45, pop_max=55)


def path_graph(n, pops=None):
    # type: (int, list[float]|None) -> PrecinctGraph
    """A 1xn strip of unit squares (exposed sides as outer boundary)."""
    pops = pops or [1.0] * n
    vertices = [Vertex(i, pops[i], 1.0, (float(i), 0.0), 3.0 if i in (0, n - 1) else 2.0) for i in range(n)]
    edges = [Edge(i, i + 1, 1.0) for i in range(n - 1)]
    return PrecinctGraph(vertices, edges)


def graph_document(**overrides):
    # type: (...) -> dict
    """A valid 2x2 lattice document; keyword arguments replace top level fields."""
    doc = {
        "nodes": [
            {"id": 0, "pop": 1, "area": 1, "centroid": [0, 0], "outer_boundary": 2},
            {"id": 1, "pop": 1, "area": 1, "centroid": [1, 0], "outer_boundary": 2},
            {"id": 2, "pop": 1, "area": 1, "centroid": [0, 1], "outer_boundary": 2},
            {"id": 3, "pop": 1, "area": 1, "centroid": [1, 1], "outer_boundary": 2},
        ],
        "edges": [
            {"u": 0, "v": 1},
            {"u": 0, "v": 2},
            {"u": 1, "v": 3, "shared": 1.0},
            {"u": 2, "v": 3},
        ],
        "shape": [2, 2],
    }
    doc.update(overrides)
    return doc


def graph_bytes(**overrides):
    # type: (...) -> bytes
    return json.dumps(graph_document(**overrides)).encode("utf-8")


def random_valid_plan(graph, validity, n_districts, rng, moves=200):
    # type: (PrecinctGraph, ValiditySpec, int, np.random.Generator, int) -> Plan
    """Random walk over valid single-node moves starting from horizontal bands."""
    from districtflow.plan import horizontal_stripes

    plan = horizontal_stripes(graph, n_districts)
    for _ in range(moves):
        candidates = plan.candidate_moves(validity)
        if not candidates:
            break
        m = candidates[int(rng.integers(len(candidates)))]
        plan.flip(*m.flip)
    return plan


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture
def lattice_4x4():
    return build_lattice(4, 4)


@pytest.fixture
def lattice_3x2():
    return build_lattice(3, 2)


@pytest.fixture
def lattice_10x10():
    return build_lattice(10, 10)


@pytest.fixture
def score_spec():
    return ScoreSpec()


@pytest.fixture
def vortex_4x4(lattice_4x4):
    return VectorField(kind="vortex", center=lattice_4x4.center)


@pytest.fixture(scope="session")
def space_4x4():
    return enumerate_plans(build_lattice(4, 4), BOUNDS_4X4, 2)


@pytest.fixture(scope="session")
def space_3x2():
    return enumerate_plans(build_lattice(3, 2), BOUNDS_3X2, 2)


@pytest.fixture(scope="session")
def space_3x2_three():
    """Three districts of 1 to 3 vertices on the 3x2 lattice."""
    return enumerate_plans(build_lattice(3, 2), ValiditySpec(pop_min=1, pop_max=3), 3)
