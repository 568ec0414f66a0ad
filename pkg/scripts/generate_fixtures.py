#!/usr/bin/env python
"""
Generate graph and experiment config fixtures.

Writes lattice graph documents (the same format `load_graph` reads) and one experiment
config per sampler for the 4x4 instance, so that graph-file runs can be tried without
external data.
"""

import json
import sys
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from districtflow.graph import build_lattice, dump_graph, load_graph  # noqa: E402
from districtflow.schema import ExperimentConfig  # noqa: E402

FIXTURES_DIR = Path(__file__).parent.parent / "configs" / "fixtures"
LATTICES = [(2, 2), (3, 2), (4, 4), (10, 10)]
METHODS = ["snf", "snf-tempered", "com-flow", "d2d-flow"]


def write_graphs():
    # type: () -> dict[tuple[int, int], Path]
    """Write one graph document per lattice and check that it loads back."""
    paths = {}
    for width, height in LATTICES:
        graph = build_lattice(width, height)
        data = dump_graph(graph)
        if len(load_graph(data)) != width * height:
            raise RuntimeError(f"lattice {width}x{height} did not load back")
        path = FIXTURES_DIR / f"lattice_{width}x{height}.graph.json"
        path.write_bytes(data)
        paths[(width, height)] = path
        print(f"  {path.name}: {len(graph)} vertices, {len(graph.edges)} edges")
    return paths


def write_configs(graph_path):
    # type: (Path) -> None
    """Write a validated 4x4 experiment config for every sampler."""
    for method in METHODS:
        config = ExperimentConfig.model_validate(
            {
                "graph": {"path": str(graph_path.relative_to(FIXTURES_DIR.parent.parent))},
                "validity": {"pop_min": 6, "pop_max": 10},
                "method": method,
                "field": {"kind": "vortex"} if method == "com-flow" else None,
                "chains": 2,
                "steps": 100_000,
                "horizon": 1000,
                "band": 1,
                "out": f"runs/fixtures/{method}",
            }
        )
        path = FIXTURES_DIR / f"lattice_4x4.{method}.json"
        data = config.model_dump(mode="json", exclude_defaults=True)
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        print(f"  {path.name}")


def main():
    # type: () -> None
    """Main entry point."""
    FIXTURES_DIR.mkdir(parents=True, exist_ok=True)
    print(f"Writing fixtures to {FIXTURES_DIR}")
    paths = write_graphs()
    write_configs(paths[(4, 4)])


if __name__ == "__main__":
    main()
