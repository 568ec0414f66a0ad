"""Structural validation of graph and plan documents before they become domain objects."""

import math

from districtflow.exceptions import (
    AsymmetricEdgeError,
    DuplicateIdError,
    MalformedGraphError,
    PlanFormatError,
    UnknownVertexError,
)

# Constants for better maintainability
MAX_VERTICES = 1_000_000
MAX_EDGES = 10_000_000
GRAPH_FIELDS = {"nodes", "edges", "shape"}
NODE_REQUIRED = {"id", "pop", "area", "centroid"}
NODE_FIELDS = NODE_REQUIRED | {"outer_boundary"}
EDGE_REQUIRED = {"u", "v"}
EDGE_FIELDS = EDGE_REQUIRED | {"shared"}
PLAN_HEADER = ["vertex_id", "district"]


def validate_graph_payload(data):
    # type: (object) -> dict
    """
    Validate a decoded graph document and normalize it.

    Checks the document structure, per-field types and ranges, id uniqueness and density,
    edge endpoints and edge symmetry. Connectivity is checked when the graph is built.

    :param data: Decoded JSON document
    :return: Dict with "nodes" sorted by id, "edges" as sorted (u, v, shared) triples with u < v
        and optional "shape"
    :raises GraphLoadError: On the first structural problem found
    """
    if not isinstance(data, dict):
        raise MalformedGraphError(f"expected JSON object, got {type(data).__name__}")

    unknown = set(data) - GRAPH_FIELDS
    if unknown:
        raise MalformedGraphError(f"unknown fields: {', '.join(sorted(unknown))}")

    for key in ("nodes", "edges"):
        if key not in data:
            raise MalformedGraphError(f"missing required field: {key}", key)
        if not isinstance(data[key], list):
            raise MalformedGraphError(f"{key} must be a list", key)

    if len(data["nodes"]) > MAX_VERTICES:
        raise MalformedGraphError(f"more than {MAX_VERTICES} nodes", "nodes")
    if len(data["edges"]) > MAX_EDGES:
        raise MalformedGraphError(f"more than {MAX_EDGES} edges", "edges")

    nodes = validate_nodes(data["nodes"])
    edges = validate_edges(data["edges"], len(nodes))
    shape = validate_shape(data.get("shape"), len(nodes))
    return {"nodes": nodes, "edges": edges, "shape": shape}


def validate_nodes(raw_nodes):
    # type: (list) -> list[dict]
    """
    Validate node entries and return them sorted by id.

    :raises DuplicateIdError: If an id appears twice
    :raises MalformedGraphError: On missing/unknown fields, bad values or non-dense ids
    """
    if not raw_nodes:
        raise MalformedGraphError("graph has no nodes", "nodes")

    by_id = {}
    for node in raw_nodes:
        if not isinstance(node, dict):
            raise MalformedGraphError("node entries must be objects", "nodes")
        missing = NODE_REQUIRED - set(node)
        if missing:
            raise MalformedGraphError(f"node missing fields: {', '.join(sorted(missing))}", "nodes")
        unknown = set(node) - NODE_FIELDS
        if unknown:
            raise MalformedGraphError(f"node has unknown fields: {', '.join(sorted(unknown))}", "nodes")

        vid = node["id"]
        if not _is_int(vid):
            raise MalformedGraphError(f"node id must be an integer, got {vid!r}", "nodes")
        if vid in by_id:
            raise DuplicateIdError(vid)

        pop = _number(node["pop"], "pop")
        area = _number(node["area"], "area")
        outer = _number(node.get("outer_boundary", 0.0), "outer_boundary")
        if pop < 0:
            raise MalformedGraphError(f"node {vid}: pop must be nonnegative", "pop")
        if area <= 0:
            raise MalformedGraphError(f"node {vid}: area must be positive", "area")
        if outer < 0:
            raise MalformedGraphError(f"node {vid}: outer_boundary must be nonnegative", "outer_boundary")

        centroid = node["centroid"]
        if not isinstance(centroid, (list, tuple)) or len(centroid) != 2:
            raise MalformedGraphError(f"node {vid}: centroid must be a pair [x, y]", "centroid")
        point = (_number(centroid[0], "centroid"), _number(centroid[1], "centroid"))

        by_id[vid] = {"id": vid, "pop": pop, "area": area, "centroid": point, "outer_boundary": outer}

    if sorted(by_id) != list(range(len(by_id))):
        raise MalformedGraphError("node ids must be dense 0..|V|-1", "nodes")
    return [by_id[i] for i in range(len(by_id))]


def validate_edges(raw_edges, n_vertices):
    # type: (list, int) -> list[tuple[int, int, float]]
    """
    Validate edge entries, merging orientations of the same undirected edge.

    :raises UnknownVertexError: If an endpoint is not a node id
    :raises AsymmetricEdgeError: If both orientations are listed with different shared lengths
    :raises MalformedGraphError: On missing/unknown fields, self loops or bad values
    """
    merged = {}  # type: dict[tuple[int, int], float]
    for edge in raw_edges:
        if not isinstance(edge, dict):
            raise MalformedGraphError("edge entries must be objects", "edges")
        missing = EDGE_REQUIRED - set(edge)
        if missing:
            raise MalformedGraphError(f"edge missing fields: {', '.join(sorted(missing))}", "edges")
        unknown = set(edge) - EDGE_FIELDS
        if unknown:
            raise MalformedGraphError(f"edge has unknown fields: {', '.join(sorted(unknown))}", "edges")

        u, v = edge["u"], edge["v"]
        for endpoint in (u, v):
            if not _is_int(endpoint):
                raise MalformedGraphError(f"edge endpoint must be an integer, got {endpoint!r}", "edges")
            if not 0 <= endpoint < n_vertices:
                raise UnknownVertexError(endpoint)
        if u == v:
            raise MalformedGraphError(f"self loop at vertex {u}", "edges")

        shared = _number(edge.get("shared", 1.0), "shared")
        if shared <= 0:
            raise MalformedGraphError(f"edge ({u}, {v}): shared must be positive", "shared")

        key = (min(u, v), max(u, v))
        if key in merged and merged[key] != shared:
            raise AsymmetricEdgeError(u, v)
        merged[key] = shared

    return [(u, v, merged[(u, v)]) for u, v in sorted(merged)]


def validate_shape(shape, n_vertices):
    # type: (object, int) -> tuple[int, int]|None
    """Validate optional lattice shape metadata."""
    if shape is None:
        return None
    if not isinstance(shape, (list, tuple)) or len(shape) != 2 or not all(_is_int(s) for s in shape):
        raise MalformedGraphError("shape must be a pair [width, height]", "shape")
    width, height = shape
    if width * height != n_vertices:
        raise MalformedGraphError(f"shape {width}x{height} does not match {n_vertices} nodes", "shape")
    return width, height


def validate_plan_rows(header, rows, n_vertices, n_districts):
    # type: (list[str]|None, list[dict], int, int) -> list[int]
    """
    Validate plan CSV rows and return labels in vertex-id order.

    :param header: CSV header fields
    :param rows: Rows as dicts keyed by header fields
    :param n_vertices: Vertex count of the target graph
    :param n_districts: District count of the target plan
    :raises PlanFormatError: On bad header, unparsable values, missing or repeated vertices
    """
    if header != PLAN_HEADER:
        raise PlanFormatError(f"plan header must be {','.join(PLAN_HEADER)}, got {header}")

    labels = [0] * n_vertices
    for row in rows:
        try:
            vid = int(row["vertex_id"])
            district = int(row["district"])
        except (TypeError, ValueError) as e:
            raise PlanFormatError(f"unparsable plan row {row}") from e
        if not 0 <= vid < n_vertices:
            raise PlanFormatError(f"unknown vertex {vid}")
        if not 1 <= district <= n_districts:
            raise PlanFormatError(f"district {district} outside 1..{n_districts}")
        if labels[vid]:
            raise PlanFormatError(f"vertex {vid} assigned twice")
        labels[vid] = district

    missing = [v for v, label in enumerate(labels) if not label]
    if missing:
        raise PlanFormatError(f"{len(missing)} vertices unassigned, first {missing[0]}")
    return labels


def _is_int(value):
    # type: (object) -> bool
    return isinstance(value, int) and not isinstance(value, bool)


def _number(value, field):
    # type: (object, str) -> float
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise MalformedGraphError(f"{field} must be a finite number, got {value!r}", field)
    return float(value)
