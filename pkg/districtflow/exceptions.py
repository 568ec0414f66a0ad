"""Exception classes for districtflow with structured, machine-readable error details."""


class BaseFlowError(Exception):
    """
    Base exception for all districtflow errors.

    Carries a machine-readable code and maps onto a process exit code for the CLI.
    """

    exit_code = 3  # Runtime failure

    def __init__(self, message, code=None, field=None):
        # type: (str, str|None, str|None) -> None
        """
        Initialize BaseFlowError with structured error details.

        :param message: Human-readable error message
        :param code: Machine-readable error code for programmatic handling
        :param field: The specific config or input field that caused the error
        """
        super().__init__(message)
        self.message = message
        self.code = code or "error"
        self.field = field

    def to_error_response(self):
        # type: () -> dict
        """
        Convert exception to the structured error document printed by the CLI.

        :return: Dictionary with a single "error" entry
        """
        error_detail = {"message": self.message, "code": self.code}
        if self.field:
            error_detail["field"] = self.field
        return {"error": error_detail}


class ValidationError(BaseFlowError, ValueError):
    """
    Base validation error for bad configuration or input documents.
    """

    exit_code = 2  # Configuration error

    def __init__(self, message, code=None, field=None):
        # type: (str, str|None, str|None) -> None
        """
        Initialize ValidationError with structured error details.

        :param message: Human-readable error message
        :param code: Machine-readable error code for programmatic handling
        :param field: The specific field that caused the error
        """
        super().__init__(message, code or "validation_failed", field)


class FieldValidationError(ValidationError):
    """Validation error specific to a field."""

    def __init__(self, field, message, code=None):
        # type: (str, str, str|None) -> None
        """
        Initialize field-specific validation error.

        :param field: The field that failed validation
        :param message: Human-readable error message
        :param code: Machine-readable error code
        """
        super().__init__(message, code, field)


class ConfigError(FieldValidationError):
    """Experiment configuration or settings error."""

    def __init__(self, field, message):
        # type: (str, str) -> None
        """Initialize config error."""
        super().__init__(field, message, "invalid_config")


class GraphLoadError(ValidationError):
    """Base error for precinct graph documents that can not be loaded."""

    def __init__(self, message, code=None, field=None):
        # type: (str, str|None, str|None) -> None
        """Initialize graph load error."""
        super().__init__(message, code or "invalid_graph", field)


class MalformedGraphError(GraphLoadError):
    """Graph document is not well-formed."""

    def __init__(self, message, field=None):
        # type: (str, str|None) -> None
        """Initialize malformed graph error."""
        super().__init__(message, "malformed_graph", field)


class UnknownVertexError(GraphLoadError):
    """Edge references a vertex id that does not exist."""

    def __init__(self, vertex_id):
        # type: (object) -> None
        """Initialize unknown vertex error."""
        super().__init__(f"unknown vertex: {vertex_id}", "unknown_vertex", "edges")
        self.vertex_id = vertex_id


class DuplicateIdError(GraphLoadError):
    """Vertex id appears more than once."""

    def __init__(self, vertex_id):
        # type: (object) -> None
        """Initialize duplicate id error."""
        super().__init__(f"duplicate id: {vertex_id}", "duplicate_id", "nodes")
        self.vertex_id = vertex_id


class AsymmetricEdgeError(GraphLoadError):
    """Edge listed in both orientations with conflicting attributes."""

    def __init__(self, u, v):
        # type: (int, int) -> None
        """Initialize asymmetric edge error."""
        super().__init__(f"asymmetric edge: ({u}, {v}) and ({v}, {u}) disagree", "asymmetric_edge", "edges")


class DisconnectedGraphError(GraphLoadError):
    """Precinct graph is not connected."""

    def __init__(self, n_components):
        # type: (int) -> None
        """Initialize disconnected graph error."""
        super().__init__(f"graph is disconnected ({n_components} components)", "disconnected_graph")


class PlanFormatError(FieldValidationError):
    """Plan labeling or plan file is malformed."""

    def __init__(self, message):
        # type: (str) -> None
        """Initialize plan format error."""
        super().__init__("plan", message, "invalid_plan")


class PreconditionError(BaseFlowError, ValueError):
    """Operation called outside of its precondition."""

    def __init__(self, message, code=None):
        # type: (str, str|None) -> None
        """Initialize precondition error."""
        super().__init__(message, code or "precondition_violation")


class EmptyDistrictError(PreconditionError):
    """District has no member vertices."""

    def __init__(self, district):
        # type: (int) -> None
        """Initialize empty district error."""
        super().__init__(f"district {district} is empty", "empty_district")
        self.district = district


class EmptyNeighborhoodError(PreconditionError):
    """Sampling requested from an empty proposal set."""

    def __init__(self, message="cannot sample from an empty neighborhood"):
        # type: (str) -> None
        """Initialize empty neighborhood error."""
        super().__init__(message, "empty_neighborhood")


class InvalidPlanError(BaseFlowError):
    """Plan left the valid plan space during a run."""

    def __init__(self, message):
        # type: (str) -> None
        """Initialize invalid plan error."""
        super().__init__(message, "invalid_plan_state")


class CacheCoherenceError(BaseFlowError):
    """Incremental plan caches diverged from a from-scratch recomputation."""

    def __init__(self, name, cached, fresh):
        # type: (str, object, object) -> None
        """
        Initialize cache coherence error.

        :param name: Name of the diverging cache
        :param cached: Incrementally maintained value
        :param fresh: Recomputed value
        """
        super().__init__(f"cache {name} diverged: cached={cached!r} fresh={fresh!r}", "cache_incoherent")
        self.name = name


class WeightConditionError(BaseFlowError):
    """Reverse proposal probability is zero for a forward-positive move."""

    def __init__(self, source, target, flow):
        # type: (object, object, object) -> None
        """
        Initialize weight condition error naming the offending pair.

        :param source: Fingerprint of the current plan
        :param target: Fingerprint of the proposed plan
        :param flow: Flow index used for the proposal
        """
        super().__init__(
            f"reverse move {target} -> {source} impossible under flow {flow}", "weight_condition_violation"
        )
        self.source = source
        self.target = target
        self.flow = flow


class CapacityError(BaseFlowError):
    """Instance too large for exhaustive enumeration or a dense kernel."""

    exit_code = 2

    def __init__(self, message):
        # type: (str) -> None
        """Initialize capacity error."""
        super().__init__(message, "capacity_exceeded")


class UnsupportedInstanceError(BaseFlowError):
    """Diagnostic requested on an instance it is not defined for."""

    exit_code = 2

    def __init__(self, message):
        # type: (str) -> None
        """Initialize unsupported instance error."""
        super().__init__(message, "unsupported_instance")


class InsufficientTraceError(BaseFlowError):
    """Snapshot trace too short for the requested estimate."""

    def __init__(self, message):
        # type: (str) -> None
        """Initialize insufficient trace error."""
        super().__init__(message, "insufficient_trace")


class CheckpointError(BaseFlowError):
    """Checkpoint missing, unreadable or written for another configuration."""

    exit_code = 2

    def __init__(self, message, is_mismatch=False):
        # type: (str, bool) -> None
        """
        Initialize checkpoint error.

        :param message: Error message
        :param is_mismatch: Whether the checkpoint belongs to a different config hash
        """
        code = "checkpoint_mismatch" if is_mismatch else "checkpoint_unavailable"
        super().__init__(message, code, "resume")


class RunFailure(BaseFlowError):
    """Chain failed mid-run; progress was preserved in a checkpoint."""

    def __init__(self, message, checkpoint=None):
        # type: (str, str|None) -> None
        """
        Initialize run failure.

        :param message: Error message
        :param checkpoint: Path of the preserved checkpoint, if any
        """
        super().__init__(message, "run_failed")
        self.checkpoint = checkpoint

    def to_error_response(self):
        # type: () -> dict
        """
        Convert exception to error document including the checkpoint location.

        :return: Error document with additional context
        """
        response = super().to_error_response()
        if self.checkpoint:
            response["error"]["checkpoint"] = self.checkpoint
        return response
