"""Typed configuration and report documents."""

from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from districtflow import settings

Method = Literal["snf", "snf-tempered", "com-flow", "d2d-flow"]
FlowKey = int | tuple[int, int]


class Schema(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ValiditySpec(Schema):
    """Hard constraints defining the valid plan space."""

    pop_min: Annotated[float, Field(ge=0)] = 0.0
    pop_max: Annotated[float | None, Field(ge=0, description="Upper district bound, None for unbounded")] = None
    measure: Literal["population", "count"] = "population"
    require_connected: bool = True
    require_simply_connected: bool = False

    @model_validator(mode="after")
    def check_bounds(self):
        # type: () -> ValiditySpec
        if self.pop_max is not None and self.pop_min > self.pop_max:
            raise ValueError(f"pop_min {self.pop_min} exceeds pop_max {self.pop_max}")
        return self


class ScoreSpec(Schema):
    """Weights and modes of the score function J = w_pop * J_pop + w_c * J_c."""

    w_pop: Annotated[float, Field(ge=0)] = 1.0
    w_c: Annotated[float, Field(ge=0)] = 1.0
    pop_mode: Literal["hard-bounds", "squared-deviation"] = "hard-bounds"
    pop_min: Annotated[float | None, Field(ge=0)] = None
    pop_max: Annotated[float | None, Field(ge=0)] = None
    pop_target: float | None = None
    compact_mode: Literal["conflicted-edge-count", "shared-boundary-length", "perimeter"] = (
        "conflicted-edge-count"
    )
    compact_scale: float = 1.0

    @model_validator(mode="after")
    def check_enabled(self):
        # type: () -> ScoreSpec
        if self.w_pop == 0 and self.w_c == 0:
            raise ValueError("at least one of w_pop and w_c must be positive")
        if self.pop_min is not None and self.pop_max is not None and self.pop_min > self.pop_max:
            raise ValueError(f"pop_min {self.pop_min} exceeds pop_max {self.pop_max}")
        return self


class FieldSpec(Schema):
    """Planar vector field orienting the center-of-mass flow."""

    kind: Literal["vortex", "constant"] = "vortex"
    center: tuple[float, float] | None = None
    unit_speed: bool = True
    chirality: Literal[1, -1] = 1
    direction: tuple[float, float] | None = None

    @model_validator(mode="after")
    def check_kind(self):
        # type: () -> FieldSpec
        if self.kind == "constant" and self.direction is None:
            raise ValueError("constant field requires a direction")
        return self


class GraphSource(Schema):
    """Either lattice dimensions or a graph file path."""

    lattice: tuple[int, int] | None = None
    path: str | None = None

    @model_validator(mode="after")
    def check_source(self):
        # type: () -> GraphSource
        if (self.lattice is None) == (self.path is None):
            raise ValueError("exactly one of lattice and path must be given")
        return self


class ExperimentConfig(Schema):
    """A complete, reproducible multi-chain experiment."""

    graph: GraphSource = GraphSource(lattice=(10, 10))
    n_districts: Annotated[int, Field(ge=2)] = 2
    validity: ValiditySpec = ValiditySpec()
    score: ScoreSpec = ScoreSpec()
    method: Method = "com-flow"
    beta: Annotated[float, Field(ge=0, le=1)] = 0.5
    field: FieldSpec | None = None
    chains: Annotated[int, Field(ge=1)] = 1
    steps: Annotated[int, Field(ge=1)] = 10_000
    seed: Annotated[int, Field(ge=0, lt=2**64)] = 0
    epsilon: Annotated[float, Field(ge=0, le=1)] = 0.0
    lazy_hold: Annotated[float, Field(ge=0, le=1)] = 0.0
    snapshot_interval: Annotated[int, Field(ge=1)] = settings.DISTRICTFLOW_SNAPSHOT_INTERVAL
    horizon: Annotated[int, Field(ge=0)] = 50_000
    n_boot: Annotated[int, Field(ge=1)] = settings.DISTRICTFLOW_BOOTSTRAP_SAMPLES
    band: Annotated[int, Field(ge=0)] = 3
    initial_plan: str | None = None
    resample_on_activation: bool = True
    simplified_ratio: bool = False
    tie_salt: int = 0
    checkpoint_interval: Annotated[int | None, Field(ge=1)] = None
    check_interval: Annotated[int | None, Field(ge=1)] = None
    out: str = "runs/default"

    @model_validator(mode="after")
    def check_method_fields(self):
        # type: () -> ExperimentConfig
        if self.method == "com-flow" and self.field is None:
            raise ValueError("field is required for method com-flow")
        if self.epsilon + self.lazy_hold > 1:
            raise ValueError("epsilon + lazy_hold must not exceed 1")
        if self.horizon % self.snapshot_interval:
            raise ValueError("snapshot_interval must divide horizon")
        return self


class MomentumEntry(Schema):
    flow: FlowKey
    theta: Literal[1, -1]


class ChainCheckpoint(Schema):
    """Serialized chain state sufficient for a bit-identical resumption."""

    config_hash: str
    chain: int
    step: int
    labels: list[int]
    momenta: list[MomentumEntry]
    score: float
    rng_state: dict
    accumulators: dict
    snapshots: str | None = None


class OracleReport(Schema):
    """Exactness-suite result for one instance and sampler."""

    instance: str
    sampler: str
    n_plans: int
    n_states: int
    stochastic: float
    invariance: float
    detailed_balance: float | None = None
    skew_balance: float | None = None
    mixed_skew_balance: dict[str, float] | None = None
    irreducible: bool
    witness: tuple[int, int] | None = None
    circuit_violations: list[str] = []
