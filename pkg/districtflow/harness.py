"""
Deterministic multi-chain experiment execution.

Each chain owns a random stream derived from (seed, chain index), so results do not depend
on how chains are scheduled over workers. Chains checkpoint periodically and can be resumed
bit-identically. Aggregation over chains is a fixed-order post-pass.
"""

import csv
import io
import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import UTC, datetime
from pathlib import Path
from typing import Callable

import numpy as np
import pydantic

from districtflow import settings
from districtflow.diagnostics import (
    ChainSummary,
    OccupancyAccumulator,
    TraceRecord,
    TransitionCounter,
    estimate_G,
    merge_occupancy,
    metastate_classifier,
)
from districtflow.exceptions import (
    BaseFlowError,
    CheckpointError,
    ConfigError,
    GraphLoadError,
    InsufficientTraceError,
    PlanFormatError,
    RunFailure,
    UnsupportedInstanceError,
)
from districtflow.flows import VectorField
from districtflow.graph import PrecinctGraph, build_lattice, load_graph
from districtflow.manifest import build_manifest, config_hash
from districtflow.msmh import ExtendedState, StepEvent, StepResult, lazy_step, msmh_step
from districtflow.oracle import SamplerSpec
from districtflow.plan import Plan, horizontal_stripes, read_plan_csv
from districtflow.schema import ChainCheckpoint, ExperimentConfig, MomentumEntry
from districtflow.scoring import total_score
from districtflow.statecheck import validate_state
from districtflow.tempering import snf_mh_step

logger = logging.getLogger(__name__)

# Random stream of the bootstrap, disjoint from every chain index
BOOTSTRAP_STREAM = 2**32 - 1
# Upper bound on the number of lags evaluated for the decorrelation curve
MAX_G_POINTS = 1000


####################################################################################################
# Configuration and instances                                                                      #
####################################################################################################


def load_config(path=None, overrides=None):
    # type: (str|Path|None, dict|None) -> ExperimentConfig
    """
    Load an experiment config file and apply command-line overrides.

    :param path: JSON config file, defaults are used when omitted
    :param overrides: Keys replacing config values (None values are ignored)
    :raises ConfigError: If the file is unreadable or a field is invalid
    """
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError("config", f"cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config", "config document must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or "config"
        raise ConfigError(field, error["msg"]) from e


def load_instance_graph(config):
    # type: (ExperimentConfig) -> PrecinctGraph
    """Build the configured lattice or load the configured graph file."""
    if config.graph.lattice is not None:
        return build_lattice(*config.graph.lattice)
    try:
        data = Path(config.graph.path).read_bytes()  # type: ignore[arg-type]
    except OSError as e:
        raise GraphLoadError(f"cannot read graph file {config.graph.path}: {e}", field="graph.path") from e
    return load_graph(data)


def initial_plan(config, graph):
    # type: (ExperimentConfig, PrecinctGraph) -> Plan
    """
    The starting plan: a plan file when configured, otherwise the horizontal straight cut.

    :raises ConfigError: If the plan can not be read or is not valid
    """
    try:
        if config.initial_plan:
            text = Path(config.initial_plan).read_text(encoding="utf-8")
            plan = read_plan_csv(text, graph, config.n_districts)
        else:
            plan = horizontal_stripes(graph, config.n_districts)
    except OSError as e:
        raise ConfigError("initial_plan", f"cannot read plan file: {e}") from e
    except PlanFormatError as e:
        raise ConfigError("initial_plan", e.message) from e
    if not plan.is_valid(config.validity):
        raise ConfigError("initial_plan", "initial plan violates the validity constraints")
    return plan


def sampler_spec(config, graph):
    # type: (ExperimentConfig, PrecinctGraph) -> SamplerSpec
    vector_field = VectorField.from_spec(config.field, graph) if config.field is not None else None
    return SamplerSpec(
        method=config.method,
        beta=config.beta,
        score=config.score,
        vector_field=vector_field,
        tie_salt=config.tie_salt,
        epsilon=config.epsilon,
        lazy_hold=config.lazy_hold,
        resample_on_activation=config.resample_on_activation,
        simplified_ratio=config.simplified_ratio,
    )


def chain_rng(seed, chain):
    # type: (int, int) -> np.random.Generator
    """Independent stream keyed by (seed, chain)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,))))


def chain_entropy(seed, chain):
    # type: (int, int) -> int
    """A 64-bit fingerprint of a chain's stream for the manifest."""
    return int(np.random.SeedSequence(seed, spawn_key=(chain,)).generate_state(1, dtype=np.uint64)[0])


def make_stepper(sampler, n_districts, validity):
    """
    Step function (state, rng) -> StepResult for a sampler.

    :return: Tuple of flow family (None for the baseline samplers) and step function
    """
    family = sampler.family(n_districts)
    beta = sampler.effective_beta
    spec = sampler.score

    if family is None:

        def inner(state, rng):
            # type: (ExtendedState, np.random.Generator) -> StepResult
            result = snf_mh_step(state.plan, beta, spec, validity, rng, state.score)
            state.score = result.score
            event = StepEvent.ACCEPTED if result.accepted else StepEvent.REJECTED
            return StepResult(state, result.accepted, None, event, result.vertex)

    else:

        def inner(state, rng):
            # type: (ExtendedState, np.random.Generator) -> StepResult
            return msmh_step(state, family, beta, spec, validity, rng)

    if not (sampler.epsilon or sampler.lazy_hold):
        return family, inner

    indices = family.indices if family is not None else ()

    def lazy(state, rng):
        # type: (ExtendedState, np.random.Generator) -> StepResult
        return lazy_step(state, sampler.epsilon, sampler.lazy_hold, inner, rng, indices)

    return family, lazy


####################################################################################################
# Checkpoints                                                                                      #
####################################################################################################


def checkpoint_path(out, chain):
    # type: (Path, int) -> Path
    return Path(out) / f"chain-{chain:02d}.checkpoint.json"


def snapshots_path(out, chain):
    # type: (Path, int) -> Path
    return Path(out) / f"chain-{chain:02d}.snapshots.npy"


def _atomic_write(path, data):
    # type: (Path, bytes) -> None
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_checkpoint(out, checkpoint, snapshots):
    # type: (Path, ChainCheckpoint, np.ndarray) -> Path
    """Atomically write a chain checkpoint and its snapshot array."""
    path = checkpoint_path(out, checkpoint.chain)
    buffer = io.BytesIO()
    np.save(buffer, snapshots)
    _atomic_write(snapshots_path(out, checkpoint.chain), buffer.getvalue())
    _atomic_write(path, checkpoint.model_dump_json().encode("utf-8"))
    logger.info("Checkpoint chain %s at step %s", checkpoint.chain, checkpoint.step)
    return path


def read_checkpoint(out, chain, expected_hash):
    # type: (Path, int, str) -> tuple[ChainCheckpoint, np.ndarray]
    """
    Load a chain checkpoint written for the same configuration.

    :raises CheckpointError: If it is missing, unreadable or belongs to another config hash
    """
    path = checkpoint_path(out, chain)
    try:
        checkpoint = ChainCheckpoint.model_validate_json(path.read_bytes())
        snapshots = np.load(snapshots_path(out, chain))
    except OSError as e:
        raise CheckpointError(f"checkpoint {path} is unavailable: {e}") from e
    except (pydantic.ValidationError, ValueError) as e:
        raise CheckpointError(f"checkpoint {path} is unreadable: {e}") from e
    if checkpoint.config_hash != expected_hash:
        raise CheckpointError(f"checkpoint {path} was written for a different configuration", is_mismatch=True)
    return checkpoint, snapshots


####################################################################################################
# Chains                                                                                           #
####################################################################################################


@dataclass
class ChainResult:
    chain: int
    summary: ChainSummary
    occupancy: OccupancyAccumulator
    transitions: TransitionCounter | None
    snapshots: np.ndarray
    entropy: int
    resumed_from: int
    wall_clock: float


def run_chain(config, chain, resume=False, on_record=None):
    # type: (ExperimentConfig, int, bool, Callable[[TraceRecord], None]|None) -> ChainResult
    """
    Run one chain to `config.steps`, checkpointing into `config.out`.

    :param resume: Continue from the chain's checkpoint instead of the initial plan
    :param on_record: Called with a `TraceRecord` after every step
    :raises CheckpointError: If resumption is requested and the checkpoint is unusable
    :raises RunFailure: If the chain fails; the last checkpoint is kept
    """
    started = datetime.now(UTC)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    graph = load_instance_graph(config)
    sampler = sampler_spec(config, graph)
    family, step_fn = make_stepper(sampler, config.n_districts, config.validity)
    rng = chain_rng(config.seed, chain)
    checkpoint_every = config.checkpoint_interval or settings.DISTRICTFLOW_CHECKPOINT_INTERVAL

    try:
        classifier = metastate_classifier(graph, config.n_districts, config.band)
    except UnsupportedInstanceError as e:
        logger.info("Meta-state statistics disabled: %s", e.message)
        classifier = None

    if resume:
        checkpoint, stored = read_checkpoint(out, chain, digest)
        plan = Plan(graph, checkpoint.labels, config.n_districts)
        momenta = {entry.flow: entry.theta for entry in checkpoint.momenta}
        state = ExtendedState(plan, momenta, checkpoint.score)
        rng.bit_generator.state = checkpoint.rng_state
        acc = checkpoint.accumulators
        occupancy = OccupancyAccumulator.from_state(acc["occupancy"])
        counter = TransitionCounter.from_state(acc["transitions"]) if acc.get("transitions") else None
        events = Counter(acc["events"])
        snapshots = list(stored)
        start = checkpoint.step
        logger.info("Resuming chain %s at step %s", chain, start)
    else:
        plan = initial_plan(config, graph)
        momenta = family.initial_momenta(rng) if family is not None else {}
        state = ExtendedState(plan, momenta, total_score(plan, config.score))
        occupancy = OccupancyAccumulator(list(plan.labels))
        counter = TransitionCounter() if classifier else None
        events = Counter()
        snapshots = [np.array(plan.labels, dtype=np.uint8)]
        start = 0

    tracker = classifier.tracker(list(plan.labels)) if classifier else None
    mirror = list(plan.labels)
    last_checkpoint = checkpoint_path(out, chain) if resume else None

    def save(step):
        # type: (int) -> Path
        checkpoint = ChainCheckpoint(
            config_hash=digest,
            chain=chain,
            step=step,
            labels=list(plan.labels),
            momenta=[MomentumEntry(flow=k, theta=v) for k, v in sorted(state.momenta.items())],
            score=state.score,
            rng_state=rng.bit_generator.state,
            accumulators={
                "occupancy": occupancy.state(),
                "transitions": counter.state() if counter else None,
                "events": dict(events),
            },
            snapshots=snapshots_path(out, chain).name,
        )
        return write_checkpoint(out, checkpoint, _stack(snapshots, len(graph)))

    logger.info("Chain %s: %s from step %s to %s", chain, sampler.label, start, config.steps)
    step = start
    try:
        for step in range(start + 1, config.steps + 1):
            before = dict(state.momenta) if on_record else None
            result = step_fn(state, rng)
            events[result.event.value] += 1
            if result.accepted:
                v = result.vertex
                old, new = mirror[v], plan.label(v)
                mirror[v] = new
                occupancy.move(v, new, step)
                if tracker:
                    tracker.move(v, old, new)
            if counter is not None:
                counter.observe(tracker.current)  # type: ignore[union-attr]
            if on_record:
                flips = sum(before.get(k, t) != t for k, t in state.momenta.items())  # type: ignore[union-attr]
                metastate = tracker.current if tracker else None
                on_record(TraceRecord(step, state.score, metastate, result.accepted, result.flow, flips))
            if step % config.snapshot_interval == 0:
                snapshots.append(np.array(mirror, dtype=np.uint8))
            if config.check_interval and step % config.check_interval == 0:
                validate_state(plan, config.validity, config.score, state.score)
            if step % checkpoint_every == 0 and step < config.steps:
                occupancy.advance(step)
                last_checkpoint = save(step)
    except BaseFlowError as e:
        raise RunFailure(f"chain {chain} failed at step {step}: {e.message}", _as_str(last_checkpoint)) from e
    except Exception as e:
        raise RunFailure(f"chain {chain} failed at step {step}: {e}", _as_str(last_checkpoint)) from e

    occupancy.advance(config.steps)
    save(config.steps)

    summary = ChainSummary(
        chains=[chain],
        steps=config.steps,
        events=events,
        transitions=counter.total if counter else 0,
        metastate_steps=Counter(counter.visits) if counter else Counter(),
    )
    wall_clock = (datetime.now(UTC) - started).total_seconds()
    logger.info(
        "Chain %s finished: acceptance %.4f, %s meta-state transitions",
        chain,
        summary.acceptance_rate,
        summary.transitions,
    )
    return ChainResult(
        chain=chain,
        summary=summary,
        occupancy=occupancy,
        transitions=counter,
        snapshots=_stack(snapshots, len(graph)),
        entropy=chain_entropy(config.seed, chain),
        resumed_from=start,
        wall_clock=wall_clock,
    )


def _stack(snapshots, n):
    # type: (list[np.ndarray], int) -> np.ndarray
    return np.stack(snapshots) if snapshots else np.zeros((0, n), dtype=np.uint8)


def _as_str(path):
    # type: (Path|None) -> str|None
    return str(path) if path is not None else None


####################################################################################################
# Experiments                                                                                      #
####################################################################################################


def run_chains(config, resume=False, workers=None):
    # type: (ExperimentConfig, bool, int|None) -> list[ChainResult]
    """Run all chains, in a process pool when more than one worker is available."""
    workers = min(workers or settings.DISTRICTFLOW_MAX_WORKERS, config.chains)
    if workers <= 1:
        return [run_chain(config, c, resume) for c in range(config.chains)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_chain, config, c, resume) for c in range(config.chains)]
        return [f.result() for f in futures]


def _write_csv(path, header, rows):
    # type: (Path, list[str], list) -> None
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, out.getvalue().encode("utf-8"))


def write_outputs(config, results):
    # type: (ExperimentConfig, list[ChainResult]) -> dict
    """Aggregate chain results in chain order and write the CSV outputs."""
    out = Path(config.out)
    results = sorted(results, key=lambda r: r.chain)

    occupancy = merge_occupancy([r.occupancy for r in results])
    _write_csv(out / "occupancy.csv", ["vertex_id", "f", "display_value"], occupancy.rows())

    counters = [r.transitions for r in results if r.transitions is not None]
    if counters:
        pooled = counters[0]
        for counter in counters[1:]:
            pooled = pooled.merge(counter)
        _write_csv(out / "transitions.csv", ["from", "to", "count"], pooled.rows())

    g_rows = []
    rng = chain_rng(config.seed, BOOTSTRAP_STREAM)
    max_lag = config.horizon // config.snapshot_interval
    try:
        curve = estimate_G(
            [r.snapshots for r in results],
            config.horizon,
            config.n_boot,
            rng,
            config.snapshot_interval,
            config.n_districts,
            lag_stride=max(1, max_lag // MAX_G_POINTS),
        )
        g_rows = curve.rows()
    except InsufficientTraceError as e:
        logger.warning("Skipping G(t): %s", e.message)
    _write_csv(out / "g_curve.csv", ["t", "G", "ci_low", "ci_high"], g_rows)

    summaries = [r.summary for r in results]
    total = summaries[0]
    for s in summaries[1:]:
        total = total.merge(s)
    rows = [s.row() for s in summaries]
    if len(summaries) > 1:
        rows.append({**total.row(), "chain": "all"})
    header = list(rows[0])
    _write_csv(out / "summary.csv", header, [[row[k] for k in header] for row in rows])

    return {
        "max_deviation": occupancy.max_deviation,
        "transitions": total.transitions,
        "acceptance_rate": total.acceptance_rate,
    }


def run_experiment(config, resume=False, workers=None):
    # type: (ExperimentConfig, bool, int|None) -> dict
    """
    Run a complete experiment and write its output bundle into `config.out`.

    :return: The run manifest
    """
    started = datetime.now(UTC)
    Path(config.out).mkdir(parents=True, exist_ok=True)
    results = run_chains(config, resume, workers)
    stats = write_outputs(config, results)
    manifest = build_manifest(
        config,
        [r.entropy for r in sorted(results, key=lambda r: r.chain)],
        started,
        datetime.now(UTC),
        chains=[
            {"chain": r.chain, "resumed_from": r.resumed_from, "wall_clock_seconds": round(r.wall_clock, 3)}
            for r in sorted(results, key=lambda r: r.chain)
        ],
    )
    manifest["statistics"] = stats
    _atomic_write(Path(config.out) / "manifest.json", json.dumps(manifest, indent=2).encode("utf-8"))
    logger.info("Experiment written to %s", config.out)
    return manifest
