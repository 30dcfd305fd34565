"""Experiment harness: strategy runners, seed sweeps, and artifact I/O.

A run is identified by (config, run seed). The same task, initial parameters,
and per-(round, client) batch streams are derived for every strategy, so
strategy comparisons differ only in the protocol itself.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .coreset import CORESET_METHODS, CoresetPolicy
from .data import Dataset, SplitTask, TASK_KINDS, gen_blobs, make_iid_task, make_rotated_task, make_split_class_task
from .nn import ACTIVATIONS, HyperParams, ModelParams, ModelSpec, evaluate, init_params, sgd_steps
from .protocol import AvailabilitySchedule, ClientState, ServerState, run_slot
from .rng import derive_seed, sgd_seed

RUN_STRATEGIES = ("standalone", "ideal", "fedavg_dropout", "proxy")

# harness strategy -> protocol aggregation strategy
_PROTOCOL_FOR = {"ideal": "fedavg", "fedavg_dropout": "subset", "proxy": "proxy"}

METRICS_HEADER = ("strategy", "slot", "client_id", "acc_mean", "acc_std")

_CHECKPOINT_TAG = "silofed-checkpoint-v1"


@dataclass(frozen=True)
class TaskSpec:
    """Blob-based task description; which fields matter depends on kind."""

    kind: str
    class_count: int = 3
    per_class: int = 400
    dim: int = 2
    spread: float = 0.25
    test_fraction: float = 0.25
    angle_degrees: float = 90.0
    n_clients: int = 2

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ValueError(f"task kind must be one of {TASK_KINDS}, got {self.kind!r}")
        if self.kind == "split_class" and (self.class_count < 4 or self.class_count % 2):
            raise ValueError(f"split_class needs an even class_count >= 4, got {self.class_count}")
        if self.kind == "iid" and self.n_clients < 1:
            raise ValueError(f"n_clients must be >= 1, got {self.n_clients}")

    def client_count(self) -> int:
        return self.n_clients if self.kind == "iid" else 2


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment: task, model, training, schedule, sweep."""

    task: TaskSpec
    hp: HyperParams
    name: str = "experiment"
    seed: int = 0
    hidden: tuple[int, ...] = (32,)
    activation: str = "relu"
    coreset_fraction: float = 0.05
    coreset_method: str = "stratified"
    total_slots: int = 12
    rounds_per_slot: int = 10
    drops: tuple[tuple[int, int], ...] = ()
    joins: tuple[tuple[int, int], ...] = ()
    strategies: tuple[str, ...] = RUN_STRATEGIES
    n_seeds: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "drops", tuple((int(c), int(s)) for c, s in self.drops))
        object.__setattr__(self, "joins", tuple((int(c), int(s)) for c, s in self.joins))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not 0.0 < self.coreset_fraction <= 1.0:
            raise ValueError(f"coreset_fraction must be in (0, 1], got {self.coreset_fraction}")
        if self.coreset_method not in CORESET_METHODS:
            raise ValueError(f"coreset_method must be one of {CORESET_METHODS}, got {self.coreset_method!r}")
        if self.total_slots < 1:
            raise ValueError(f"total_slots must be >= 1, got {self.total_slots}")
        if self.rounds_per_slot < 1:
            raise ValueError(f"rounds_per_slot must be >= 1, got {self.rounds_per_slot}")
        if self.n_seeds < 1:
            raise ValueError(f"n_seeds must be >= 1, got {self.n_seeds}")
        unknown = [s for s in self.strategies if s not in RUN_STRATEGIES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}; valid: {RUN_STRATEGIES}")
        if not self.strategies:
            raise ValueError("strategies must be non-empty")
        n = self.task.client_count()
        for cid, s in self.drops:
            if not 0 <= cid < n:
                raise ValueError(f"drop references client {cid}, task has {n} clients")
            if s < -1:
                raise ValueError(f"drop after_slot must be >= -1, got {s}")
        for cid, s in self.joins:
            if not 0 <= cid < n:
                raise ValueError(f"join references client {cid}, task has {n} clients")
            if not 0 <= s < self.total_slots:
                raise ValueError(f"join at_slot {s} outside [0, {self.total_slots})")

    def model_spec(self) -> ModelSpec:
        return ModelSpec((self.task.dim, *self.hidden, self.task.class_count), self.activation)

    def schedule(self) -> AvailabilitySchedule:
        sched = AvailabilitySchedule.always(self.task.client_count(), self.total_slots)
        for cid, at in self.joins:
            sched = sched.with_join(cid, at)
        for cid, after in self.drops:
            sched = sched.with_drop(cid, after)
        return sched

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "task": {
                "kind": self.task.kind,
                "class_count": self.task.class_count,
                "per_class": self.task.per_class,
                "dim": self.task.dim,
                "spread": self.task.spread,
                "test_fraction": self.task.test_fraction,
                "angle_degrees": self.task.angle_degrees,
                "n_clients": self.task.n_clients,
            },
            "model": {"hidden": list(self.hidden), "activation": self.activation},
            "training": {
                "eta": self.hp.eta,
                "tau": self.hp.tau,
                "tau_prime": self.hp.tau_prime,
                "batch_size": self.hp.batch_size,
            },
            "coreset": {"fraction": self.coreset_fraction, "method": self.coreset_method},
            "schedule": {
                "total_slots": self.total_slots,
                "rounds_per_slot": self.rounds_per_slot,
                "drops": [{"client": c, "after_slot": s} for c, s in self.drops],
                "joins": [{"client": c, "at_slot": s} for c, s in self.joins],
            },
            "strategies": list(self.strategies),
            "n_seeds": self.n_seeds,
        }


@dataclass(frozen=True)
class SlotMetrics:
    """Accuracy of one (strategy, slot, client) cell across seeds."""

    strategy: str
    slot: int
    client_id: int
    acc_mean: float
    acc_std: float


@dataclass
class RunResult:
    """One strategy run for one seed: per-slot per-client accuracies."""

    accuracies: np.ndarray  # (total_slots, n_clients)
    slot_params: list[ModelParams] | None = None
    server: ServerState | None = None


def build_task(spec: TaskSpec, seed: int) -> SplitTask:
    base = gen_blobs(spec.class_count, spec.per_class, spec.dim, spec.spread, derive_seed(seed, "blobs"))
    split_seed = derive_seed(seed, "split")
    if spec.kind == "rotated":
        return make_rotated_task(base, spec.angle_degrees, spec.test_fraction, split_seed)
    if spec.kind == "split_class":
        return make_split_class_task(base, spec.test_fraction, split_seed)
    return make_iid_task(base, spec.n_clients, spec.test_fraction, split_seed)


def _run_setup(config: ExperimentConfig, run_seed: int) -> tuple[SplitTask, ModelSpec, ModelParams]:
    task = build_task(config.task, derive_seed(run_seed, "task"))
    spec = config.model_spec()
    params0 = init_params(spec, derive_seed(run_seed, "init"))
    return task, spec, params0


def run_standalone(config: ExperimentConfig, run_seed: int) -> RunResult:
    """Each client trains alone for the full round budget.

    Per-slot accuracy is the client's own model on its own test set; there is
    no cross-client evaluation because no shared model exists. The SGD seeds
    match the collaborative runners round for round.
    """
    task, _, params0 = _run_setup(config, run_seed)
    acc = np.zeros((config.total_slots, task.n_clients))
    for cid, (train, test) in enumerate(task.clients):
        params = params0
        for slot in range(config.total_slots):
            for r in range(config.rounds_per_slot):
                round_index = slot * config.rounds_per_slot + r
                params = sgd_steps(params, train, config.hp, config.hp.tau, sgd_seed(run_seed, round_index, cid))
            acc[slot, cid] = evaluate(params, test)
    return RunResult(acc)


def run_collaborative(
    config: ExperimentConfig, strategy: str, run_seed: int, record_params: bool = False
) -> RunResult:
    """Run ideal / fedavg_dropout / proxy and evaluate the global model.

    After each slot the aggregated global parameters are scored on every
    client's test set.
    """
    if strategy not in _PROTOCOL_FOR:
        raise ValueError(f"strategy must be one of {sorted(_PROTOCOL_FOR)}, got {strategy!r}")
    task, _, params0 = _run_setup(config, run_seed)
    clients = [
        ClientState(
            id=cid,
            train=train,
            test=test,
            coreset_policy=CoresetPolicy(
                config.coreset_fraction, config.coreset_method, derive_seed(run_seed, "coreset", cid)
            ),
            local_params=params0,
        )
        for cid, (train, test) in enumerate(task.clients)
    ]
    server = ServerState(
        global_params=params0, hp=config.hp, strategy=_PROTOCOL_FOR[strategy], n_clients=task.n_clients
    )
    schedule = config.schedule()
    acc = np.zeros((config.total_slots, task.n_clients))
    slot_params: list[ModelParams] = []
    for slot in range(config.total_slots):
        server = run_slot(server, clients, schedule, slot, run_seed, config.rounds_per_slot)
        for cid, (_, test) in enumerate(task.clients):
            acc[slot, cid] = evaluate(server.global_params, test)
        if record_params:
            slot_params.append(server.global_params)
    return RunResult(acc, slot_params if record_params else None, server)


def run_strategy(config: ExperimentConfig, strategy: str, run_seed: int) -> RunResult:
    if strategy == "standalone":
        return run_standalone(config, run_seed)
    return run_collaborative(config, strategy, run_seed)


def run_seeds(config: ExperimentConfig) -> list[int]:
    """The per-repeat run seeds derived from the config's master seed."""
    return [derive_seed(config.seed, "run", s) for s in range(config.n_seeds)]


def summarize(runs: list[np.ndarray], strategy: str) -> list[SlotMetrics]:
    """Client-wise mean and sample std (ddof=1; zero for a single run)."""
    if not runs:
        raise ValueError("no runs to summarize")
    stack = np.stack(runs)  # (n_seeds, slots, clients)
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if stack.shape[0] > 1 else np.zeros_like(mean)
    out = []
    for slot in range(stack.shape[1]):
        for cid in range(stack.shape[2]):
            out.append(SlotMetrics(strategy, slot, cid, float(mean[slot, cid]), float(std[slot, cid])))
    return out


def run_experiment(config: ExperimentConfig, strategies: tuple[str, ...] | None = None) -> list[SlotMetrics]:
    """Run every (strategy, seed) pair and summarize across seeds."""
    metrics: list[SlotMetrics] = []
    seeds = run_seeds(config)
    for strategy in strategies or config.strategies:
        per_seed = [run_strategy(config, strategy, s).accuracies for s in seeds]
        metrics.extend(summarize(per_seed, strategy))
    return metrics


def export_metrics(metrics: list[SlotMetrics], path: str) -> None:
    """Write the metrics CSV: fixed header, 6-decimal floats, sorted rows."""
    rows = sorted(metrics, key=lambda m: (m.strategy, m.slot, m.client_id))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for m in rows:
            writer.writerow([m.strategy, m.slot, m.client_id, f"{m.acc_mean:.6f}", f"{m.acc_std:.6f}"])


def load_metrics(path: str) -> list[SlotMetrics]:
    """Read a metrics CSV back; raises ValueError naming the offending row."""
    out: list[SlotMetrics] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}: row 1: expected header {','.join(METRICS_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ValueError(f"{path}: row {row_no}: expected 5 fields, got {len(row)}")
            try:
                out.append(SlotMetrics(row[0], int(row[1]), int(row[2]), float(row[3]), float(row[4])))
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: malformed values {row!r}") from None
    return out


def _dataset_to_dict(ds: Dataset) -> dict:
    return {
        "name": ds.name,
        "class_count": ds.class_count,
        "features": ds.features.tolist(),
        "labels": ds.labels.tolist(),
    }


def _dataset_from_dict(d: dict) -> Dataset:
    return Dataset(np.array(d["features"], dtype=np.float64), np.array(d["labels"]), d["class_count"], d["name"])


def export_checkpoint(server: ServerState, path: str, run_seed: int = 0, next_slot: int = 0) -> None:
    """Serialize a ServerState (plus RNG cursor) as JSON.

    Floats are written with repr precision, so a load/export round trip is
    bit-exact. The RNG cursor is just (run seed, next slot): seed derivation
    is counter-based, so no generator state needs saving.
    """
    spec = server.global_params.spec
    doc = {
        "format": _CHECKPOINT_TAG,
        "model_spec": {"layer_sizes": list(spec.layer_sizes), "activation": spec.activation},
        "strategy": server.strategy,
        "n_clients": server.n_clients,
        "hp": {
            "eta": server.hp.eta,
            "tau": server.hp.tau,
            "tau_prime": server.hp.tau_prime,
            "batch_size": server.hp.batch_size,
        },
        "global_params": server.global_params.flat.tolist(),
        "coresets": {str(cid): _dataset_to_dict(ds) for cid, ds in server.coresets.items()},
        "client_weights": {str(cid): w for cid, w in server.client_weights.items()},
        "last_params": {str(cid): p.flat.tolist() for cid, p in server.last_params.items()},
        "rng": {"run_seed": run_seed, "next_slot": next_slot},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path: str) -> tuple[ServerState, int, int]:
    """Inverse of export_checkpoint: (server, run_seed, next_slot)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _CHECKPOINT_TAG:
        raise ValueError(f"{path}: not a {_CHECKPOINT_TAG} file")
    spec = ModelSpec(tuple(doc["model_spec"]["layer_sizes"]), doc["model_spec"]["activation"])
    hp = HyperParams(**doc["hp"])
    server = ServerState(
        global_params=ModelParams(spec, np.array(doc["global_params"], dtype=np.float64)),
        hp=hp,
        strategy=doc["strategy"],
        n_clients=doc["n_clients"],
        coresets={int(cid): _dataset_from_dict(d) for cid, d in doc["coresets"].items()},
        client_weights={int(cid): int(w) for cid, w in doc["client_weights"].items()},
        last_params={
            int(cid): ModelParams(spec, np.array(flat, dtype=np.float64)) for cid, flat in doc["last_params"].items()
        },
    )
    return server, int(doc["rng"]["run_seed"]), int(doc["rng"]["next_slot"])
