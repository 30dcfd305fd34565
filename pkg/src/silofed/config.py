"""YAML experiment configs.

One structured text file per experiment, validated into an ExperimentConfig.
Validation errors carry the dotted field path of the offending value so a
typo in a nested section is easy to locate.
"""

from __future__ import annotations

from typing import Any

import yaml

from .coreset import CORESET_METHODS
from .data import TASK_KINDS
from .harness import RUN_STRATEGIES, ExperimentConfig, TaskSpec
from .nn import ACTIVATIONS, HyperParams


class ConfigError(Exception):
    """Bad config file: parse failure or schema violation."""


def _section(raw: dict, key: str, required: bool = False) -> dict:
    val = raw.get(key)
    if val is None:
        if required:
            raise ConfigError(f"{key}: section is required")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"{key}: expected a mapping, got {type(val).__name__}")
    return val


def _get(sec: dict, path: str, key: str, kind, default=None, required: bool = False):
    full = f"{path}.{key}" if path else key
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError(f"{full}: value is required")
        return default
    val = sec[key]
    if isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{full}: expected {kind.__name__}, got {val!r}")
    if kind is float and isinstance(val, int):
        val = float(val)
    if kind is int and not isinstance(val, int):
        raise ConfigError(f"{full}: expected an integer, got {val!r}")
    if not isinstance(val, kind):
        raise ConfigError(f"{full}: expected {kind.__name__}, got {val!r}")
    return val


def _choice(value: str, options: tuple[str, ...], path: str) -> str:
    if value not in options:
        raise ConfigError(f"{path}: expected one of {'|'.join(options)}, got {value!r}")
    return value


def _check_keys(sec: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(sec) - allowed)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"{where}: unknown key")


def _parse_events(sec: dict, path: str, key: str, slot_field: str, slot_min: int) -> list[tuple[int, int]]:
    raw = sec.get(key) or []
    if not isinstance(raw, list):
        raise ConfigError(f"{path}.{key}: expected a list")
    events = []
    for i, item in enumerate(raw):
        here = f"{path}.{key}[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{here}: expected a mapping with client/{slot_field}")
        _check_keys(item, {"client", slot_field}, here)
        client = _get(item, here, "client", int, required=True)
        slot = _get(item, here, slot_field, int, required=True)
        if client < 0:
            raise ConfigError(f"{here}.client: must be >= 0, got {client}")
        if slot < slot_min:
            raise ConfigError(f"{here}.{slot_field}: must be >= {slot_min}, got {slot}")
        events.append((client, slot))
    return events


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a parsed YAML document into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    _check_keys(raw, {"name", "seed", "task", "model", "training", "coreset", "schedule", "strategies", "n_seeds"}, "")

    task_sec = _section(raw, "task", required=True)
    _check_keys(
        task_sec,
        {"kind", "class_count", "per_class", "dim", "spread", "test_fraction", "angle_degrees", "n_clients"},
        "task",
    )
    kind = _choice(_get(task_sec, "task", "kind", str, required=True), TASK_KINDS, "task.kind")
    task = TaskSpec(
        kind=kind,
        class_count=_get(task_sec, "task", "class_count", int, 3),
        per_class=_get(task_sec, "task", "per_class", int, 400),
        dim=_get(task_sec, "task", "dim", int, 2),
        spread=_get(task_sec, "task", "spread", float, 0.25),
        test_fraction=_get(task_sec, "task", "test_fraction", float, 0.25),
        angle_degrees=_get(task_sec, "task", "angle_degrees", float, 90.0),
        n_clients=_get(task_sec, "task", "n_clients", int, 2),
    )

    model_sec = _section(raw, "model")
    _check_keys(model_sec, {"hidden", "activation"}, "model")
    hidden = model_sec.get("hidden", [32])
    if not isinstance(hidden, list) or not hidden or not all(isinstance(h, int) and not isinstance(h, bool) for h in hidden):
        raise ConfigError(f"model.hidden: expected a non-empty list of integers, got {hidden!r}")
    activation = _choice(_get(model_sec, "model", "activation", str, "relu"), ACTIVATIONS, "model.activation")

    train_sec = _section(raw, "training", required=True)
    _check_keys(train_sec, {"eta", "tau", "tau_prime", "batch_size"}, "training")
    tau = _get(train_sec, "training", "tau", int, required=True)
    hp_args = {
        "eta": _get(train_sec, "training", "eta", float, required=True),
        "tau": tau,
        "tau_prime": _get(train_sec, "training", "tau_prime", int, tau),
        "batch_size": _get(train_sec, "training", "batch_size", int, required=True),
    }

    coreset_sec = _section(raw, "coreset")
    _check_keys(coreset_sec, {"fraction", "method"}, "coreset")
    fraction = _get(coreset_sec, "coreset", "fraction", float, 0.05)
    method = _choice(_get(coreset_sec, "coreset", "method", str, "stratified"), CORESET_METHODS, "coreset.method")

    sched_sec = _section(raw, "schedule")
    _check_keys(sched_sec, {"total_slots", "rounds_per_slot", "drops", "joins"}, "schedule")
    total_slots = _get(sched_sec, "schedule", "total_slots", int, 12)
    rounds_per_slot = _get(sched_sec, "schedule", "rounds_per_slot", int, 10)
    drops = _parse_events(sched_sec, "schedule", "drops", "after_slot", -1)
    joins = _parse_events(sched_sec, "schedule", "joins", "at_slot", 0)

    strategies = raw.get("strategies") or list(RUN_STRATEGIES)
    if not isinstance(strategies, list) or not all(isinstance(s, str) for s in strategies):
        raise ConfigError(f"strategies: expected a list of strings, got {strategies!r}")
    for i, s in enumerate(strategies):
        _choice(s, RUN_STRATEGIES, f"strategies[{i}]")

    try:
        hp = HyperParams(**hp_args)
        return ExperimentConfig(
            task=task,
            hp=hp,
            name=_get(raw, "", "name", str, "experiment"),
            seed=_get(raw, "", "seed", int, 0),
            hidden=tuple(hidden),
            activation=activation,
            coreset_fraction=fraction,
            coreset_method=method,
            total_slots=total_slots,
            rounds_per_slot=rounds_per_slot,
            drops=tuple(drops),
            joins=tuple(joins),
            strategies=tuple(strategies),
            n_seeds=_get(raw, "", "n_seeds", int, 5),
        )
    except ValueError as exc:
        # constructor-level validation (cross-field rules, ranges)
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a YAML experiment config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    try:
        return parse_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
