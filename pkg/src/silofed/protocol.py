"""Server/client round protocol with three aggregation strategies.

Each global round, clients start from the latest global parameters, run tau
local SGD steps, and the server takes a dataset-size-weighted mean of the
returned parameters. Strategies differ only in who contributes:

- fedavg: every client, regardless of the availability schedule,
- subset: only clients connected in the current slot,
- proxy:  connected clients, plus server-side stand-ins trained on the
  deposited coresets of disconnected clients (weighted by the client's full
  dataset size, not the coreset size).

Everything is a pure function of (state, seeds): per-client batch streams are
pre-derived from (run seed, round, client id), so results are bitwise
reproducible and independent of client execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coreset import CoresetPolicy, build_coreset
from .data import Dataset
from .nn import HyperParams, ModelParams, sgd_steps
from .rng import sgd_seed

STRATEGIES = ("fedavg", "subset", "proxy")
UPDATE_ORIGINS = ("client", "proxy")


@dataclass
class ClientState:
    """One silo: its data, coreset policy, and last-seen parameters."""

    id: int
    train: Dataset
    test: Dataset
    coreset_policy: CoresetPolicy
    local_params: ModelParams
    weight: int = 0

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"client id must be >= 0, got {self.id}")
        if self.weight == 0:
            self.weight = len(self.train)
        if self.weight != len(self.train):
            raise ValueError(f"weight {self.weight} must equal |train| = {len(self.train)}")


@dataclass(frozen=True)
class RoundUpdate:
    """Parameters one aggregation participant hands to the server."""

    client_id: int
    params: ModelParams
    weight: float
    origin: str

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ValueError(f"update weight must be > 0, got {self.weight}")
        if self.origin not in UPDATE_ORIGINS:
            raise ValueError(f"origin must be one of {UPDATE_ORIGINS}, got {self.origin!r}")


@dataclass(frozen=True)
class AvailabilitySchedule:
    """Which slots each client is connected in.

    A client with no connected slots is allowed (it simply never contributes
    and, under the proxy strategy, never deposits a coreset).
    """

    connected_slots: tuple[frozenset[int], ...]
    total_slots: int

    def __post_init__(self) -> None:
        if self.total_slots < 1:
            raise ValueError(f"total_slots must be >= 1, got {self.total_slots}")
        sets = tuple(frozenset(int(s) for s in slots) for slots in self.connected_slots)
        object.__setattr__(self, "connected_slots", sets)
        for cid, slots in enumerate(sets):
            bad = [s for s in slots if not 0 <= s < self.total_slots]
            if bad:
                raise ValueError(f"client {cid}: slot {bad[0]} outside [0, {self.total_slots})")

    @property
    def n_clients(self) -> int:
        return len(self.connected_slots)

    def connected(self, client_id: int, slot: int) -> bool:
        return slot in self.connected_slots[client_id]

    @classmethod
    def always(cls, n_clients: int, total_slots: int) -> "AvailabilitySchedule":
        full = frozenset(range(total_slots))
        return cls(tuple(full for _ in range(n_clients)), total_slots)

    def with_drop(self, client_id: int, after_slot: int) -> "AvailabilitySchedule":
        """Client stays connected through `after_slot` and never reconnects.

        after_slot -1 disconnects the client for the whole run.
        """
        sets = list(self.connected_slots)
        sets[client_id] = frozenset(s for s in sets[client_id] if s <= after_slot)
        return AvailabilitySchedule(tuple(sets), self.total_slots)

    def with_join(self, client_id: int, at_slot: int) -> "AvailabilitySchedule":
        """Client is absent before `at_slot`."""
        sets = list(self.connected_slots)
        sets[client_id] = frozenset(s for s in sets[client_id] if s >= at_slot)
        return AvailabilitySchedule(tuple(sets), self.total_slots)


@dataclass
class ServerState:
    """Everything the server holds between rounds."""

    global_params: ModelParams
    hp: HyperParams
    strategy: str
    n_clients: int
    coresets: dict[int, Dataset] = field(default_factory=dict)
    client_weights: dict[int, int] = field(default_factory=dict)
    last_params: dict[int, ModelParams] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.n_clients < 1:
            raise ValueError(f"n_clients must be >= 1, got {self.n_clients}")


def client_round(client: ClientState, global_params: ModelParams, hp: HyperParams, seed: int) -> RoundUpdate:
    """Client receives the global parameters and runs tau local SGD steps."""
    if client.local_params.spec != global_params.spec:
        raise ValueError(f"client {client.id}: model spec does not match the global parameters")
    trained = sgd_steps(global_params, client.train, hp, hp.tau, seed)
    client.local_params = trained
    return RoundUpdate(client.id, trained, client.weight, "client")


def proxy_round(server: ServerState, client_id: int, seed: int) -> RoundUpdate:
    """Server-side stand-in: tau_prime SGD steps on the client's coreset.

    Starts from the latest aggregated global parameters, and the update
    carries the client's full dataset size as weight. The batch size is
    clamped to the coreset size.
    """
    if client_id not in server.coresets:
        raise ValueError(f"client {client_id} has no deposited coreset")
    cs = server.coresets[client_id]
    hp = server.hp
    eff = replace(hp, batch_size=min(hp.batch_size, len(cs)))
    trained = sgd_steps(server.global_params, cs, eff, hp.tau_prime, seed)
    return RoundUpdate(client_id, trained, server.client_weights[client_id], "proxy")


def aggregate(updates: list[RoundUpdate]) -> ModelParams:
    """Weighted mean of update parameters, summed in ascending client order.

    The fixed summation order makes the result independent of the order in
    which updates arrived.
    """
    if not updates:
        raise ValueError("nothing to aggregate")
    ordered = sorted(updates, key=lambda u: u.client_id)
    ids = [u.client_id for u in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate client ids in updates: {ids}")
    spec = ordered[0].params.spec
    if any(u.params.spec != spec for u in ordered):
        raise ValueError("updates mix different model specs")
    acc = np.zeros(spec.flat_size, dtype=np.float64)
    total = 0.0
    for u in ordered:
        acc += u.weight * u.params.flat
        total += u.weight
    return ModelParams(spec, acc / total)


def run_slot(
    server: ServerState,
    clients: list[ClientState],
    schedule: AvailabilitySchedule,
    slot: int,
    seed: int,
    rounds_per_slot: int = 10,
) -> ServerState:
    """Advance the protocol by one slot (rounds_per_slot global rounds).

    Per round: deposit coresets for clients on their first connected slot,
    gather updates according to the strategy, aggregate, broadcast the new
    global parameters to connected clients, and record each contributor's
    parameters in last_params. If no one contributes (subset strategy with an
    empty slot) the global parameters carry over unchanged.

    `seed` is the run-level seed; each (round, client) SGD stream is derived
    from it independently of strategy and connectivity.
    """
    if not 0 <= slot < schedule.total_slots:
        raise ValueError(f"slot {slot} outside [0, {schedule.total_slots})")
    if rounds_per_slot < 1:
        raise ValueError(f"rounds_per_slot must be >= 1, got {rounds_per_slot}")
    ordered = sorted(clients, key=lambda c: c.id)
    ids = [c.id for c in ordered]
    if ids != list(range(server.n_clients)) or schedule.n_clients != server.n_clients:
        raise ValueError(f"expected clients 0..{server.n_clients - 1} and a matching schedule, got ids {ids}")

    for r in range(rounds_per_slot):
        round_index = slot * rounds_per_slot + r
        for c in ordered:
            if schedule.connected(c.id, slot) and c.id not in server.coresets:
                server.coresets[c.id] = build_coreset(c.train, c.coreset_policy)
                server.client_weights[c.id] = c.weight
        updates = []
        for c in ordered:
            seed_rc = sgd_seed(seed, round_index, c.id)
            conn = schedule.connected(c.id, slot)
            if server.strategy == "fedavg":
                updates.append(client_round(c, server.global_params, server.hp, seed_rc))
            elif server.strategy == "subset":
                if conn:
                    updates.append(client_round(c, server.global_params, server.hp, seed_rc))
            else:
                if conn:
                    updates.append(client_round(c, server.global_params, server.hp, seed_rc))
                elif c.id in server.coresets:
                    updates.append(proxy_round(server, c.id, seed_rc))
        if updates:
            server.global_params = aggregate(updates)
        for u in updates:
            server.last_params[u.client_id] = u.params
        for c in ordered:
            if schedule.connected(c.id, slot):
                c.local_params = server.global_params
    return server
