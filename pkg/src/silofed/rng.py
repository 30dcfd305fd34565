"""Deterministic random number utilities.

All randomness in this package flows through numpy's Philox bit generator, a
counter-based generator whose output is a pure function of its 64-bit key and
is identical across platforms. Child seeds are derived from a master seed by
hashing a purpose label plus integer indices, so any part of a run can be
re-created in isolation and no stream depends on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_ENCODING = "silofed-seed-v1"


def derive_seed(master: int, label: str, *indices: int) -> int:
    """Derive a 64-bit child seed from a master seed, a label, and indices.

    Distinct (label, indices) tuples give statistically independent streams.
    """
    text = "|".join([_ENCODING, str(int(master)), label, *[str(int(i)) for i in indices]])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def generator(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a single integer seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def sgd_seed(run_seed: int, round_index: int, client_id: int) -> int:
    """Seed for one client's local SGD in one global round.

    Shared by every strategy and by the standalone runner: the batch stream a
    client (or its server-side proxy) sees depends only on (run seed, round,
    client), never on connectivity or on which code path produced the update.
    """
    return derive_seed(run_seed, "sgd", round_index, client_id)
