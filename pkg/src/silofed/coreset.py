"""Coreset selection: small exact-copy subsets deposited at the server.

A coreset is a verbatim subset of a client's training rows, emitted in
ascending source order so that a fraction-1.0 coreset reproduces the dataset
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .rng import generator

CORESET_METHODS = ("uniform", "stratified")


@dataclass(frozen=True)
class CoresetPolicy:
    """How a client samples its coreset: size fraction, method, and seed."""

    fraction: float = 0.05
    method: str = "stratified"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.method not in CORESET_METHODS:
            raise ValueError(f"method must be one of {CORESET_METHODS}, got {self.method!r}")


def _stratified_quotas(labels: np.ndarray, target: int, n: int) -> dict[int, int]:
    """Proportional per-class quotas: floor shares, remainder to the largest
    classes, then at least one row for every represented class."""
    classes, counts = np.unique(labels, return_counts=True)
    quotas = {int(c): (target * int(k)) // n for c, k in zip(classes, counts)}
    remainder = target - sum(quotas.values())
    by_size = sorted(zip(classes, counts), key=lambda ck: (-int(ck[1]), int(ck[0])))
    for c, _ in by_size[:remainder]:
        quotas[int(c)] += 1
    for c in classes:
        quotas[int(c)] = max(1, quotas[int(c)])
    return quotas


def build_coreset(data: Dataset, policy: CoresetPolicy) -> Dataset:
    """Sample a coreset from `data` under `policy`.

    Stratified sampling keeps per-class counts within one row of exact
    proportionality; the total can exceed round(fraction * n) only through
    the one-per-class minimum. Selected rows keep their source order.
    """
    n = len(data)
    rng = generator(policy.seed)
    target = max(1, int(round(policy.fraction * n)))
    if policy.method == "uniform":
        chosen = rng.choice(n, size=target, replace=False)
    else:
        quotas = _stratified_quotas(data.labels, target, n)
        parts = []
        for c in sorted(quotas):
            pool = np.flatnonzero(data.labels == c)
            parts.append(rng.choice(pool, size=quotas[c], replace=False))
        chosen = np.concatenate(parts)
    chosen = np.sort(chosen)
    return Dataset(data.features[chosen], data.labels[chosen], data.class_count, f"{data.name}-coreset")
