"""Synthetic task generators and CSV ingestion.

Tasks are built from Gaussian blob datasets and carved into per-client
(train, test) splits three ways: rotated feature space, disjoint class
halves, or plain iid shards. Every generator is a pure function of its seed.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .rng import generator

TASK_KINDS = ("rotated", "split_class", "iid")

# Phase offset between consecutive coordinate pairs in the centroid layout;
# golden-angle spacing keeps the pairs from lining up for any class count.
_GOLDEN = 2.399963229728653

# Share of each centroid's squared separation carried by the odd trailing
# coordinate, when there is one. Pair rotations leave that coordinate alone,
# so a large share keeps rotated variants of a task aligned on class identity
# instead of turning the rotation into pure label conflict.
_ANCHOR_SHARE = 0.95


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels drawn from [0, class_count)."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"features must be a non-empty 2-D array, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {f.shape[0]} rows")
        if not np.isfinite(f).all():
            raise ValueError("features contain NaN or Inf")
        if self.class_count < 1:
            raise ValueError(f"class_count must be >= 1, got {self.class_count}")
        if y.min() < 0 or y.max() >= self.class_count:
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        f = f.copy()
        y = y.copy()
        f.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.name == other.name
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and self.labels.tobytes() == other.labels.tobytes()
        )

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitTask:
    """Per-client (train, test) datasets plus the split kind that built them."""

    clients: tuple[tuple[Dataset, Dataset], ...]
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ValueError(f"kind must be one of {TASK_KINDS}, got {self.kind!r}")
        if len(self.clients) < 1:
            raise ValueError("a task needs at least one client")
        object.__setattr__(self, "clients", tuple(tuple(c) for c in self.clients))

    @property
    def n_clients(self) -> int:
        return len(self.clients)


def _take(data: Dataset, idx: np.ndarray, name: str) -> Dataset:
    return Dataset(data.features[idx], data.labels[idx], data.class_count, name)


def class_centroids(class_count: int, dim: int) -> np.ndarray:
    """Deterministic blob centers, one per class, at roughly unit radius.

    Class c sits at pattern angle 2*pi*c/class_count, replicated across
    coordinate pairs (0,1), (2,3), ... with a golden-angle phase shift per
    pair. For even dims the distance between classes c and c' is exactly
    2*|sin(pi*(c-c')/class_count)| regardless of dim.

    An odd trailing coordinate is a rotation-stable anchor: it takes the
    cosine of the pattern angle scaled so that _ANCHOR_SHARE of the squared
    class separation survives any pair rotation. Two-class layouts in odd
    dims therefore keep the exact separation 2 as well.
    """
    pairs = dim // 2
    extra = dim % 2
    phi = 2.0 * np.pi * np.arange(class_count) / class_count
    mu = np.zeros((class_count, dim))
    pair_scale = 1.0 if pairs == 0 else np.sqrt((1.0 - _ANCHOR_SHARE if extra else 1.0) / pairs)
    for k in range(pairs):
        psi = k * _GOLDEN
        mu[:, 2 * k] = pair_scale * np.cos(phi + psi)
        mu[:, 2 * k + 1] = pair_scale * np.sin(phi + psi)
    if extra:
        anchor_scale = 1.0 if pairs == 0 else np.sqrt(_ANCHOR_SHARE)
        mu[:, dim - 1] = anchor_scale * np.cos(phi)
    return mu


def gen_blobs(class_count: int, per_class: int, dim: int, spread: float, seed: int) -> Dataset:
    """Isotropic Gaussian blobs: per_class samples around each class centroid."""
    if class_count < 2:
        raise ValueError(f"class_count must be >= 2, got {class_count}")
    if per_class < 2:
        raise ValueError(f"per_class must be >= 2, got {per_class}")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if not spread > 0:
        raise ValueError(f"spread must be > 0, got {spread}")
    mu = class_centroids(class_count, dim)
    labels = np.repeat(np.arange(class_count), per_class)
    noise = generator(seed).normal(size=(labels.size, dim))
    features = mu[labels] + spread * noise
    return Dataset(features, labels, class_count, name=f"blobs{class_count}x{per_class}d{dim}")


def rotate_features(features: np.ndarray, angle_degrees: float) -> np.ndarray:
    """Rotate each coordinate pair (0,1), (2,3), ... by the same angle.

    An odd trailing coordinate is left untouched. angle 0 returns the input
    bit-for-bit.
    """
    features = np.asarray(features, dtype=np.float64)
    theta = np.radians(angle_degrees)
    c, s = np.cos(theta), np.sin(theta)
    out = features.copy()
    for k in range(features.shape[1] // 2):
        x = features[:, 2 * k]
        y = features[:, 2 * k + 1]
        out[:, 2 * k] = c * x - s * y
        out[:, 2 * k + 1] = s * x + c * y
    return out


def _split_once(data: Dataset, test_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(data)
    n_test = int(round(test_fraction * n))
    if n_test < 1 or n - n_test < 1:
        raise ValueError(f"test_fraction {test_fraction} leaves an empty split for {n} samples")
    perm = rng.permutation(n)
    return perm[n_test:], perm[:n_test]


def make_rotated_task(base: Dataset, angle_degrees: float, test_fraction: float, seed: int) -> SplitTask:
    """Two clients: the base data, and the same rows rotated by angle_degrees.

    Both clients share one train/test split of the base, so client 1's sets
    are exact rotations of client 0's (identical at angle 0).
    """
    train_idx, test_idx = _split_once(base, test_fraction, generator(seed))
    train = _take(base, train_idx, f"{base.name}-train")
    test = _take(base, test_idx, f"{base.name}-test")
    rot_train = Dataset(
        rotate_features(train.features, angle_degrees), train.labels, base.class_count,
        f"{base.name}-rot{angle_degrees:g}-train",
    )
    rot_test = Dataset(
        rotate_features(test.features, angle_degrees), test.labels, base.class_count,
        f"{base.name}-rot{angle_degrees:g}-test",
    )
    return SplitTask(clients=((train, test), (rot_train, rot_test)), kind="rotated")


def make_split_class_task(base: Dataset, test_fraction: float, seed: int) -> SplitTask:
    """Two clients holding disjoint class halves of one base dataset.

    Client 0 keeps labels in [0, c/2), client 1 the rest; both datasets keep
    the full class_count so the model's output width is shared. The union of
    the two train sets is exactly the base train split.
    """
    c = base.class_count
    if c < 4 or c % 2 != 0:
        raise ValueError(f"split_class needs an even class_count >= 4, got {c}")
    train_idx, test_idx = _split_once(base, test_fraction, generator(seed))
    half = c // 2
    clients = []
    for lo, hi, tag in ((0, half, "lo"), (half, c, "hi")):
        tr = train_idx[(base.labels[train_idx] >= lo) & (base.labels[train_idx] < hi)]
        te = test_idx[(base.labels[test_idx] >= lo) & (base.labels[test_idx] < hi)]
        if tr.size < 1 or te.size < 1:
            raise ValueError(f"class half [{lo}, {hi}) got an empty train or test split")
        clients.append(
            (_take(base, tr, f"{base.name}-{tag}-train"), _take(base, te, f"{base.name}-{tag}-test"))
        )
    return SplitTask(clients=tuple(clients), kind="split_class")


def make_iid_task(base: Dataset, n_clients: int, test_fraction: float, seed: int) -> SplitTask:
    """Uniform random partition of the base into near-equal per-client shards."""
    if n_clients < 1:
        raise ValueError(f"n_clients must be >= 1, got {n_clients}")
    n = len(base)
    if n < n_clients * 2:
        raise ValueError(f"{n} samples cannot fill {n_clients} clients with train and test rows")
    rng = generator(seed)
    perm = rng.permutation(n)
    sizes = [n // n_clients + (1 if i < n % n_clients else 0) for i in range(n_clients)]
    clients = []
    start = 0
    for i, size in enumerate(sizes):
        shard_idx = perm[start : start + size]
        start += size
        shard = _take(base, shard_idx, f"{base.name}-c{i}")
        tr, te = _split_once(shard, test_fraction, rng)
        clients.append((_take(shard, tr, f"{shard.name}-train"), _take(shard, te, f"{shard.name}-test")))
    return SplitTask(clients=tuple(clients), kind="iid")


def load_csv(path: str, class_count: int) -> Dataset:
    """Read `d float features + integer label` rows (no header, UTF-8).

    Errors name the 1-based line of the offending row.
    """
    features: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if len(row) < 2:
                raise ValueError(f"{path}: line {line_no}: expected at least 2 fields, got {len(row)}")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"{path}: line {line_no}: expected {width} fields, got {len(row)}")
            try:
                feats = [float(cell) for cell in row[:-1]]
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: non-numeric feature value") from None
            try:
                label = int(row[-1].strip())
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: label must be an integer, got {row[-1]!r}") from None
            if not 0 <= label < class_count:
                raise ValueError(f"{path}: line {line_no}: label {label} outside [0, {class_count})")
            features.append(feats)
            labels.append(label)
    if not features:
        raise ValueError(f"{path}: empty dataset")
    return Dataset(np.array(features), np.array(labels), class_count, name=os.path.basename(path))
