"""Pool data handling: synthetic checkerboards, EMB1 files, labeled/unlabeled state.

An :class:`EmbeddingSet` is the substrate everything else works on: an N x d
matrix of points plus (possibly partial) integer labels.  A :class:`PoolState`
tracks which pool indices have been labeled so far and how much query budget
remains.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FormatError, InfeasibleDrawError

UNKNOWN_LABEL = -1

EMB1_MAGIC = b"EMB1"
_EMB1_HEADER = struct.Struct("<III")  # N, d, C after the magic


@dataclass
class EmbeddingSet:
    """Feature vectors with (optionally partial) ground-truth labels.

    ``vectors`` is an (n, d) float matrix, ``labels`` a length-n integer array
    where ``UNKNOWN_LABEL`` marks points without a known class.  All known
    labels must lie in ``[0, num_classes)`` and every vector entry must be
    finite.
    """

    vectors: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise ConfigurationError(
                f"vectors must be a non-empty 2-d matrix, got shape {self.vectors.shape}"
            )
        if self.labels.shape != (self.vectors.shape[0],):
            raise ConfigurationError(
                f"labels must have shape ({self.vectors.shape[0]},), got {self.labels.shape}"
            )
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if not np.all(np.isfinite(self.vectors)):
            raise ConfigurationError("vectors contain non-finite entries")
        known = self.labels != UNKNOWN_LABEL
        bad = known & ((self.labels < 0) | (self.labels >= self.num_classes))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ConfigurationError(
                f"label {self.labels[i]} at index {i} outside [0, {self.num_classes})"
            )

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def known_mask(self) -> np.ndarray:
        return self.labels != UNKNOWN_LABEL


@dataclass
class PoolState:
    """Partition of pool indices into a labeled front and the unlabeled rest.

    ``budget_remaining=None`` disables budget accounting (useful for tests and
    one-shot queries); otherwise every :meth:`add_labels` call decrements it
    and it may never go negative.
    """

    n_total: int
    labeled_indices: np.ndarray
    labeled_labels: np.ndarray
    budget_remaining: int | None = None
    _is_labeled: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.labeled_indices = np.asarray(self.labeled_indices, dtype=np.int64).copy()
        self.labeled_labels = np.asarray(self.labeled_labels, dtype=np.int64).copy()
        if self.labeled_indices.shape != self.labeled_labels.shape:
            raise ConfigurationError("labeled indices and labels must align")
        self._is_labeled = np.zeros(self.n_total, dtype=bool)
        if self.labeled_indices.size:
            if self.labeled_indices.min() < 0 or self.labeled_indices.max() >= self.n_total:
                raise ConfigurationError("labeled index out of range")
            self._is_labeled[self.labeled_indices] = True
        if self._is_labeled.sum() != self.labeled_indices.size:
            raise ConfigurationError("duplicate labeled indices")
        self.audit()

    @property
    def n_labeled(self) -> int:
        return self.labeled_indices.size

    @property
    def n_unlabeled(self) -> int:
        return self.n_total - self.n_labeled

    @property
    def unlabeled_indices(self) -> np.ndarray:
        """Unlabeled pool indices in ascending order."""
        return np.flatnonzero(~self._is_labeled)

    def labeled_mask(self) -> np.ndarray:
        return self._is_labeled.copy()

    def add_labels(self, indices, labels) -> None:
        """Move ``indices`` from the unlabeled set to the labeled front."""
        indices = np.asarray(indices, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if indices.shape != labels.shape or indices.ndim != 1:
            raise ConfigurationError("indices and labels must be 1-d and aligned")
        if indices.size == 0:
            return
        if np.unique(indices).size != indices.size:
            raise ConfigurationError("duplicate indices in one add_labels call")
        if np.any(self._is_labeled[indices]):
            raise ConfigurationError("attempt to re-label an already labeled index")
        if np.any(labels < 0):
            raise ConfigurationError("labels must be non-negative")
        if self.budget_remaining is not None:
            if indices.size > self.budget_remaining:
                raise ConfigurationError(
                    f"adding {indices.size} labels would exceed remaining budget "
                    f"{self.budget_remaining}"
                )
            self.budget_remaining -= indices.size
        self.labeled_indices = np.concatenate([self.labeled_indices, indices])
        self.labeled_labels = np.concatenate([self.labeled_labels, labels])
        self._is_labeled[indices] = True
        self.audit()

    def audit(self) -> None:
        """Verify the partition invariant; raises ConfigurationError on corruption."""
        if self.labeled_indices.size != int(self._is_labeled.sum()):
            raise ConfigurationError("labeled bookkeeping out of sync")
        if self.labeled_indices.size and np.unique(self.labeled_indices).size != self.labeled_indices.size:
            raise ConfigurationError("labeled set contains duplicates")
        if self.n_labeled + self.n_unlabeled != self.n_total:
            raise ConfigurationError("labeled/unlabeled sets do not partition the pool")
        if self.budget_remaining is not None and self.budget_remaining < 0:
            raise ConfigurationError("budget went negative")


def generate_checkerboard(n: int, grid: int = 4, seed: int = 0,
                          flip_prob: float = 0.0) -> EmbeddingSet:
    """Draw ``n`` points uniformly on [0,1]^2 labeled by checkerboard cell parity.

    The class of a point is the parity of ``floor(x*grid) + floor(y*grid)``.
    ``flip_prob`` optionally flips each label independently (defaults to
    noiseless labels).
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if grid < 2:
        raise ConfigurationError(f"grid must be >= 2, got {grid}")
    if not 0.0 <= flip_prob <= 1.0:
        raise ConfigurationError(f"flip_prob must be in [0, 1], got {flip_prob}")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    cells = np.floor(pts * grid).astype(np.int64)
    labels = (cells[:, 0] + cells[:, 1]) % 2
    if flip_prob > 0.0:
        flips = rng.random(n) < flip_prob
        labels = np.where(flips, 1 - labels, labels)
    return EmbeddingSet(pts, labels, num_classes=2)


def checkerboard_label(x: float, y: float, grid: int) -> int:
    """Ground-truth parity label of a single point (exposed for tests/tools)."""
    return int((int(np.floor(x * grid)) + int(np.floor(y * grid))) % 2)


def init_labeled_balanced(dataset: EmbeddingSet, per_class: int, seed: int = 0,
                          budget: int | None = None) -> PoolState:
    """Draw ``per_class`` labeled points of every class, uniformly without replacement."""
    if per_class < 0:
        raise ConfigurationError(f"per_class must be >= 0, got {per_class}")
    rng = np.random.default_rng(seed)
    chosen: list[np.ndarray] = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        if members.size < per_class:
            raise InfeasibleDrawError(
                f"class {c} has {members.size} points, cannot draw {per_class}"
            )
        if per_class:
            chosen.append(rng.choice(members, size=per_class, replace=False))
    if chosen:
        idx = np.concatenate(chosen)
    else:
        idx = np.empty(0, dtype=np.int64)
    return PoolState(dataset.n, idx, dataset.labels[idx], budget_remaining=budget)


def write_embedding_file(dataset: EmbeddingSet, path) -> None:
    """Serialize to the EMB1 format (little-endian, float32 payload)."""
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(_EMB1_HEADER.pack(dataset.n, dataset.dim, dataset.num_classes))
        fh.write(np.ascontiguousarray(dataset.vectors, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(dataset.labels, dtype="<i4").tobytes())


def load_embedding_file(path) -> EmbeddingSet:
    """Parse an EMB1 file; raises FormatError naming the offending byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != EMB1_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0 (expected {EMB1_MAGIC!r})")
    if len(blob) < 4 + _EMB1_HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(blob)}")
    n, d, c = _EMB1_HEADER.unpack_from(blob, 4)
    if n < 1:
        raise FormatError(f"{path}: invalid point count {n} at byte 4")
    if d < 1:
        raise FormatError(f"{path}: invalid dimension {d} at byte 8")
    if c < 2:
        raise FormatError(f"{path}: invalid class count {c} at byte 12")
    vec_off = 4 + _EMB1_HEADER.size
    lab_off = vec_off + 4 * n * d
    expected = lab_off + 4 * n
    if len(blob) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes, got {len(blob)} "
            f"(payload truncated or padded at byte {min(len(blob), expected)})"
        )
    vectors = np.frombuffer(blob, dtype="<f4", count=n * d, offset=vec_off).reshape(n, d)
    finite = np.isfinite(vectors).ravel()
    if not finite.all():
        i = int(np.argmin(finite))
        raise FormatError(f"{path}: non-finite vector entry at byte {vec_off + 4 * i}")
    labels = np.frombuffer(blob, dtype="<i4", count=n, offset=lab_off)
    bad = (labels < UNKNOWN_LABEL) | (labels >= c)
    if bad.any():
        i = int(np.argmax(bad))
        raise FormatError(
            f"{path}: label {labels[i]} outside [-1, {c}) at byte {lab_off + 4 * i}"
        )
    return EmbeddingSet(vectors.astype(np.float64), labels.astype(np.int64), int(c))
