"""Batch query criteria: the diffusion criterion plus classic baselines.

The diffusion criterion ranks unlabeled points by the smallest per-class
signal magnitude after T diffusion steps and queries the lowest-scoring B.
Large batches are split into R = ceil(B/P) mini-batches; picked points are
clamped and the signal re-diffused between mini-batches so consecutive picks
spread out.  Points the diffusion has not reached at all are broken up by an
influence score (their total outgoing similarity) when they outnumber the
remaining quota, and the diffusion time can shrink as coverage improves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import EmbeddingSet, PoolState
from .diffusion import diffuse, signal_from_labels
from .errors import ConfigurationError, InsufficientPoolError, ShapeError
from .knn_graph import Kernel

CRITERIA = ("diffusion", "random", "uncertainty", "margin", "entropy", "coreset")

# |chi| below this counts as "not reached by diffusion"
ZERO_SIGNAL_TOL = 1e-12


@dataclass
class QueryConfig:
    """Knobs of one batch query; defaults follow the 2-d experiment setup."""

    batch_size: int = 5
    minibatch_size: int | None = None   # defaults to batch_size (single shot)
    diffusion_time: int = 4
    delta: float = 0.0                  # 0 disables dynamic time reduction
    init_mode: str = "hard"
    criterion: str = "diffusion"
    score_variant: str = "min_abs"      # or "top_two_margin" over channels

    def __post_init__(self):
        for name in ("batch_size", "minibatch_size", "diffusion_time"):
            value = getattr(self, name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.minibatch_size is None:
            self.minibatch_size = self.batch_size
        if not 1 <= self.minibatch_size <= self.batch_size:
            raise ConfigurationError(
                f"need 1 <= P <= B, got P={self.minibatch_size}, B={self.batch_size}"
            )
        if self.diffusion_time < 1:
            raise ConfigurationError(f"diffusion_time must be >= 1, got {self.diffusion_time}")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigurationError(f"delta must be in [0, 1], got {self.delta}")
        if self.init_mode not in ("hard", "soft"):
            raise ConfigurationError(f"unknown init_mode {self.init_mode!r}")
        if self.criterion not in CRITERIA:
            raise ConfigurationError(f"unknown criterion {self.criterion!r}")
        if self.score_variant not in ("min_abs", "top_two_margin"):
            raise ConfigurationError(f"unknown score_variant {self.score_variant!r}")

    @property
    def num_minibatches(self) -> int:
        return -(-self.batch_size // self.minibatch_size)


@dataclass
class QueryStats:
    """Optional per-query bookkeeping a caller can collect."""

    diffuse_seconds: float = 0.0
    sort_seconds: float = 0.0
    times_used: list[int] = field(default_factory=list)
    zero_counts: list[int] = field(default_factory=list)


def _scores(chi_rows: np.ndarray, variant: str) -> np.ndarray:
    if variant == "min_abs":
        return np.abs(chi_rows).min(axis=1)
    top2 = np.partition(chi_rows, chi_rows.shape[1] - 2, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def diffusion_batch_query(kernel: Kernel, pool: PoolState, cfg: QueryConfig,
                          num_classes: int, probs: np.ndarray | None = None,
                          oracle=None, stats: QueryStats | None = None) -> np.ndarray:
    """Select B distinct unlabeled indices by the diffusion criterion.

    ``oracle`` is an optional callable mapping an index array to true labels;
    when given, mini-batch picks are clamped with their oracle labels before
    the signal is re-diffused (the simulated-annotator setting).  Without it
    picks are clamped to their currently predicted class.
    """
    unlabeled = pool.unlabeled_indices
    b = cfg.batch_size
    if unlabeled.size < b:
        raise InsufficientPoolError(
            f"pool has {unlabeled.size} unlabeled points, cannot query {b}"
        )
    n = kernel.n
    interim_idx = pool.labeled_indices
    interim_lab = pool.labeled_labels
    taken = np.zeros(n, dtype=bool)
    taken[interim_idx] = True
    selected: list[int] = []
    t = cfg.diffusion_time
    remaining = b
    while remaining > 0:
        quota = min(cfg.minibatch_size, remaining)
        signal = signal_from_labels(n, interim_idx, interim_lab, num_classes,
                                    mode=cfg.init_mode, probs=probs)
        t0 = time.perf_counter()
        signal = diffuse(kernel, signal, t)
        t1 = time.perf_counter()
        cand = np.flatnonzero(~taken)
        rows = signal.chi[cand]
        zero_mask = np.abs(rows).max(axis=1) < ZERO_SIGNAL_TOL
        n_zero = int(zero_mask.sum())
        if n_zero > quota:
            # more untouched points than quota: rank them by influence
            zcand = cand[zero_mask]
            influence = kernel.degrees[zcand]
            order = np.argsort(-influence, kind="stable")  # ties: lower index
            picks = zcand[order[:quota]]
        else:
            order = np.argsort(_scores(rows, cfg.score_variant), kind="stable")
            picks = cand[order[:quota]]
        t2 = time.perf_counter()
        if stats is not None:
            stats.diffuse_seconds += t1 - t0
            stats.sort_seconds += t2 - t1
            stats.times_used.append(t)
            stats.zero_counts.append(n_zero)
        if oracle is not None:
            pick_labels = np.asarray(oracle(picks), dtype=np.int64)
        else:
            pick_labels = np.argmax(signal.chi[picks], axis=1)
        selected.extend(int(i) for i in picks)
        taken[picks] = True
        interim_idx = np.concatenate([interim_idx, picks])
        interim_lab = np.concatenate([interim_lab, pick_labels])
        remaining -= quota
        if cfg.delta > 0.0 and n_zero < cfg.delta * n:
            t = max(1, t - 1)
    return np.asarray(selected, dtype=np.int64)


def _validate_probs(probs: np.ndarray, n: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != n:
        raise ShapeError(f"probs must be (n={n}, C), got {probs.shape}")
    if np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
        raise ConfigurationError("probs rows must sum to 1 within 1e-6")
    return probs


def baseline_query(criterion: str, probs: np.ndarray | None, pool: PoolState,
                   batch_size: int, seed: int | None = None) -> np.ndarray:
    """Classic selection rules over model posteriors; ties go to lower index."""
    unlabeled = pool.unlabeled_indices
    if unlabeled.size < batch_size:
        raise InsufficientPoolError(
            f"pool has {unlabeled.size} unlabeled points, cannot query {batch_size}"
        )
    if criterion == "random":
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(unlabeled, size=batch_size, replace=False))
    if criterion not in ("uncertainty", "margin", "entropy"):
        raise ConfigurationError(f"unknown baseline criterion {criterion!r}")
    if probs is None:
        raise ConfigurationError(f"criterion {criterion!r} needs model posteriors")
    probs = _validate_probs(probs, pool.n_total)
    rows = probs[unlabeled]
    if criterion == "uncertainty":
        key = rows.max(axis=1)  # least confident first
    elif criterion == "margin":
        top2 = np.partition(rows, rows.shape[1] - 2, axis=1)[:, -2:]
        key = top2[:, 1] - top2[:, 0]
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(rows > 0.0, rows * np.log(rows), 0.0)
        key = plogp.sum(axis=1)  # = -entropy, so ascending = most entropic first
    order = np.argsort(key, kind="stable")
    return unlabeled[order[:batch_size]]


def coreset_greedy_query(data, pool: PoolState, batch_size: int) -> np.ndarray:
    """Greedy k-center batch: repeatedly take the point farthest from coverage.

    Coverage is the labeled set plus picks so far, with Euclidean distance in
    the embedding space.  An empty labeled set seeds coverage from the
    lowest-index unlabeled point (which becomes the first pick).
    """
    x = data.vectors if isinstance(data, EmbeddingSet) else np.asarray(data, dtype=np.float64)
    unlabeled = pool.unlabeled_indices
    if unlabeled.size < batch_size:
        raise InsufficientPoolError(
            f"pool has {unlabeled.size} unlabeled points, cannot query {batch_size}"
        )
    cand = x[unlabeled]
    selected: list[int] = []
    if pool.n_labeled:
        min_d2 = np.full(unlabeled.size, np.inf)
        centers = x[pool.labeled_indices]
        for start in range(0, centers.shape[0], 128):
            block = centers[start:start + 128]
            d2 = ((cand[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)
            np.minimum(min_d2, d2.min(axis=1), out=min_d2)
    else:
        first = 0  # lowest-index unlabeled point
        selected.append(int(unlabeled[first]))
        min_d2 = ((cand - cand[first]) ** 2).sum(axis=1)
        min_d2[first] = -np.inf
    while len(selected) < batch_size:
        pos = int(np.argmax(min_d2))  # first max = lowest index on ties
        selected.append(int(unlabeled[pos]))
        d2 = ((cand - cand[pos]) ** 2).sum(axis=1)
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[pos] = -np.inf
    return np.asarray(selected, dtype=np.int64)
