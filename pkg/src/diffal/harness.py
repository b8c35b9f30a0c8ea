"""The full pool-based loop: init labels, query, reveal, retrain, evaluate.

One run produces an :class:`AccuracyCurve` per seed; comparisons across
criteria reuse identical initial labeled sets and model seeds per run index
so the curves differ only through the selection rule.  Revealed labels flow
through a :class:`LabelOracle` that records the round of first access, which
is how the tests verify nothing peeks at labels before querying them.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .data import EmbeddingSet, PoolState, generate_checkerboard, init_labeled_balanced, load_embedding_file
from .diffusion import exact_fixed_point, init_signal, predict_labels
from .errors import ConfigurationError, ShapeError
from .knn_graph import build_knn_graph, compute_kernel
from .model import MlpModel, SgdOptions, train
from .query import (
    CRITERIA,
    QueryConfig,
    QueryStats,
    baseline_query,
    coreset_greedy_query,
    diffusion_batch_query,
)


@dataclass
class DatasetSpec:
    """Where a point set comes from: synthetic checkerboard or an EMB1 file."""

    kind: str = "checkerboard"
    n: int = 2000
    grid: int = 4
    seed: int = 0
    flip_prob: float = 0.0
    path: str | None = None

    def load(self) -> EmbeddingSet:
        if self.kind == "checkerboard":
            return generate_checkerboard(self.n, grid=self.grid, seed=self.seed,
                                         flip_prob=self.flip_prob)
        if self.kind == "emb1":
            if not self.path:
                raise ConfigurationError("emb1 dataset spec needs a path")
            return load_embedding_file(self.path)
        raise ConfigurationError(f"unknown dataset kind {self.kind!r}")


@dataclass
class ModelSpec:
    hidden: list[int] = field(default_factory=lambda: [30, 30])
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 1
    epochs: int = 100
    # "warm" keeps training the same model after each query (epochs accrue
    # across rounds); "cold" restarts from fresh parameters every round.
    # At 100 epochs per round only the warm schedule ever fits the data.
    retrain: str = "warm"

    def __post_init__(self):
        if self.retrain not in ("warm", "cold"):
            raise ConfigurationError(f"unknown retrain mode {self.retrain!r}")


@dataclass
class GraphSpec:
    k: int = 10
    method: str = "auto"


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    test: DatasetSpec = field(default_factory=lambda: DatasetSpec(n=200, seed=1234))
    model: ModelSpec = field(default_factory=ModelSpec)
    graph: GraphSpec = field(default_factory=GraphSpec)
    query: QueryConfig = field(default_factory=QueryConfig)
    budget: int = 600
    init_per_class: int = 4
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    embedding_source: str = "model-penultimate"  # or "file-direct"

    def __post_init__(self):
        for name in ("budget", "init_per_class"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
        if self.budget < 1:
            raise ConfigurationError(f"budget must be >= 1, got {self.budget}")
        if self.init_per_class < 0:
            raise ConfigurationError("init_per_class must be >= 0")
        if not self.seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in self.seeds
        ):
            raise ConfigurationError("seeds must be a non-empty list of integers")
        if self.embedding_source not in ("model-penultimate", "file-direct"):
            raise ConfigurationError(
                f"unknown embedding_source {self.embedding_source!r}"
            )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            return cls(
                dataset=DatasetSpec(**raw.get("dataset", {})),
                test=DatasetSpec(**raw.get("test", {"n": 200, "seed": 1234})),
                model=ModelSpec(**raw.get("model", {})),
                graph=GraphSpec(**raw.get("graph", {})),
                query=QueryConfig(**raw.get("query", {})),
                budget=raw.get("budget", 600),
                init_per_class=raw.get("init_per_class", 4),
                seeds=list(raw.get("seeds", [0, 1, 2, 3, 4])),
                embedding_source=raw.get("embedding_source", "model-penultimate"),
            )
        except TypeError as exc:  # unknown field names
            raise ConfigurationError(f"bad config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RoundRecord:
    labels_used: int
    accuracy: float
    wall_time: float
    phases: dict = field(default_factory=dict)


@dataclass
class AccuracyCurve:
    criterion: str
    seed: int
    records: list[RoundRecord] = field(default_factory=list)
    oracle: "LabelOracle | None" = None  # attached per run for integrity audits


class LabelOracle:
    """Ground-truth label source that records the round of first access."""

    def __init__(self, truth: np.ndarray):
        self.truth = np.asarray(truth, dtype=np.int64)
        self.first_read_round = np.full(self.truth.size, -1, dtype=np.int64)
        self.given = np.zeros(self.truth.size, dtype=bool)
        self._round = 0

    def mark_given(self, indices) -> None:
        """Initial labeled points: supplied as input, not counted as reads."""
        self.given[np.asarray(indices, dtype=np.int64)] = True

    def begin_round(self, round_index: int) -> None:
        self._round = round_index

    def reveal(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        fresh = self.first_read_round[indices] == -1
        self.first_read_round[indices[fresh]] = self._round
        return self.truth[indices].copy()


def evaluate_accuracy(predictions, truth) -> float:
    """Exact-match fraction."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ShapeError(
            f"predictions {predictions.shape} vs truth {truth.shape}"
        )
    return float(np.mean(predictions == truth))


def aggregate_seeds(curves: list[AccuracyCurve]) -> dict:
    """Per-round mean and population variance of accuracy across seeds."""
    if not curves:
        raise ShapeError("no curves to aggregate")
    lengths = {len(c.records) for c in curves}
    if len(lengths) != 1:
        raise ShapeError(f"curves have ragged round counts {sorted(lengths)}")
    labels_used = np.asarray([r.labels_used for r in curves[0].records])
    for c in curves[1:]:
        if any(r.labels_used != l for r, l in zip(c.records, labels_used)):
            raise ShapeError("curves disagree on labels_used checkpoints")
    acc = np.asarray([[r.accuracy for r in c.records] for c in curves])
    return {
        "labels_used": labels_used,
        "mean": acc.mean(axis=0),
        "variance": acc.var(axis=0),  # population variance
    }


def emit_curves(curves: list[AccuracyCurve], path) -> None:
    """CSV export: criterion, seed, round, labels_used, accuracy, wall_time."""
    with open(path, "w", newline="") as fh:
        fh.write("criterion,seed,round,labels_used,accuracy,wall_time\n")
        for curve in curves:
            for rnd, rec in enumerate(curve.records):
                fh.write(
                    f"{curve.criterion},{curve.seed},{rnd},{rec.labels_used},"
                    f"{rec.accuracy!r},{rec.wall_time!r}\n"
                )


def _batch_plan(budget: int, batch_size: int) -> list[int]:
    full, partial = divmod(budget, batch_size)
    return [batch_size] * full + ([partial] if partial else [])


def _derived_seeds(seed: int, round_index: int) -> tuple[int, int, int]:
    state = np.random.SeedSequence((seed, round_index)).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


class _ModelClassifier:
    """Standard mode: an MLP retrained after every query (warm or cold per
    config); its last hidden layer is the embedding the graph is built on."""

    def __init__(self, cfg: ExperimentConfig, pool_data: EmbeddingSet):
        self.cfg = cfg
        self.widths = [pool_data.dim, *cfg.model.hidden, pool_data.num_classes]
        self.model: MlpModel | None = None

    def retrain(self, seed: int, round_index: int, vectors, labels) -> None:
        init_seed, shuffle_seed, _ = _derived_seeds(seed, round_index)
        if self.model is None or self.cfg.model.retrain == "cold":
            self.model = MlpModel.create(self.widths, seed=init_seed)
        opt = SgdOptions(
            learning_rate=self.cfg.model.learning_rate,
            momentum=self.cfg.model.momentum,
            batch_size=self.cfg.model.batch_size,
            epochs=self.cfg.model.epochs,
            seed=shuffle_seed,
        )
        train(self.model, vectors, labels, opt)

    def pool_state_arrays(self, pool_vectors):
        probs, embedding = self.model.forward_with_embedding(pool_vectors)
        return probs, embedding

    def test_predictions(self, pool_vectors, pool: PoolState, test_vectors) -> np.ndarray:
        return self.model.predict(test_vectors)


class _DiffusionClassifier:
    """File-direct mode: the graph fixed point is the classifier itself.

    Test points are classified by the nearest pool point's predicted label
    (a 1-NN extension of the transductive solution).
    """

    def __init__(self, cfg: ExperimentConfig, pool_data: EmbeddingSet):
        self.cfg = cfg
        self.num_classes = pool_data.num_classes
        self._kernel = None
        self._pool_pred: np.ndarray | None = None
        self._pool_probs: np.ndarray | None = None
        self._test_tree: cKDTree | None = None

    def attach_kernel(self, kernel) -> None:
        self._kernel = kernel

    def refresh(self, pool: PoolState) -> None:
        signal = init_signal(pool, self.num_classes, mode="hard")
        # sparse labeled sets mix too slowly for sweeps; factorize instead,
        # lightly regularized so unreachable blocks settle at zero
        fixed = exact_fixed_point(self._kernel, signal, tol=1e-6,
                                  method="direct", reg=1e-9)
        self._pool_pred = predict_labels(fixed)
        p = np.clip((fixed.chi + 1.0) * 0.5, 0.0, None)
        self._pool_probs = p / p.sum(axis=1, keepdims=True)

    def pool_state_arrays(self, pool_vectors):
        return self._pool_probs, pool_vectors

    def test_predictions(self, pool_vectors, pool: PoolState, test_vectors) -> np.ndarray:
        if self._test_tree is None:
            self._test_tree = cKDTree(pool_vectors)
        _, nearest = self._test_tree.query(test_vectors, k=1)
        return self._pool_pred[nearest]


def _select_batch(criterion: str, kernel, pool: PoolState, cfg: ExperimentConfig,
                  batch_size: int, num_classes: int, probs, embeddings,
                  oracle: LabelOracle, query_seed: int, stats: QueryStats) -> np.ndarray:
    if criterion == "diffusion":
        qcfg = QueryConfig(
            batch_size=batch_size,
            minibatch_size=min(cfg.query.minibatch_size, batch_size),
            diffusion_time=cfg.query.diffusion_time,
            delta=cfg.query.delta,
            init_mode=cfg.query.init_mode,
            criterion="diffusion",
            score_variant=cfg.query.score_variant,
        )
        soft_probs = probs if cfg.query.init_mode == "soft" else None
        return diffusion_batch_query(kernel, pool, qcfg, num_classes,
                                     probs=soft_probs, oracle=oracle.reveal, stats=stats)
    t0 = time.perf_counter()
    if criterion == "coreset":
        batch = coreset_greedy_query(embeddings, pool, batch_size)
    elif criterion == "random":
        batch = baseline_query("random", None, pool, batch_size, seed=query_seed)
    else:
        batch = baseline_query(criterion, probs, pool, batch_size)
    stats.sort_seconds += time.perf_counter() - t0
    return batch


def _run_single(pool_data: EmbeddingSet, test_data: EmbeddingSet,
                cfg: ExperimentConfig, criterion: str, seed: int) -> AccuracyCurve:
    pool = init_labeled_balanced(pool_data, cfg.init_per_class, seed=seed,
                                 budget=cfg.budget)
    oracle = LabelOracle(pool_data.labels)
    oracle.mark_given(pool.labeled_indices)
    file_direct = cfg.embedding_source == "file-direct"
    classifier = (_DiffusionClassifier if file_direct else _ModelClassifier)(cfg, pool_data)
    curve = AccuracyCurve(criterion=criterion, seed=seed)

    static_kernel = None
    if file_direct:
        graph = build_knn_graph(pool_data.vectors, cfg.graph.k, method=cfg.graph.method)
        static_kernel = compute_kernel(graph)
        classifier.attach_kernel(static_kernel)

    def evaluate_round(round_index: int, phases: dict, started: float) -> None:
        t0 = time.perf_counter()
        preds = classifier.test_predictions(pool_data.vectors, pool, test_data.vectors)
        acc = evaluate_accuracy(preds, test_data.labels)
        phases["eval"] = time.perf_counter() - t0
        curve.records.append(RoundRecord(
            labels_used=pool.n_labeled,
            accuracy=acc,
            wall_time=time.perf_counter() - started,
            phases=phases,
        ))

    started = time.perf_counter()
    phases: dict = {}
    t0 = time.perf_counter()
    if file_direct:
        classifier.refresh(pool)
    else:
        classifier.retrain(seed, 0, pool_data.vectors[pool.labeled_indices],
                           pool.labeled_labels)
    phases["train"] = time.perf_counter() - t0
    evaluate_round(0, phases, started)

    for round_index, batch_size in enumerate(_batch_plan(cfg.budget, cfg.query.batch_size), start=1):
        started = time.perf_counter()
        phases = {}
        oracle.begin_round(round_index)
        stats = QueryStats()

        t0 = time.perf_counter()
        probs, embeddings = classifier.pool_state_arrays(pool_data.vectors)
        phases["embed"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if file_direct:
            kernel = static_kernel
        else:
            graph = build_knn_graph(embeddings, cfg.graph.k, method=cfg.graph.method)
            kernel = compute_kernel(graph)
        phases["graph"] = time.perf_counter() - t0

        _, _, query_seed = _derived_seeds(seed, round_index)
        batch = _select_batch(criterion, kernel, pool, cfg, batch_size,
                              pool_data.num_classes, probs, embeddings,
                              oracle, query_seed, stats)
        phases["diffuse"] = stats.diffuse_seconds
        phases["sort"] = stats.sort_seconds

        labels = oracle.reveal(batch)
        pool.add_labels(batch, labels)

        t0 = time.perf_counter()
        if file_direct:
            classifier.refresh(pool)
        else:
            classifier.retrain(seed, round_index, pool_data.vectors[pool.labeled_indices],
                               pool.labeled_labels)
        phases["train"] = time.perf_counter() - t0
        evaluate_round(round_index, phases, started)

    curve.oracle = oracle  # exposed for integrity checks
    return curve


def _validate_run(cfg: ExperimentConfig, pool_data: EmbeddingSet) -> None:
    initial = cfg.init_per_class * pool_data.num_classes
    if initial + cfg.budget > pool_data.n:
        raise ConfigurationError(
            f"budget {cfg.budget} plus {initial} initial labels exceeds pool size {pool_data.n}"
        )


def run_comparison(cfg: ExperimentConfig, criteria: list[str]) -> list[AccuracyCurve]:
    """Run each criterion over all seeds with shared data and per-seed init."""
    for criterion in criteria:
        if criterion not in CRITERIA:
            raise ConfigurationError(f"unknown criterion {criterion!r}")
    pool_data = cfg.dataset.load()
    test_data = cfg.test.load()
    if np.any(~pool_data.known_mask()):
        raise ConfigurationError(
            "pool has unknown labels; the simulated oracle needs full ground truth"
        )
    if np.any(~test_data.known_mask()):
        raise ConfigurationError("test set contains unknown labels")
    if test_data.dim != pool_data.dim:
        raise ConfigurationError("test and pool dimensions differ")
    _validate_run(cfg, pool_data)
    curves = []
    for criterion in criteria:
        for seed in cfg.seeds:
            curves.append(_run_single(pool_data, test_data, cfg, criterion, seed))
    return curves


def run_active_learning(cfg: ExperimentConfig) -> list[AccuracyCurve]:
    """Run the configured criterion across all seeds; one curve per seed."""
    return run_comparison(cfg, [cfg.query.criterion])
