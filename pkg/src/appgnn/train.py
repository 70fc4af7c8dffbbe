"""Random-walk subgraph training, model selection, evaluation and checkpoints."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np
from threadpoolctl import threadpool_limits

from .fixtures import Dataset
from .gat import AdamState, AttentionEdges, GatConfig, GatModel, adam_step, attention_edges
from .graph import CircuitGraph, Standardizer, disjoint_union
from .seeding import derive_seed

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "appgnn-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    roots: int = 3000
    depth: int = 2
    lr: float = 0.01
    dropout: float = 0.1
    seed: int = 0
    single_thread: bool = True
    hidden: int = 256
    heads: int = 8
    hidden_per_head: bool = False
    last_layer: str = "concat"
    batches_per_epoch: int = 1

    def __post_init__(self):
        if self.epochs < 0 or self.roots < 1 or self.depth < 0 or self.batches_per_epoch < 1:
            raise ValueError("epochs >= 0, roots >= 1, depth >= 0, batches_per_epoch >= 1 required")
        if not 0 <= self.dropout < 1 or self.lr <= 0:
            raise ValueError("dropout must lie in [0, 1) and lr must be positive")


def _neighbor_csr(graph: CircuitGraph):
    src, dst = graph.undirected_edges()
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=graph.n), out=indptr[1:])
    return indptr, dst


def random_walk_nodes(indptr, nbrs, n, roots, depth, rng) -> np.ndarray:
    """Sorted union of nodes visited by ``roots`` walks of ``depth`` undirected steps."""
    cur = rng.integers(0, n, size=roots)
    seen = [cur]
    deg = np.diff(indptr)
    for _ in range(depth):
        d = deg[cur]
        step = np.floor(rng.random(len(cur)) * np.maximum(d, 1)).astype(np.int64)
        moved = d > 0
        nxt = cur.copy()
        nxt[moved] = nbrs[indptr[cur[moved]] + step[moved]]
        cur = nxt
        seen.append(cur)
    return np.unique(np.concatenate(seen))


def saint_random_walk_sample(graph: CircuitGraph, roots: int, depth: int, rng) -> CircuitGraph:
    """Subgraph induced by the nodes of ``roots`` random walks (roots drawn with replacement)."""
    if graph.n == 0:
        raise ValueError("cannot sample from an empty graph")
    indptr, nbrs = _neighbor_csr(graph)
    nodes = random_walk_nodes(indptr, nbrs, graph.n, roots, depth, rng)
    return graph.subgraph(nodes)


def induced_edges(E: AttentionEdges, nodes: np.ndarray) -> AttentionEdges:
    """Restrict attention edges to ``nodes`` (sorted) and renumber them."""
    pos = np.full(E.n, -1, dtype=np.int64)
    pos[nodes] = np.arange(len(nodes))
    keep = (pos[E.src] >= 0) & (pos[E.dst] >= 0)
    src, dst = pos[E.src[keep]], pos[E.dst[keep]]
    indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=len(nodes)), out=indptr[1:])
    return AttentionEdges(len(nodes), src, dst, indptr)


@dataclass
class TrainResult:
    model: GatModel
    stats: Standardizer
    class_names: list[str]
    cell_names: list[str]
    config: TrainConfig
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "val_acc"])
        for row in self.history:
            w.writerow([row["epoch"], repr(row["loss"]), repr(row["val_acc"])])
        return buf.getvalue()

    def checkpoint(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "library": list(self.cell_names),
            "classes": list(self.class_names),
            "standardizer": self.stats.to_dict(),
            "train_config": asdict(self.config),
            "best_epoch": self.best_epoch,
            "model": self.model.to_dict(),
        }


def _threads(single: bool):
    return threadpool_limits(1) if single else contextlib.nullcontext()


def _accuracy(model, E, X, y) -> float:
    return float(np.mean(model.predict(E, X) == y))


def train(dataset: Dataset, cfg: TrainConfig, model: GatModel | None = None) -> TrainResult:
    """Fit a GAT on the training split; keep the best validation epoch.

    Training circuits are merged into one disjoint-union graph. Each batch
    draws a random-walk subgraph from it and takes one Adam step on the mean
    cross-entropy over the subgraph nodes. After the last epoch the
    parameters of the epoch with the highest validation accuracy (earliest on
    ties) are restored. Without a validation split the final parameters are kept.
    """
    train_graphs = dataset.split("train")
    if not train_graphs:
        raise ValueError("dataset has no training graphs")
    val_graphs = dataset.split("val")
    stats = dataset.stats or dataset.fit_stats()
    union = disjoint_union(train_graphs, "train")
    X = stats.transform(union.features)
    y = union.labels
    cell_names = union.cell_names
    if model is None:
        gcfg = GatConfig(in_dim=X.shape[1], hidden=cfg.hidden, heads=cfg.heads,
                         num_classes=len(dataset.class_names), dropout=cfg.dropout,
                         hidden_per_head=cfg.hidden_per_head, last_layer=cfg.last_layer)
        model = GatModel(gcfg, seed=derive_seed(cfg.seed, "init"))
    result = TrainResult(model, stats, list(dataset.class_names), list(cell_names), cfg)
    if cfg.epochs == 0:
        return result

    E_full = attention_edges(union, model.cfg.undirected)
    indptr, nbrs = _neighbor_csr(union)
    roots = min(cfg.roots, union.n)
    walk_rng = np.random.default_rng(derive_seed(cfg.seed, "walk"))
    drop_rng = np.random.default_rng(derive_seed(cfg.seed, "dropout"))
    state = AdamState(lr=cfg.lr)
    if val_graphs:
        vu = disjoint_union(val_graphs, "val")
        E_val, X_val, y_val = attention_edges(vu, model.cfg.undirected), stats.transform(vu.features), vu.labels

    best_acc, best_params = -1.0, None
    with _threads(cfg.single_thread):
        for epoch in range(1, cfg.epochs + 1):
            losses = []
            for _ in range(cfg.batches_per_epoch):
                nodes = random_walk_nodes(indptr, nbrs, union.n, roots, cfg.depth, walk_rng)
                E = induced_edges(E_full, nodes)
                loss, grads = model.loss_and_grads(E, X[nodes], y[nodes], None, True, drop_rng)
                if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                    raise TrainingDiverged(f"non-finite loss/gradient at epoch {epoch} (loss={loss})")
                adam_step(model.params, grads, state)
                losses.append(loss)
            val_acc = _accuracy(model, E_val, X_val, y_val) if val_graphs else float("nan")
            result.history.append({"epoch": epoch, "loss": float(np.mean(losses)), "val_acc": val_acc})
            log.debug("epoch %d loss %.4f val_acc %.4f", epoch, np.mean(losses), val_acc)
            if val_graphs and val_acc > best_acc:
                best_acc, result.best_epoch = val_acc, epoch
                best_params = {k: v.copy() for k, v in model.params.items()}
    if best_params is not None:
        model.params = best_params
    else:
        result.best_epoch = cfg.epochs
    return result


@dataclass
class EvalReport:
    class_names: list[str]
    graph_names: list[str]
    graph_accuracy: list[float]
    graph_nodes: list[int]
    confusion: np.ndarray  # rows: true class, columns: predicted
    normalized_area: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else float("nan")

    @property
    def mean_graph_accuracy(self) -> float:
        return float(np.mean(self.graph_accuracy)) if self.graph_accuracy else float("nan")

    def precision(self) -> np.ndarray:
        col = self.confusion.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(col > 0, np.diag(self.confusion) / np.maximum(col, 1), np.nan)

    def recall(self) -> np.ndarray:
        row = self.confusion.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(row > 0, np.diag(self.confusion) / np.maximum(row, 1), np.nan)

    def to_dict(self) -> dict:
        nan_to_none = lambda xs: [None if np.isnan(x) else float(x) for x in xs]  # noqa: E731
        return {
            "classes": self.class_names,
            "accuracy": self.accuracy,
            "mean_graph_accuracy": self.mean_graph_accuracy,
            "graphs": [
                {"name": n, "accuracy": a, "nodes": k,
                 "normalized_area": self.normalized_area.get(n)}
                for n, a, k in zip(self.graph_names, self.graph_accuracy, self.graph_nodes)
            ],
            "precision": nan_to_none(self.precision()),
            "recall": nan_to_none(self.recall()),
            "confusion": self.confusion.tolist(),
        }

    def area_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["circuit", "normalized_area", "accuracy"])
        for n, a in zip(self.graph_names, self.graph_accuracy):
            area = self.normalized_area.get(n)
            w.writerow([n, "" if area is None else repr(float(area)), repr(a)])
        return buf.getvalue()


def evaluate(model: GatModel, stats: Standardizer, graphs: list[CircuitGraph],
             class_names: list[str] | None = None, normalized_area: dict | None = None,
             single_thread: bool = True) -> EvalReport:
    """Node-level accuracy per graph plus a pooled confusion matrix."""
    C = model.cfg.num_classes
    class_names = class_names or [str(i) for i in range(C)]
    conf = np.zeros((C, C), dtype=np.int64)
    names, accs, sizes = [], [], []
    with _threads(single_thread):
        for g in graphs:
            if g.n and (g.labels < 0).any():
                raise ValueError(f"graph {g.name} has unlabeled nodes")
            if g.n == 0:
                continue
            pred = model.predict(g, stats.transform(g.features))
            np.add.at(conf, (g.labels, pred), 1)
            names.append(g.name)
            accs.append(float(np.mean(pred == g.labels)))
            sizes.append(g.n)
    return EvalReport(list(class_names), names, accs, sizes, conf, dict(normalized_area or {}))


def save_checkpoint(result: TrainResult) -> str:
    return json.dumps(result.checkpoint(), sort_keys=True)


def load_checkpoint(text: str):
    """Return ``(model, stats, class_names, cell_names)`` from checkpoint JSON."""
    data = json.loads(text)
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not an appgnn checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')}")
    model = GatModel.from_dict(data["model"])
    stats = Standardizer.from_dict(data["standardizer"])
    return model, stats, data["classes"], data["library"]
