"""Two-layer multi-head graph attention network in plain numpy.

Forward and backward passes are written out by hand; the gradient tests in
``tests/test_gat.py`` check them against central finite differences.

Attention runs over the undirected neighbourhood of each node plus a self
loop, so isolated nodes attend only to themselves. Edge arrays are kept
sorted by target node which lets segment reductions use ``reduceat`` and the
per-head aggregation use CSR matrices directly.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from .graph import CircuitGraph

PARAM_NAMES = ("W1", "as1", "ad1", "W2", "as2", "ad2", "C", "b")


@dataclass
class GatConfig:
    in_dim: int
    hidden: int = 256
    heads: int = 8
    num_classes: int = 5
    dropout: float = 0.1
    negative_slope: float = 0.2
    hidden_per_head: bool = False  # True: every head gets `hidden` dims
    last_layer: str = "concat"  # or "mean"
    undirected: bool = True

    @property
    def head_dim(self) -> int:
        if self.hidden_per_head:
            return self.hidden
        if self.hidden % self.heads:
            raise ValueError("hidden must be divisible by heads")
        return self.hidden // self.heads

    @property
    def embed_dim(self) -> int:
        if self.last_layer == "mean":
            return self.head_dim
        return self.head_dim * self.heads


@dataclass
class AttentionEdges:
    """Edges ``src -> dst`` (self loops included) sorted by ``dst``."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    indptr: np.ndarray

    @property
    def starts(self) -> np.ndarray:
        return self.indptr[:-1]


def attention_edges(graph: CircuitGraph, undirected: bool = True) -> AttentionEdges:
    n = graph.n
    if undirected:
        src, dst = graph.undirected_edges()
    else:
        e = np.array([(u, v) for u, v in graph.edges if u != v], dtype=np.int64).reshape(-1, 2)
        src, dst = e[:, 0], e[:, 1]
    loops = np.arange(n, dtype=np.int64)
    src = np.concatenate([src, loops])
    dst = np.concatenate([dst, loops])
    order = np.lexsort((src, dst))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=indptr[1:])
    return AttentionEdges(n, src, dst, indptr)


def _as_edges(graph, undirected=True) -> AttentionEdges:
    if isinstance(graph, AttentionEdges):
        return graph
    return attention_edges(graph, undirected)


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: GatConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    K, dh = cfg.heads, cfg.head_dim
    d1 = K * dh
    return {
        "W1": _glorot(rng, (cfg.in_dim, d1), cfg.in_dim, dh),
        "as1": _glorot(rng, (K, dh), 2 * dh, 1),
        "ad1": _glorot(rng, (K, dh), 2 * dh, 1),
        "W2": _glorot(rng, (d1, d1), d1, dh),
        "as2": _glorot(rng, (K, dh), 2 * dh, 1),
        "ad2": _glorot(rng, (K, dh), 2 * dh, 1),
        "C": _glorot(rng, (cfg.embed_dim, cfg.num_classes), cfg.embed_dim, cfg.num_classes),
        "b": np.zeros(cfg.num_classes),
    }


def _leaky(x, slope):
    return np.where(x > 0, x, slope * x)


def _segment_softmax(scores, E: AttentionEdges):
    mx = np.maximum.reduceat(scores, E.starts, axis=0)
    ex = np.exp(scores - mx[E.dst])
    den = np.add.reduceat(ex, E.starts, axis=0)
    return ex / den[E.dst]


def attention_coefficients(W, a_src, a_dst, graph, H, negative_slope=0.2):
    """Softmax-normalised attention per edge and head, shape ``(edges, heads)``.

    ``alpha[e, k]`` weights source ``E.src[e]`` in the aggregation of target
    ``E.dst[e]``. A 1-D ``a_src``/``a_dst`` is treated as a single head.
    """
    E = _as_edges(graph)
    a_src = np.atleast_2d(a_src)
    a_dst = np.atleast_2d(a_dst)
    K, dh = a_src.shape
    Z = (H @ W).reshape(E.n, K, dh)
    e = np.einsum("nkf,kf->nk", Z, a_src)[E.src] + np.einsum("nkf,kf->nk", Z, a_dst)[E.dst]
    return _segment_softmax(_leaky(e, negative_slope), E), E


def _csr(weights, E: AttentionEdges):
    return sp.csr_matrix((weights, E.src, E.indptr), shape=(E.n, E.n))


def layer_forward(H, W, a_src, a_dst, E: AttentionEdges, slope=0.2, combine="concat"):
    n = E.n
    K, dh = a_src.shape
    Z = (H @ W).reshape(n, K, dh)
    ss = np.einsum("nkf,kf->nk", Z, a_src)
    sd = np.einsum("nkf,kf->nk", Z, a_dst)
    e = ss[E.src] + sd[E.dst]
    alpha = _segment_softmax(_leaky(e, slope), E)
    M = np.empty_like(Z)
    for k in range(K):
        M[:, k, :] = _csr(alpha[:, k], E) @ Z[:, k, :]
    pre = M.reshape(n, K * dh) if combine == "concat" else M.mean(axis=1)
    out = np.maximum(pre, 0.0)
    cache = dict(H=H, Z=Z, e=e, alpha=alpha, pre=pre)
    return out, cache


def layer_backward(dout, cache, W, a_src, a_dst, E: AttentionEdges, slope=0.2, combine="concat"):
    H, Z, e, alpha, pre = cache["H"], cache["Z"], cache["e"], cache["alpha"], cache["pre"]
    n = E.n
    K, dh = a_src.shape
    dpre = dout * (pre > 0)
    if combine == "concat":
        dM = dpre.reshape(n, K, dh)
    else:
        dM = np.repeat(dpre[:, None, :] / K, K, axis=1)
    dZ = np.empty_like(Z)
    dalpha = np.empty_like(alpha)
    for k in range(K):
        dZ[:, k, :] = _csr(alpha[:, k], E).T @ dM[:, k, :]
        dalpha[:, k] = np.einsum("ef,ef->e", dM[E.dst, k, :], Z[E.src, k, :])
    s = np.add.reduceat(alpha * dalpha, E.starts, axis=0)
    dscore = alpha * (dalpha - s[E.dst])
    de = dscore * np.where(e > 0, 1.0, slope)
    dss = np.stack([np.bincount(E.src, weights=de[:, k], minlength=n) for k in range(K)], axis=1)
    dsd = np.add.reduceat(de, E.starts, axis=0)
    da_src = np.einsum("nk,nkf->kf", dss, Z)
    da_dst = np.einsum("nk,nkf->kf", dsd, Z)
    dZ += dss[:, :, None] * a_src[None] + dsd[:, :, None] * a_dst[None]
    dZf = dZ.reshape(n, K * dh)
    return dZf @ W.T, H.T @ dZf, da_src, da_dst


def gat_layer_forward(params, graph, H, negative_slope=0.2, combine="concat"):
    """One attention layer. ``params`` is ``(W, a_src, a_dst)``."""
    W, a_src, a_dst = params
    if H.shape[1] != W.shape[0]:
        raise ValueError(f"input dim {H.shape[1]} does not match weights {W.shape[0]}")
    E = _as_edges(graph)
    return layer_forward(H, W, np.atleast_2d(a_src), np.atleast_2d(a_dst), E,
                         negative_slope, combine)[0]


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def _dropout_mask(rng, shape, rate):
    if rate <= 0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


@dataclass
class GatModel:
    cfg: GatConfig
    params: dict[str, np.ndarray] = field(default=None)
    seed: int = 0

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.cfg, self.seed)

    def copy(self) -> "GatModel":
        return GatModel(copy.deepcopy(self.cfg), {k: v.copy() for k, v in self.params.items()}, self.seed)

    def edges(self, graph) -> AttentionEdges:
        return _as_edges(graph, self.cfg.undirected)

    def forward(self, graph, X, train_mode=False, rng=None):
        """Return ``(logits, probabilities, cache)``.

        Dropout is applied to each layer input when ``train_mode`` is set,
        drawing masks from ``rng``.
        """
        cfg, p = self.cfg, self.params
        if X.shape[1] != cfg.in_dim:
            raise ValueError(f"feature dim {X.shape[1]} != model input dim {cfg.in_dim}")
        E = self.edges(graph)
        if E.n != X.shape[0]:
            raise ValueError("feature rows do not match graph nodes")
        if E.n == 0:
            raise ValueError("cannot run the model on an empty graph")
        slope = cfg.negative_slope
        drop = train_mode and cfg.dropout > 0
        if drop and rng is None:
            raise ValueError("train_mode dropout needs an rng")
        m0 = _dropout_mask(rng, X.shape, cfg.dropout) if drop else None
        X0 = X * m0 if m0 is not None else X
        H1, c1 = layer_forward(X0, p["W1"], p["as1"], p["ad1"], E, slope, "concat")
        m1 = _dropout_mask(rng, H1.shape, cfg.dropout) if drop else None
        H1d = H1 * m1 if m1 is not None else H1
        H2, c2 = layer_forward(H1d, p["W2"], p["as2"], p["ad2"], E, slope, cfg.last_layer)
        logits = H2 @ p["C"] + p["b"]
        probs = softmax(logits)
        cache = dict(E=E, c1=c1, c2=c2, m0=m0, m1=m1, H2=H2, probs=probs)
        return logits, probs, cache

    def predict(self, graph, X) -> np.ndarray:
        return self.forward(graph, X)[1].argmax(axis=1)

    def loss_and_grads(self, graph, X, labels, mask=None, train_mode=False, rng=None):
        _, probs, cache = self.forward(graph, X, train_mode, rng)
        loss = cross_entropy_loss(probs, labels, mask)
        return loss, self._backward(cache, labels, mask)

    def _backward(self, cache, labels, mask):
        cfg, p = self.cfg, self.params
        E, probs = cache["E"], cache["probs"]
        idx = _mask_indices(mask, len(labels))
        dlogits = np.zeros_like(probs)
        np.add.at(dlogits, idx, probs[idx])
        np.subtract.at(dlogits, (idx, labels[idx]), 1.0)
        dlogits /= len(idx)
        g = {"C": cache["H2"].T @ dlogits, "b": dlogits.sum(axis=0)}
        dH2 = dlogits @ p["C"].T
        dH1d, g["W2"], g["as2"], g["ad2"] = layer_backward(
            dH2, cache["c2"], p["W2"], p["as2"], p["ad2"], E, cfg.negative_slope, cfg.last_layer)
        dH1 = dH1d * cache["m1"] if cache["m1"] is not None else dH1d
        _, g["W1"], g["as1"], g["ad1"] = layer_backward(
            dH1, cache["c1"], p["W1"], p["as1"], p["ad1"], E, cfg.negative_slope, "concat")
        return g

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.cfg),
            "seed": self.seed,
            "params": {k: self.params[k].tolist() for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GatModel":
        params = {k: np.array(v, dtype=float) for k, v in d["params"].items()}
        return cls(GatConfig(**d["config"]), params, d.get("seed", 0))


def model_forward(model: GatModel, graph, X, train_mode=False, rng=None):
    logits, probs, _ = model.forward(graph, X, train_mode, rng)
    return logits, probs


def _mask_indices(mask, n):
    if mask is None:
        idx = np.arange(n)
    else:
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.int64)
    if len(idx) == 0:
        raise ValueError("empty node mask")
    return idx


def cross_entropy_loss(probs, labels, mask=None) -> float:
    """Mean negative log-probability of the true class over masked nodes."""
    idx = _mask_indices(mask, len(labels))
    p = probs[idx, labels[idx]]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def backward(model: GatModel, graph, X, labels, mask=None, train_mode=False, rng=None):
    """Analytic gradients of the mean cross-entropy w.r.t. every parameter."""
    return model.loss_and_grads(graph, X, labels, mask, train_mode, rng)[1]


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
            "step": self.step,
            "m": {k: v.tolist() for k, v in sorted(self.m.items())},
            "v": {k: v.tolist() for k, v in sorted(self.v.items())},
        }


def adam_step(params: dict, grads: dict, state: AdamState):
    """Bias-corrected Adam update, in place. Returns ``(params, state)``."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for k, g in grads.items():
        if params[k].shape != g.shape:
            raise ValueError(f"gradient shape mismatch for {k}")
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = state.m[k] / (1 - b1 ** t)
        v_hat = state.v[k] / (1 - b2 ** t)
        params[k] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
