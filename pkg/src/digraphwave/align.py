"""
Network alignment by greedy nearest-neighbour matching of embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .embed import EmbeddingMatrix, digraphwave, set_hyperparameters, standardize
from .errors import ConfigurationError
from .graph import Graph, permute

_CHUNK_ELEMS = 1 << 24


def _sqdist(Q, X):
    diff = X[None, :, :] - Q[:, None, :]
    return (diff * diff).sum(axis=-1)


def greedy_match(emb1, emb2, k=1, method="auto"):
    """Exact ``k`` nearest rows of ``emb1`` for every row of ``emb2``.

    Distances are Euclidean and ties go to the lower ``emb1`` row index.
    ``method="kdtree"`` narrows candidates with a KD-tree and then ranks
    them exactly like the exhaustive search, so both return the same lists.

    Returns
    -------
    (n2, min(k, n1)) int64 array of ``emb1`` row indices, nearest first.
    """
    X = np.asarray(emb1, dtype=np.float64)
    Q = np.asarray(emb2, dtype=np.float64)
    if X.ndim != 2 or Q.ndim != 2 or X.shape[1] != Q.shape[1]:
        raise ValueError(f"embedding dimensions differ: {X.shape} vs {Q.shape}")
    k = min(int(k), X.shape[0])
    if k < 1:
        raise ValueError("k must be >= 1 and emb1 non-empty")
    if method == "auto":
        method = "kdtree" if X.shape[1] <= 16 and X.shape[0] > 2000 else "exhaustive"
    if method == "exhaustive":
        return _match_exhaustive(X, Q, k)
    if method == "kdtree":
        return _match_kdtree(X, Q, k)
    raise ValueError(f"unknown method {method!r}")


def _match_exhaustive(X, Q, k):
    out = np.empty((Q.shape[0], k), dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // max(1, X.shape[0] * X.shape[1]))
    for lo in range(0, Q.shape[0], step):
        d = _sqdist(Q[lo:lo + step], X)
        out[lo:lo + step] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def _match_kdtree(X, Q, k):
    tree = cKDTree(X)
    dk, _ = tree.query(Q, k=k)
    dk = np.asarray(dk).reshape(Q.shape[0], -1)[:, -1]
    out = np.empty((Q.shape[0], k), dtype=np.int64)
    for i in range(Q.shape[0]):
        r = dk[i] * (1 + 1e-9) + 1e-12
        cand = np.sort(np.asarray(tree.query_ball_point(Q[i], r), dtype=np.int64))
        d = _sqdist(Q[i:i + 1], X[cand])[0]
        out[i] = cand[np.argsort(d, kind="stable")[:k]]
    return out


def topk_accuracy(candidates, ground_truth, k=None):
    """Fraction of query rows whose first ``k`` candidates contain the true match."""
    cands = np.asarray(candidates)
    truth = np.asarray(ground_truth)
    if cands.shape[0] != truth.shape[0]:
        raise ValueError("one ground-truth entry per query row is required")
    if cands.shape[0] == 0:
        return 0.0
    k = cands.shape[1] if k is None else min(int(k), cands.shape[1])
    return float(np.mean(np.any(cands[:, :k] == truth[:, None], axis=1)))


def add_noise_edges(g: Graph, p, seed=None, weight_mode="unit") -> Graph:
    """Insert ``floor(p * m)`` new directed edges (no self-loops, no duplicates).

    ``weight_mode="empirical"`` draws each new weight uniformly from the
    existing edge weights; ``"unit"`` uses weight 1.
    """
    if p < 0:
        raise ConfigurationError("noise fraction must be nonnegative")
    if weight_mode not in ("unit", "empirical"):
        raise ConfigurationError(f"unknown weight mode {weight_mode!r}")
    count = int(np.floor(p * g.m))
    if count == 0:
        return g
    if g.m + count > g.n * (g.n - 1):
        raise ConfigurationError("not enough free node pairs for the requested noise edges")
    rng = np.random.default_rng(seed)
    src, dst, w = g.edges()
    existing = set(zip(src.tolist(), dst.tolist()))
    new = []
    while len(new) < count:
        a, b = (int(x) for x in rng.integers(g.n, size=2))
        if a == b or (a, b) in existing:
            continue
        existing.add((a, b))
        new.append((a, b))
    new = np.array(new, dtype=np.int64)
    if weight_mode == "empirical" and g.m:
        nw = rng.choice(w, size=count)
    else:
        nw = np.ones(count)
    return Graph.from_edges(np.concatenate([src, new[:, 0]]), np.concatenate([dst, new[:, 1]]),
                            np.concatenate([w, nw]), n=g.n, orientation=g.orientation)


def joint_standardize(emb1, emb2):
    """Standardize two embeddings with the statistics of their row concatenation."""
    d1 = emb1.data if isinstance(emb1, EmbeddingMatrix) else np.asarray(emb1)
    d2 = emb2.data if isinstance(emb2, EmbeddingMatrix) else np.asarray(emb2)
    z = standardize(EmbeddingMatrix(np.vstack([d1, d2]).astype(np.float64), [])).data
    return z[:d1.shape[0]], z[d1.shape[0]:]


def align_embeddings(emb1, emb2, ground_truth, ks=(1, 10), method="auto"):
    """Top-k accuracies (dict ``k -> accuracy``) for matching ``emb2`` rows into ``emb1``."""
    z1, z2 = joint_standardize(emb1, emb2)
    cands = greedy_match(z1, z2, k=max(ks), method=method)
    return {k: topk_accuracy(cands, ground_truth, k) for k in ks}


@dataclass
class AlignmentResult:
    p: float
    seed: int
    accuracy: dict

    def csv_row(self, ks):
        return [self.seed, self.p] + [self.accuracy[k] for k in ks]


def permuted_self_alignment(g: Graph, p=0.0, seed=0, ks=(1, 10), R=3, k_emb=128,
                            transpose=True, aggregate=True, engine="fused", threads=1,
                            weight_mode="unit", method="auto") -> AlignmentResult:
    """Align ``g`` with a randomly relabelled copy, after adding noise to each side.

    Each side receives ``floor(p * m)`` noise edges after the relabelling,
    drawn independently.
    """
    ss = np.random.SeedSequence(seed)
    s_perm, s1, s2 = (np.random.default_rng(c) for c in ss.spawn(3))
    perm = s_perm.permutation(g.n)
    g1 = add_noise_edges(g, p, s1, weight_mode)
    g2 = add_noise_edges(permute(g, perm), p, s2, weight_mode)
    embs = []
    for h in (g1, g2):
        cfg = set_hyperparameters(h, R=R, k_emb=k_emb, transpose=transpose, aggregate=aggregate)
        embs.append(digraphwave(h, cfg, engine=engine, threads=threads))
    truth = np.argsort(perm)  # node perm[i] of the copy is node i of the original
    acc = align_embeddings(embs[0], embs[1], truth, ks, method)
    return AlignmentResult(float(p), int(seed), acc)
