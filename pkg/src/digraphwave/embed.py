"""
Structural node embeddings from compressed diffusion signatures.

Pipeline per graph orientation: reachability columns for ``k_tau``
timescales in ``[1, R]`` -> per-source thresholding -> empirical
characteristic function sampled at ``t = pi, 2 pi, ..., k_phi pi``.
Optional enhancements append the same core embedding of the transposed
graph and the mean embedding over each node's in/out neighbourhood.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import sparse

from . import matexp
from .errors import ConfigurationError
from .graph import NORMAL, Graph, build_operator, degrees, joint_neighborhood_matrix, transpose

logger = logging.getLogger(__name__)

THRESHOLD_FLOOR = 1e-6
DEFAULT_MEMORY_BUDGET = 256 * 2 ** 20


class ColumnTag(NamedTuple):
    orientation: str  # "normal", "transposed" or "aggregated"
    tau_index: int
    t_index: int
    part: str  # "Re" or "Im"


@dataclass(frozen=True, eq=False)
class DigraphwaveConfig:
    R: int
    k_emb: int
    transpose: bool
    aggregate: bool
    k_tau: int
    k_phi: int
    taus: np.ndarray
    t_samples: np.ndarray
    thresholds: np.ndarray
    order: int = matexp.DEFAULT_ORDER
    batch_size: int = 1024
    precision: str = "double"
    shared_thresholds: bool = False

    @property
    def k_f(self):
        return feature_multiplier(self.transpose, self.aggregate)

    @property
    def dim(self):
        return self.k_f * self.k_tau * self.k_phi

    @property
    def core_dim(self):
        return 2 * self.k_tau * self.k_phi

    def coefficients(self):
        return matexp.taylor_coefficients(self.taus, self.order)

    def echo(self):
        """JSON-friendly summary of the settings (thresholds reduced to a hash)."""
        import hashlib

        return {
            "R": self.R, "k_emb": self.k_emb, "transpose": self.transpose,
            "aggregate": self.aggregate, "k_tau": self.k_tau, "k_phi": self.k_phi,
            "taus": self.taus.tolist(), "order": self.order, "batch_size": self.batch_size,
            "precision": self.precision, "shared_thresholds": self.shared_thresholds,
            "thresholds_sha256": hashlib.sha256(np.ascontiguousarray(self.thresholds).tobytes()).hexdigest(),
        }


def feature_multiplier(transpose_flag, aggregate_flag):
    return 2 * 2 ** int(bool(transpose_flag)) * 2 ** int(bool(aggregate_flag))


def dimensions(k_emb, transpose_flag=True, aggregate_flag=True):
    """``(k_tau, k_phi)`` for a requested embedding dimension.

    ``k_tau`` is the largest integer with ``k_f * k_tau**3 <= k_emb`` (the
    exact floor of the cube root; ``64 ** (1/3)`` is 3.999... in floating
    point) and ``k_phi = floor(k_emb / k_f / k_tau)``, both at least 1.
    """
    k_f = feature_multiplier(transpose_flag, aggregate_flag)
    if k_emb < k_f:
        raise ConfigurationError(f"k_emb={k_emb} is smaller than the feature multiplier k_f={k_f}")
    k_tau = 1
    while k_f * (k_tau + 1) ** 3 <= k_emb:
        k_tau += 1
    k_phi = max(1, k_emb // (k_f * k_tau))
    return k_tau, k_phi


def node_thresholds(out_degrees, R):
    """Per-source thresholds for dropping small reachability values.

    ``max(min(e^-R, R e^-R / d_j, e^-1 / (d_j beta_j^(R-1) R!)), 1e-6)`` where
    ``d_j`` is the unweighted out-degree and ``beta_j`` the mean out-degree
    of all other nodes. Nodes without out-edges get ``max(e^-R, 1e-6)``.
    """
    if R < 1:
        raise ConfigurationError("R must be >= 1")
    d = np.asarray(out_degrees, dtype=np.float64)
    n = d.size
    if n > 1:
        beta = (d.sum() - d) / (n - 1)
    else:
        beta = np.ones(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.full(n, math.exp(-R))
        t2 = np.where(d > 0, R * math.exp(-R) / d, np.inf)
        denom = d * beta ** (R - 1) * math.factorial(R)
        t3 = np.where(denom > 0, math.exp(-1) / denom, np.inf)
    theta = np.minimum(np.minimum(t1, t2), t3)
    return np.maximum(theta, THRESHOLD_FLOOR)


def set_hyperparameters(g: Graph, R=3, k_emb=128, transpose=True, aggregate=True,
                        order=matexp.DEFAULT_ORDER, batch_size=None,
                        memory_budget=DEFAULT_MEMORY_BUDGET, precision="double",
                        shared_thresholds=False, target_error=1e-6) -> DigraphwaveConfig:
    """Derive every embedding setting from the graph, ``R`` and ``k_emb``.

    Parameters
    ----------
    g : Graph
    R : int
        Radius of the largest neighbourhood; timescales span ``[1, R]``.
    k_emb : int
        Requested dimension; the actual dimension ``k_f*k_tau*k_phi`` never exceeds it.
    transpose, aggregate : bool
        Enhancement flags.
    order : int or "auto"
        Taylor order; ``"auto"`` picks the smallest order meeting ``target_error``.
    batch_size : int, optional
        Columns per batch. Derived from ``memory_budget`` when omitted.
    """
    if int(R) != R or R < 1:
        raise ConfigurationError("R must be a positive integer")
    if precision not in matexp.UNIT_ROUNDOFF:
        raise ConfigurationError(f"unknown precision {precision!r}")
    R = int(R)
    k_tau, k_phi = dimensions(k_emb, transpose, aggregate)
    taus = np.linspace(1.0, float(R), k_tau)
    t_samples = np.linspace(math.pi, k_phi * math.pi, k_phi)
    thresholds = node_thresholds(degrees(g).out_unweighted, R)
    if order == "auto":
        order = matexp.select_order(float(R), max(g.n, 1), "double", target_error)
    order = int(order)
    if order < 1:
        raise ConfigurationError("Taylor order must be >= 1")
    if batch_size is None:
        per_column = 8 * max(g.n, 1) * (k_tau + 2)
        batch_size = int(max(1, min(max(g.n, 1), memory_budget // per_column)))
    if batch_size < 1:
        raise ConfigurationError("batch size must be >= 1")
    for arr in (taus, t_samples, thresholds):
        arr.setflags(write=False)
    return DigraphwaveConfig(R, int(k_emb), bool(transpose), bool(aggregate), k_tau, k_phi,
                             taus, t_samples, thresholds, order, int(batch_size), precision,
                             bool(shared_thresholds))


# --- thresholding and ECF -------------------------------------------------------

@dataclass
class ThresholdedBatch:
    node_ids: np.ndarray
    columns: list  # one CSC (n, n_batch) matrix per timescale
    retained_fraction: float

    @property
    def n(self):
        return self.columns[0].shape[0] if self.columns else 0


def apply_threshold(batch: matexp.ReachabilityBatch, thresholds) -> ThresholdedBatch:
    """Keep ``Psi[i, j]`` only where it is strictly greater than ``thresholds[j]``."""
    theta = np.asarray(thresholds)[batch.node_ids]
    cols = []
    kept = 0
    for s in range(batch.psi.shape[0]):
        dense = batch.psi[s]
        mask = dense > theta[None, :]
        kept += int(mask.sum())
        cols.append(sparse.csc_matrix(np.where(mask, dense, 0.0)))
    total = batch.psi.size
    return ThresholdedBatch(batch.node_ids, cols, kept / total if total else 0.0)


def ecf_compress(thr: ThresholdedBatch, t_samples, n=None):
    """Sample the empirical characteristic function of each column.

    Zero entries contribute ``cos 0 = 1`` to the real part through the zero
    count. Output columns run timescale-major, then sample point, with real
    and imaginary parts interleaved.
    """
    t_samples = np.asarray(t_samples, dtype=np.float64)
    n = thr.n if n is None else n
    k_phi = t_samples.size
    nb = thr.node_ids.size
    out = np.empty((nb, 2 * k_phi * len(thr.columns)))
    for s, col in enumerate(thr.columns):
        col = col.tocsc()
        for b in range(nb):
            vals = col.data[col.indptr[b]:col.indptr[b + 1]]
            vals = vals[vals != 0.0]
            zeros = n - vals.size
            phase = np.outer(t_samples, vals)
            base = s * 2 * k_phi
            out[b, base:base + 2 * k_phi:2] = (zeros + np.cos(phase).sum(axis=1)) / n
            out[b, base + 1:base + 2 * k_phi:2] = np.sin(phase).sum(axis=1) / n
    return out


# --- embedding container ------------------------------------------------------------

@dataclass(eq=False)
class EmbeddingMatrix:
    data: np.ndarray
    column_tags: list
    mean: np.ndarray = None
    std: np.ndarray = None
    config: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.data.shape

    def unstandardized(self):
        if self.mean is None:
            return self.data
        return self.data * self.std + self.mean


def core_tags(orientation, k_tau, k_phi):
    return [ColumnTag(orientation, s, q, part)
            for s in range(k_tau) for q in range(k_phi) for part in ("Re", "Im")]


# --- orchestration ------------------------------------------------------------------

def _batches(n, size):
    for start in range(0, n, size):
        yield start, min(n, start + size)


def digraphwave_core(g: Graph, config: DigraphwaveConfig, thresholds=None, engine="fused",
                     threads=1, batch_times=None, nodes=None) -> EmbeddingMatrix:
    """Core embeddings (one orientation, no enhancements).

    ``engine="fused"`` runs the compiled per-column kernel; ``"dense"``
    runs :func:`matexp.expm_batch`, :func:`apply_threshold` and
    :func:`ecf_compress` on dense batches. Both give the same values up to
    rounding, and each is independent of batch size and thread count.
    """
    theta = config.thresholds if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    if theta.shape != (g.n,):
        raise ConfigurationError("threshold vector does not match the graph size")
    coeffs = config.coefficients()
    nodes = np.arange(g.n, dtype=np.int64) if nodes is None else np.asarray(nodes, dtype=np.int64)
    out = np.empty((nodes.size, config.core_dim))
    if engine == "fused":
        _run_fused(g, coeffs, theta, config, nodes, out, threads, batch_times)
    elif engine == "dense":
        op = build_operator(g)
        ws = matexp.BatchWorkspace()
        for lo, hi in _batches(nodes.size, config.batch_size):
            t0 = time.perf_counter()
            psi = matexp.expm_batch(op, nodes[lo:hi], coeffs, workspace=ws)
            out[lo:hi] = ecf_compress(apply_threshold(psi, theta), config.t_samples, g.n)
            if batch_times is not None:
                batch_times.append((hi - lo, time.perf_counter() - t0))
    else:
        raise ConfigurationError(f"unknown engine {engine!r}")
    return EmbeddingMatrix(out, core_tags(g.orientation, config.k_tau, config.k_phi))


def _run_fused(g, coeffs, theta, config, nodes, out, threads, batch_times):
    from ._kernels import core_rows, workspace

    op = build_operator(g)
    # alpha.data follows the graph's edge order because build_operator reuses indptr/indices
    alpha = np.ascontiguousarray(op.alpha.data)
    sink = np.ascontiguousarray(op.sink_mask)
    a = np.ascontiguousarray(coeffs.coeffs)
    theta = np.ascontiguousarray(theta)
    t_samples = np.ascontiguousarray(config.t_samples)
    threads = max(1, int(threads or 1))
    spaces = [workspace(g.n, a.shape[0]) for _ in range(threads)]

    def run(w, lo, hi):
        core_rows(g.indptr, g.indices, alpha, sink, nodes[lo:hi], a, theta, t_samples, out[lo:hi],
                  *spaces[w])

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for lo, hi in _batches(nodes.size, config.batch_size):
            t0 = time.perf_counter()
            if pool is None:
                run(0, lo, hi)
            else:
                step = -(-(hi - lo) // threads)
                futures = [pool.submit(run, w, b, min(hi, b + step))
                           for w, b in enumerate(range(lo, hi, step))]
                for f in futures:
                    f.result()
            if batch_times is not None:
                batch_times.append((hi - lo, time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown()


def aggregate(g: Graph, data):
    """Mean of the rows of ``data`` over each node's joint in/out neighbourhood (zeros if none)."""
    nbr = joint_neighborhood_matrix(g)
    counts = np.asarray(nbr.sum(axis=1)).ravel()
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    return sparse.diags(inv) @ (nbr @ data)


def digraphwave(g: Graph, config: DigraphwaveConfig, engine="fused", threads=1,
                batch_times=None) -> EmbeddingMatrix:
    """Full embedding: core, optional transposed core, optional neighbourhood mean."""
    core = digraphwave_core(g, config, engine=engine, threads=threads, batch_times=batch_times)
    data, tags = core.data, list(core.column_tags)
    if config.transpose:
        gt = transpose(g)
        theta_t = config.thresholds if config.shared_thresholds \
            else node_thresholds(degrees(gt).out_unweighted, config.R)
        core_t = digraphwave_core(gt, config, thresholds=theta_t, engine=engine, threads=threads,
                                  batch_times=batch_times)
        data = np.hstack([data, core_t.data])
        tags += core_t.column_tags
    if config.aggregate:
        agg = aggregate(g, data)
        tags += [t._replace(orientation="aggregated") for t in tags]
        data = np.hstack([data, agg])
    if config.precision == "single":
        data = data.astype(np.float32)
    return EmbeddingMatrix(np.ascontiguousarray(data), tags, config=config.echo())


def embed(g: Graph, R=3, k_emb=128, transpose=True, aggregate=True, standardized=False,
          engine="fused", threads=1, **kwargs) -> EmbeddingMatrix:
    """Convenience wrapper: hyperparameters + :func:`digraphwave` (+ optional standardization)."""
    config = set_hyperparameters(g, R, k_emb, transpose, aggregate, **kwargs)
    emb = digraphwave(g, config, engine=engine, threads=threads)
    return standardize(emb) if standardized else emb


def standardize(emb: EmbeddingMatrix) -> EmbeddingMatrix:
    """Zero-mean, unit-variance columns (population std); constant columns become zeros.

    The column means and standard deviations are kept on the result, so
    :meth:`EmbeddingMatrix.unstandardized` recovers the input.
    """
    data = np.asarray(emb.data, dtype=np.float64)
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    z = (data - mean) / scale
    z[:, std == 0] = 0.0
    return replace(emb, data=z.astype(emb.data.dtype, copy=False), mean=mean, std=std)
