"""
Directed graph container and the out-degree normalized diffusion operator.

Edges are stored grouped by source node (CSR over sources), which is the
same memory layout as the column-compressed weighted adjacency matrix
``A`` with ``A[i, j] = w(j -> i)``. Diffusion pushes heat along out-edges,
so the operator's sparse products stream over contiguous memory.
"""

from __future__ import annotations

import io
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import GraphFormatError, GraphValidationError

logger = logging.getLogger(__name__)

NORMAL = "normal"
TRANSPOSED = "transposed"

_CACHE_MAGIC = b"DGWG"
_CACHE_VERSION = 1


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable sparse directed weighted graph.

    Attributes
    ----------
    n : int
        Number of nodes; node ids are ``0 .. n-1``.
    indptr : (n+1,) int64 array
        Out-edges of node ``j`` are ``indices[indptr[j]:indptr[j+1]]``.
    indices : (m,) int64 array
        Edge targets, sorted within each source's slice.
    weights : (m,) float64 array
        Strictly positive edge weights (all 1.0 for unweighted graphs).
    orientation : {"normal", "transposed"}
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    orientation: str = NORMAL
    self_loops_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.weights):
            arr.setflags(write=False)

    @property
    def m(self):
        return int(self.indices.shape[0])

    @classmethod
    def from_edges(cls, src, dst, weights=None, n=None, orientation=NORMAL, merge="sum"):
        """Build a graph from parallel edge arrays.

        Self-loops are dropped (the count is kept in ``self_loops_dropped``).
        Duplicate edges are merged: ``merge="sum"`` adds their weights,
        ``merge="one"`` collapses them to a single unit-weight edge.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise GraphValidationError("source and target arrays differ in length")
        if weights is None:
            w = np.ones(src.shape[0], dtype=np.float64)
        else:
            w = np.asarray(weights, dtype=np.float64).ravel()
            if w.shape != src.shape:
                raise GraphValidationError("weight array length differs from edge count")
        if src.size and (src.min() < 0 or dst.min() < 0):
            raise GraphValidationError("negative node index")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise GraphValidationError("edge weights must be finite and strictly positive")
        max_id = int(max(src.max(initial=-1), dst.max(initial=-1)))
        if n is None:
            n = max_id + 1
        elif max_id >= n:
            raise GraphValidationError(f"node index {max_id} out of range for n={n}")
        n = int(n)

        loops = src == dst
        n_loops = int(loops.sum())
        if n_loops:
            logger.warning("dropped %d self-loop(s)", n_loops)
            keep = ~loops
            src, dst, w = src[keep], dst[keep], w[keep]

        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        if src.size:
            first = np.ones(src.size, dtype=bool)
            first[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
            if not first.all():
                groups = np.cumsum(first) - 1
                if merge == "sum":
                    w = np.bincount(groups, weights=w)
                elif merge == "one":
                    w = np.ones(int(first.sum()), dtype=np.float64)
                else:
                    raise ValueError(f"unknown merge mode {merge!r}")
                src, dst = src[first], dst[first]

        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst.copy(), np.ascontiguousarray(w, dtype=np.float64),
                   orientation, n_loops)

    def edges(self):
        """Return ``(src, dst, weight)`` arrays in storage order."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        return src, self.indices.copy(), self.weights.copy()

    def out_neighbors(self, j):
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    def adjacency(self):
        """Weighted adjacency ``A`` (CSC) with ``A[i, j] = w(j -> i)``."""
        return sparse.csc_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n))

    def is_weighted(self):
        return bool(np.any(self.weights != 1.0))

    def structurally_equal(self, other):
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.orientation == other.orientation and self.structurally_equal(other)

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, orientation={self.orientation!r})"


@dataclass(frozen=True)
class DegreeVectors:
    out_weighted: np.ndarray
    out_unweighted: np.ndarray
    in_weighted: np.ndarray
    in_unweighted: np.ndarray


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """Out-degree normalized diffusion operator of a graph.

    ``alpha`` holds the random-walk transition probabilities
    ``alpha[i, j] = w(j -> i) / D_jj`` in CSC form; ``sink_mask[j]`` is true
    for nodes without out-edges, whose columns in ``alpha`` are empty and
    whose Laplacian diagonal entry is zero.
    """

    alpha: sparse.csc_matrix
    sink_mask: np.ndarray
    n: int

    def apply(self, x, out=None):
        """Return ``(L - I) x`` for a vector or an ``(n, b)`` block.

        With ``L = I* - alpha`` this is ``-alpha x - sink_mask * x``.
        """
        y = self.alpha @ x
        if out is None:
            out = np.empty_like(y)
        np.negative(y, out=out)
        if x.ndim == 1:
            out[self.sink_mask] -= x[self.sink_mask]
        else:
            out[self.sink_mask, :] -= x[self.sink_mask, :]
        return out

    def laplacian(self):
        """Sparse ``L = I* - alpha`` (CSC)."""
        diag = sparse.diags((~self.sink_mask).astype(np.float64))
        return (diag - self.alpha).tocsc()

    def transition(self):
        """Column-stochastic ``P = I - L = alpha + diag(sink_mask)``."""
        diag = sparse.diags(self.sink_mask.astype(np.float64))
        return (self.alpha + diag).tocsc()


def transpose(g: Graph) -> Graph:
    """Reverse every edge direction; the orientation tag flips."""
    src, dst, w = g.edges()
    flipped = TRANSPOSED if g.orientation == NORMAL else NORMAL
    return Graph.from_edges(dst, src, w, n=g.n, orientation=flipped)


def degrees(g: Graph) -> DegreeVectors:
    src, dst, w = g.edges()
    out_unw = np.diff(g.indptr).astype(np.int64)
    out_w = np.bincount(src, weights=w, minlength=g.n)
    in_unw = np.bincount(dst, minlength=g.n).astype(np.int64)
    in_w = np.bincount(dst, weights=w, minlength=g.n)
    return DegreeVectors(out_w, out_unw, in_w, in_unw)


def build_operator(g: Graph) -> DiffusionOperator:
    counts = np.diff(g.indptr)
    src = np.repeat(np.arange(g.n), counts)
    out_w = np.bincount(src, weights=g.weights, minlength=g.n)
    sink = counts == 0
    norm = g.weights / np.repeat(out_w, counts)
    alpha = sparse.csc_matrix((norm, g.indices.copy(), g.indptr.copy()), shape=(g.n, g.n))
    return DiffusionOperator(alpha, sink, g.n)


def joint_neighborhood_matrix(g: Graph):
    """Binary CSR matrix ``N`` with ``N[j, k] = 1`` iff ``k`` is an in- or out-neighbour of ``j``."""
    src, dst, _ = g.edges()
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    mat = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(g.n, g.n))
    mat.data[:] = 1.0
    mat.sum_duplicates()
    mat.data[:] = 1.0
    return mat


def permute(g: Graph, perm) -> Graph:
    """Relabel node ``i`` as ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    src, dst, w = g.edges()
    return Graph.from_edges(perm[src], perm[dst], w, n=g.n, orientation=g.orientation)


# --- edge-list text format -------------------------------------------------

def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8"), False


def load_edge_list(source, weighted=False, n=None) -> Graph:
    """Parse ``src<TAB>dst[<TAB>weight]`` lines into a :class:`Graph`.

    ``source`` may be a path, raw bytes, or a text/binary stream. Lines
    starting with ``#`` and blank lines are skipped. When ``weighted`` is
    false a third column is ignored and duplicate edges collapse to one.
    """
    fh, close = _open_text(source)
    src, dst, wts = [], [], []
    try:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"expected 2 or 3 fields, got {len(parts)}", lineno)
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"non-integer node id in {s!r}", lineno) from None
            if a < 0 or b < 0:
                raise GraphFormatError("node ids must be nonnegative", lineno)
            w = 1.0
            if weighted and len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(f"bad weight {parts[2]!r}", lineno) from None
                if not w > 0 or not np.isfinite(w):
                    raise GraphValidationError(f"line {lineno}: weight must be positive, got {w}")
            src.append(a)
            dst.append(b)
            wts.append(w)
    finally:
        if close:
            fh.close()
    return Graph.from_edges(src, dst, wts if weighted else None, n=n,
                            merge="sum" if weighted else "one")


def write_edge_list(g: Graph, dest, weighted=None):
    """Write a graph in the edge-list format (weights only if weighted)."""
    if weighted is None:
        weighted = g.is_weighted()
    src, dst, w = g.edges()
    lines = []
    for a, b, c in zip(src.tolist(), dst.tolist(), w.tolist()):
        lines.append(f"{a}\t{b}\t{c!r}\n" if weighted else f"{a}\t{b}\n")
    text = "".join(lines)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


# --- binary cache -------------------------------------------------------------

def write_graph_cache(g: Graph, path):
    """Binary cache: ``DGWG`` magic, u16 version, u64 n, u64 m, u8 orientation,
    then indptr (u64), indices (u64) and weights (f64), all little-endian."""
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<HQQB", _CACHE_VERSION, g.n, g.m, 0 if g.orientation == NORMAL else 1))
        fh.write(g.indptr.astype("<u8").tobytes())
        fh.write(g.indices.astype("<u8").tobytes())
        fh.write(g.weights.astype("<f8").tobytes())


def read_graph_cache(path) -> Graph:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _CACHE_MAGIC:
        raise GraphFormatError("not a graph cache file (bad magic)")
    header = struct.calcsize("<HQQB")
    version, n, m, orient = struct.unpack_from("<HQQB", data, 4)
    if version != _CACHE_VERSION:
        raise GraphFormatError(f"unsupported graph cache version {version}")
    off = 4 + header
    expected = off + 8 * (n + 1) + 16 * m
    if len(data) != expected:
        raise GraphFormatError(f"graph cache truncated: {len(data)} bytes, expected {expected}")
    indptr = np.frombuffer(data, "<u8", n + 1, off).astype(np.int64)
    off += 8 * (n + 1)
    indices = np.frombuffer(data, "<u8", m, off).astype(np.int64)
    off += 8 * m
    weights = np.frombuffer(data, "<f8", m, off).astype(np.float64)
    if indptr[0] != 0 or indptr[-1] != m or np.any(np.diff(indptr) < 0):
        raise GraphFormatError("graph cache has inconsistent index pointers")
    if m and (indices.max() >= n):
        raise GraphFormatError("graph cache has out-of-range node ids")
    return Graph(int(n), indptr, indices, weights, NORMAL if orient == 0 else TRANSPOSED)


def load_graph(path, weighted=False, n=None) -> Graph:
    """Load either a binary cache (detected by magic bytes) or an edge list."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _CACHE_MAGIC:
        return read_graph_cache(path)
    return load_edge_list(path, weighted=weighted, n=n)
