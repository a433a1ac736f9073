"""
Closed-form diffusion theory: incomplete gamma functions, the heat
containment bound, and the source-star graph with its analytic heat
distribution.

The lower bound ``sum_{i in ball(j, R)} Psi[i, j](tau) >= Q(R + 1, tau)``
holds for every directed graph, and source-star graphs attain it with
equality for ``R < depth``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import Graph


def regularized_upper_gamma_Q(a, tau):
    """``Q(a, tau) = exp(-tau) * sum_{l<a} tau^l / l!`` for integer ``a >= 1``.

    Summed in the log domain so large ``tau`` does not overflow.
    """
    a = _check_order(a)
    tau = float(tau)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return 1.0
    if tau < a:
        return 1.0 - _lower_series(a, tau)
    return _finite_sum(a, tau)


def regularized_lower_gamma_P(a, tau):
    """``P(a, tau) = 1 - Q(a, tau)``, with a direct series where ``P`` is small."""
    a = _check_order(a)
    tau = float(tau)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return 0.0
    if tau < a:
        return _lower_series(a, tau)
    return 1.0 - _finite_sum(a, tau)


def _check_order(a):
    if int(a) != a or a < 1:
        raise ValueError("only positive integer orders are supported")
    return int(a)


def _finite_sum(a, tau):
    log_tau = math.log(tau)
    terms = [math.exp(l * log_tau - tau - math.lgamma(l + 1)) for l in range(a)]
    return min(1.0, math.fsum(terms))


def _lower_series(a, tau):
    # exp(-tau) sum_{l >= a} tau^l / l!, terms decrease once l > tau
    log_tau = math.log(tau)
    term = math.exp(a * log_tau - tau - math.lgamma(a + 1))
    terms = [term]
    l = a
    while term > 1e-18 * terms[0]:
        l += 1
        term *= tau / l
        terms.append(term)
    return min(1.0, math.fsum(terms))


def heat_containment_bound(R, tau):
    """Lower bound on the heat within ``R`` hops of its source at time ``tau``."""
    return regularized_upper_gamma_Q(R + 1, tau)


# --- source-star graphs -----------------------------------------------------

@dataclass(frozen=True)
class SourceStarSpec:
    d: int
    beta: int
    ell: int
    n_isolated: int = 0

    def __post_init__(self):
        if self.d < 1 or self.beta < 1 or self.ell < 0 or self.n_isolated < 0:
            raise ValueError(f"invalid source-star parameters {self}")

    def layer_size(self, l):
        return 1 if l == 0 else self.d * self.beta ** (l - 1)

    @property
    def n_tree(self):
        return 1 + sum(self.layer_size(l) for l in range(1, self.ell + 1))

    @property
    def n(self):
        return self.n_isolated + self.n_tree


def source_star_index(spec: SourceStarSpec, l, nu):
    """Node id of the ``nu``-th node (1-based) in layer ``l`` (``l = 0`` is the centre)."""
    if l == 0:
        return 0
    return nu + spec.d * sum(spec.beta ** k for k in range(l - 1))


def source_star_position(spec: SourceStarSpec, i):
    """Invert :func:`source_star_index`: return ``(layer, nu, branch)`` of tree node ``i``.

    ``branch`` is the 1-based id of the centre's child whose subtree holds
    ``i`` (0 for the centre).
    """
    if i == 0:
        return 0, 0, 0
    d, beta = spec.d, spec.beta
    if beta == 1:
        l = -(-i // d)
        nu = i - d * (l - 1)
    else:
        l = math.ceil(math.log(1 + i * (beta - 1) / d, beta))
        # guard the floating-point log against off-by-one at layer edges
        while source_star_index(spec, l, 1) > i:
            l -= 1
        while source_star_index(spec, l + 1, 1) <= i:
            l += 1
        nu = i - d * (beta ** (l - 1) - 1) // (beta - 1)
    branch = -(-nu // beta ** (l - 1))
    return l, nu, branch


def make_source_star(spec: SourceStarSpec) -> Graph:
    """Source-star graph: centre 0, ``d`` branches of ``beta``-ary trees of depth ``ell``.

    Children of node ``nu`` in layer ``l`` are ``(nu-1)*beta + 1 .. nu*beta``
    in layer ``l + 1``; isolated nodes come after the tree.
    """
    src, dst = [], []
    for c in range(1, spec.layer_size(1) + 1 if spec.ell >= 1 else 1):
        src.append(0)
        dst.append(source_star_index(spec, 1, c))
    for l in range(1, spec.ell):
        for nu in range(1, spec.layer_size(l) + 1):
            parent = source_star_index(spec, l, nu)
            for c in range((nu - 1) * spec.beta + 1, nu * spec.beta + 1):
                src.append(parent)
                dst.append(source_star_index(spec, l + 1, c))
    return Graph.from_edges(src, dst, n=spec.n)


@dataclass(frozen=True)
class SourceStarHeat:
    """Heat per node in each layer (``values[l]``) and the layer sizes."""

    values: np.ndarray
    counts: np.ndarray

    @property
    def total(self):
        return float(np.dot(self.values, self.counts))

    def node_values(self, spec: SourceStarSpec):
        """Expand to a length-``n`` vector in source-star node order."""
        out = np.zeros(spec.n)
        i = 0
        for v, c in zip(self.values, self.counts):
            out[i:i + c] = v
            i += c
        return out


def source_star_heat(spec: SourceStarSpec, tau) -> SourceStarHeat:
    """Analytic heat distribution from the centre of a source-star graph."""
    if spec.ell < 1:
        raise ValueError("source_star_heat needs depth ell >= 1")
    d, beta, ell = spec.d, spec.beta, spec.ell
    vals = np.empty(ell + 1)
    vals[0] = math.exp(-tau)
    for l in range(1, ell):
        vals[l] = math.exp(l * math.log(tau) - tau - math.lgamma(l + 1)) / (d * beta ** (l - 1)) \
            if tau > 0 else 0.0
    vals[ell] = regularized_lower_gamma_P(ell, tau) / (d * beta ** (ell - 1))
    counts = np.array([spec.layer_size(l) for l in range(ell + 1)], dtype=np.int64)
    return SourceStarHeat(vals, counts)


# --- balls around a node ------------------------------------------------------

@dataclass(frozen=True)
class BallDecomposition:
    root: int
    R: int
    shells: list  # shells[r] = nodes exactly r hops from root

    @property
    def ball(self):
        return np.concatenate(self.shells) if self.shells else np.empty(0, dtype=np.int64)

    def ball_at(self, r):
        return np.concatenate(self.shells[:r + 1])

    def periphery(self, n):
        mask = np.ones(n, dtype=bool)
        mask[self.ball] = False
        return np.flatnonzero(mask)


def ball_decomposition(g: Graph, root, R) -> BallDecomposition:
    """Breadth-first shells along out-edges, up to radius ``R``."""
    dist = {int(root): 0}
    shells = [[int(root)]]
    queue = deque([int(root)])
    while queue:
        v = queue.popleft()
        dv = dist[v]
        if dv >= R:
            continue
        for t in g.out_neighbors(v).tolist():
            if t not in dist:
                dist[t] = dv + 1
                if len(shells) <= dv + 1:
                    shells.append([])
                shells[dv + 1].append(t)
                queue.append(t)
    while len(shells) <= R:
        shells.append([])
    return BallDecomposition(int(root), int(R), [np.array(sorted(s), dtype=np.int64) for s in shells])


@dataclass(frozen=True)
class ContainmentReport:
    root: int
    R: int
    tau: float
    ball_heat: float
    bound: float
    tol: float = 1e-9

    @property
    def holds(self):
        return self.ball_heat >= self.bound - self.tol


def verify_containment(g: Graph, root, R, tau, psi_column, tol=1e-9) -> ContainmentReport:
    """Compare the heat inside the ``(root, R)``-ball with ``Q(R + 1, tau)``."""
    ball = ball_decomposition(g, root, R).ball
    heat = float(np.sum(np.asarray(psi_column)[ball]))
    return ContainmentReport(int(root), int(R), float(tau), heat, heat_containment_bound(R, tau), tol)


def detect_source_star(g: Graph):
    """Return the :class:`SourceStarSpec` that generates ``g`` exactly, or ``None``."""
    d = g.out_neighbors(0).size if g.n else 0
    if d == 0:
        return None
    first = g.out_neighbors(0)
    beta = int(g.out_neighbors(int(first[0])).size) or 1
    deg_out = np.diff(g.indptr)
    src, dst, _ = g.edges()
    touched = np.zeros(g.n, dtype=bool)
    touched[src] = True
    touched[dst] = True
    n_isolated = int((~touched).sum())
    # depth: follow first children
    ell, v = 0, 0
    while deg_out[v] > 0:
        v = int(g.out_neighbors(v)[0])
        ell += 1
        if ell > g.n:
            return None
    try:
        spec = SourceStarSpec(d, beta, ell, n_isolated)
    except ValueError:
        return None
    if spec.n != g.n:
        return None
    return spec if make_source_star(spec).structurally_equal(g) else None
