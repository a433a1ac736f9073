"""
Synthetic benchmark graphs.

* A composition of small catalog graphs whose nodes carry automorphic
  identity labels, attached to a circular backbone by random noise edges.
* Barabasi-Albert preferential attachment graphs with edges pointing from
  each new node to its chosen targets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, GraphFormatError, GraphValidationError
from .graph import Graph, load_edge_list, write_edge_list

BACKBONE = -1


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    graph: Graph
    labels: np.ndarray  # automorphic identity per node, 0-based within this graph

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(eq=False)
class LabeledGraph:
    """A graph whose nodes carry identity labels (``-1`` for unlabeled/backbone nodes).

    ``component_tag[v]`` is the catalog instance node ``v`` came from (``-1``
    for backbone nodes) and ``class_names[c]`` names identity ``c``.
    """

    graph: Graph
    identity: np.ndarray
    component_tag: np.ndarray
    class_names: list = field(default_factory=list)
    repeat: np.ndarray = None
    manifest: dict = field(default_factory=dict)

    @property
    def labeled(self):
        return np.flatnonzero(self.identity >= 0)


def catalog_path():
    """Directory of the catalog fixtures shipped with the package."""
    return Path(str(resources.files("digraphwave") / "data" / "catalog"))


def _read_labels(path):
    ids, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise GraphFormatError(f"{path}: expected 'node<TAB>identity'", lineno)
            try:
                ids.append(int(parts[0]))
                labels.append(int(parts[1]))
            except ValueError:
                raise GraphFormatError(f"{path}: non-integer field in {s!r}", lineno) from None
    ids = np.asarray(ids, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if ids.size == 0 or not np.array_equal(np.sort(ids), np.arange(ids.size)):
        raise GraphFormatError(f"{path}: labels must cover node ids 0..n-1 exactly once")
    out = np.empty(ids.size, dtype=np.int64)
    out[ids] = labels
    return out


def load_catalog(path=None):
    """Load every ``<name>.tsv`` edge list with its ``<name>.labels`` file, sorted by name."""
    path = Path(path) if path is not None else catalog_path()
    if not path.is_dir():
        raise FileNotFoundError(f"catalog directory not found: {path}")
    entries = []
    for tsv in sorted(path.glob("*.tsv")):
        lab_path = tsv.with_suffix(".labels")
        if not lab_path.exists():
            raise GraphFormatError(f"missing labels file for {tsv.name}")
        labels = _read_labels(lab_path)
        try:
            g = load_edge_list(tsv, n=labels.size)
        except GraphValidationError as exc:
            raise GraphFormatError(f"{tsv.name} does not match its {labels.size} labels: {exc}") from None
        entries.append(CatalogEntry(tsv.stem, g, labels))
    if not entries:
        raise GraphFormatError(f"no catalog graphs in {path}")
    return entries


def write_catalog(entries, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for e in entries:
        write_edge_list(e.graph, path / f"{e.name}.tsv", weighted=False)
        write_labels(path / f"{e.name}.labels", e.labels)


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for v, lab in enumerate(np.asarray(labels).tolist()):
            fh.write(f"{v}\t{lab}\n")


def load_example_graph() -> LabeledGraph:
    """The 21-node example graph with its 9 automorphic identities."""
    base = Path(str(resources.files("digraphwave") / "data"))
    labels = _read_labels(base / "example_graph.labels")
    g = load_edge_list(base / "example_graph.tsv", n=labels.size)
    return LabeledGraph(g, labels, np.zeros(g.n, dtype=np.int64),
                        [f"example:{c}" for c in range(labels.max() + 1)])


# --- composition --------------------------------------------------------------------

@dataclass
class CompositionSpec:
    catalog: list
    repeats: int = 10
    noise_edges: int = 0
    seed: int = 0
    segment: int = 5
    undirected_backbone: bool = False

    def echo(self):
        return {"catalog": [e.name for e in self.catalog], "repeats": self.repeats,
                "noise_edges": self.noise_edges, "seed": self.seed, "segment": self.segment,
                "undirected_backbone": self.undirected_backbone}


def compose(spec: CompositionSpec) -> LabeledGraph:
    """Place ``repeats`` copies of each catalog graph next to a circular backbone.

    Node layout: backbone nodes ``0 .. B-1`` first (``B = segment *
    instances``), then instances in order repeat-major, catalog-minor.
    Instance ``i`` owns backbone segment ``[i*segment, (i+1)*segment)`` and
    is joined to it by exactly ``noise_edges`` distinct edges, each with a
    uniformly chosen instance node, segment node and direction.
    """
    if spec.repeats < 1 or spec.segment < 1:
        raise ConfigurationError("repeats and segment length must be >= 1")
    if spec.noise_edges < 0 or spec.noise_edges > spec.segment:
        raise ConfigurationError(
            f"noise_edges={spec.noise_edges} must lie in [0, segment={spec.segment}]")
    rng = np.random.default_rng(spec.seed)
    n_inst = spec.repeats * len(spec.catalog)
    n_back = spec.segment * n_inst
    class_offset = np.cumsum([0] + [e.n_classes for e in spec.catalog])
    class_names = [f"{e.name}:{c}" for e in spec.catalog for c in range(e.n_classes)]

    back = np.arange(n_back)
    src = [back]
    dst = [(back + 1) % n_back]
    if spec.undirected_backbone:
        src.append((back + 1) % n_back)
        dst.append(back)
    identity = [np.full(n_back, BACKBONE, dtype=np.int64)]
    tags = [np.full(n_back, -1, dtype=np.int64)]
    repeat = [np.full(n_back, -1, dtype=np.int64)]
    existing = set()
    offset = n_back
    inst = 0
    for r in range(spec.repeats):
        for ci, entry in enumerate(spec.catalog):
            es, ed, _ = entry.graph.edges()
            src.append(es + offset)
            dst.append(ed + offset)
            identity.append(entry.labels + class_offset[ci])
            tags.append(np.full(entry.graph.n, inst, dtype=np.int64))
            repeat.append(np.full(entry.graph.n, r, dtype=np.int64))
            seg0 = inst * spec.segment
            added = 0
            while added < spec.noise_edges:
                u = offset + int(rng.integers(entry.graph.n))
                v = seg0 + int(rng.integers(spec.segment))
                edge = (u, v) if rng.random() < 0.5 else (v, u)
                if edge in existing:
                    continue
                existing.add(edge)
                added += 1
            offset += entry.graph.n
            inst += 1
    if existing:
        noise = np.array(sorted(existing), dtype=np.int64)
        src.append(noise[:, 0])
        dst.append(noise[:, 1])
    g = Graph.from_edges(np.concatenate(src), np.concatenate(dst), n=offset)
    return LabeledGraph(g, np.concatenate(identity), np.concatenate(tags), class_names,
                        np.concatenate(repeat), {"command": "compose", "spec": spec.echo()})


def expected_counts(spec: CompositionSpec):
    """``(nodes, backbone_nodes, edges)`` implied by a composition spec."""
    n_inst = spec.repeats * len(spec.catalog)
    n_back = spec.segment * n_inst
    nodes = n_back + spec.repeats * sum(e.graph.n for e in spec.catalog)
    edges = n_back * (2 if spec.undirected_backbone and n_back > 2 else 1) \
        + spec.repeats * sum(e.graph.m for e in spec.catalog) + n_inst * spec.noise_edges
    return nodes, n_back, edges


def write_labeled_graph(lg: LabeledGraph, prefix):
    """Write ``<prefix>.tsv``, ``<prefix>.labels`` and ``<prefix>.json``."""
    import json

    prefix = os.fspath(prefix)
    write_edge_list(lg.graph, prefix + ".tsv", weighted=False)
    write_labels(prefix + ".labels", lg.identity)
    with open(prefix + ".json", "w", encoding="utf-8") as fh:
        json.dump(lg.manifest, fh, indent=2, sort_keys=True)


# --- preferential attachment ------------------------------------------------------

def barabasi_albert(n, edges_per_node, seed=None) -> Graph:
    """Directed preferential attachment graph with ``m * (n - m)`` edges.

    Nodes ``0 .. m-1`` start without edges and node ``m`` links to all of
    them. Every later node links to ``m`` distinct earlier nodes drawn with
    probability proportional to their current (total) degree.
    """
    m = int(edges_per_node)
    n = int(n)
    if m < 1 or m >= n:
        raise ConfigurationError(f"need 1 <= edges_per_node < n (got m={m}, n={n})")
    rng = np.random.default_rng(seed)
    n_edges = m * (n - m)
    src = np.repeat(np.arange(m, n, dtype=np.int64), m)
    dst = np.empty(n_edges, dtype=np.int64)
    repeated = np.empty(2 * n_edges, dtype=np.int64)
    filled = 0
    targets = list(range(m))
    buf = rng.random(4096)
    pos = 0
    for v in range(m, n):
        e0 = (v - m) * m
        dst[e0:e0 + m] = targets
        repeated[filled:filled + m] = targets
        repeated[filled + m:filled + 2 * m] = v
        filled += 2 * m
        if v == n - 1:
            break
        chosen = []
        while len(chosen) < m:
            if pos == buf.size:
                buf = rng.random(4096)
                pos = 0
            t = int(repeated[int(buf[pos] * filled)])
            pos += 1
            if t not in chosen:
                chosen.append(t)
        targets = chosen
    return Graph.from_edges(src, dst, n=n)


# --- identity separation ------------------------------------------------------------

@dataclass
class SeparationReport:
    n_classes: int
    within_class_spread: float  # max |row - class centroid| over labeled nodes
    separable: int  # classes whose centroid is > min_distance from every other centroid
    centroid_accuracy: float  # nearest-centroid accuracy on held-out repeats

    def summary(self):
        return (f"{self.n_classes} classes, spread {self.within_class_spread:.2e}, "
                f"{self.separable} separable, nearest-centroid accuracy {self.centroid_accuracy:.3f}")


def separation_report(lg: LabeledGraph, data, min_distance=1e-4, train_repeats=None) -> SeparationReport:
    """Score how well embedding rows ``data`` separate the identity classes of ``lg``.

    Centroids used for classification come from ``train_repeats`` (default:
    the first half of the repeats); the remaining labeled nodes are
    classified by their nearest centroid.
    """
    data = np.asarray(data, dtype=np.float64)
    lab = lg.labeled
    y = lg.identity[lab]
    X = data[lab]
    classes = np.unique(y)
    cents = np.array([X[y == c].mean(axis=0) for c in classes])
    spread = max(float(np.abs(X[y == c] - cents[i]).max()) for i, c in enumerate(classes))
    dist = np.linalg.norm(cents[:, None, :] - cents[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    separable = int(np.sum(dist.min(axis=1) > min_distance)) if classes.size > 1 else int(classes.size)

    rep = lg.repeat[lab] if lg.repeat is not None else np.zeros(lab.size, dtype=np.int64)
    if train_repeats is None:
        reps = np.unique(rep)
        train_repeats = reps[: max(1, reps.size // 2)]
    train = np.isin(rep, train_repeats)
    test = ~train if np.any(~train) else train
    train_classes = np.unique(y[train])
    tc = np.array([X[train & (y == c)].mean(axis=0) for c in train_classes])
    d = np.linalg.norm(X[test][:, None, :] - tc[None, :, :], axis=2)
    pred = train_classes[np.argmin(d, axis=1)]
    acc = float(np.mean(pred == y[test]))
    return SeparationReport(int(classes.size), spread, separable, acc)
