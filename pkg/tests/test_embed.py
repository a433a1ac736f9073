import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from conftest import dense_psi, random_digraph
from digraphwave.embed import (
    EmbeddingMatrix,
    ThresholdedBatch,
    apply_threshold,
    digraphwave,
    digraphwave_core,
    dimensions,
    ecf_compress,
    embed,
    node_thresholds,
    set_hyperparameters,
    standardize,
)
from digraphwave.errors import ConfigurationError
from digraphwave.graph import Graph, build_operator, permute
from digraphwave.matexp import expm_batch, taylor_coefficients
from digraphwave.synth import load_example_graph

# (k_emb, k_tau, k_phi, actual dimension) with both enhancements, as published
DIMENSION_TABLE = [(32, 1, 4, 32), (64, 2, 4, 64), (128, 2, 8, 128), (256, 3, 10, 240), (512, 4, 16, 512)]


@pytest.mark.parametrize("k_emb,k_tau,k_phi,total", DIMENSION_TABLE)
def test_dimension_table(k_emb, k_tau, k_phi, total):
    g = Graph.from_edges([0], [1], n=2)
    cfg = set_hyperparameters(g, R=3, k_emb=k_emb)
    assert (cfg.k_tau, cfg.k_phi, cfg.dim) == (k_tau, k_phi, total)


def test_dimensions_without_enhancements():
    # k_f = 2: k_tau = floor(16^(1/3)) = 2, k_phi = floor(16 / 2) = 8
    assert dimensions(32, False, False) == (2, 8)
    # 64 / 8 = 8 is a perfect cube; a float cube root would give 1
    assert dimensions(512, True, True) == (4, 16)
    assert dimensions(128, False, False) == (4, 16)
    assert dimensions(128, True, False) == (3, 10)
    with pytest.raises(ConfigurationError):
        dimensions(7, True, True)


@settings(max_examples=200, deadline=None)
@given(st.integers(8, 5000), st.booleans(), st.booleans())
def test_dimension_never_exceeds_request(k_emb, t, a):
    k_f = 2 * 2 ** t * 2 ** a
    if k_emb < k_f:
        return
    k_tau, k_phi = dimensions(k_emb, t, a)
    assert k_f * k_tau * k_phi <= k_emb
    assert k_f * k_tau ** 3 <= k_emb < k_f * (k_tau + 1) ** 3
    assert k_phi == (k_emb // k_f) // k_tau


def test_config_timescales_and_samples():
    g = Graph.from_edges([0, 1], [1, 2], n=3)
    cfg = set_hyperparameters(g, R=3, k_emb=256)
    assert cfg.taus[0] == 1.0 and cfg.taus[-1] == 3.0
    np.testing.assert_allclose(np.diff(cfg.t_samples), math.pi)
    assert cfg.t_samples[0] == pytest.approx(math.pi)
    assert cfg.order == 40
    assert set_hyperparameters(g, R=2, order="auto").order < 40
    with pytest.raises(ConfigurationError):
        set_hyperparameters(g, R=0)


def test_threshold_examples():
    # R = 2, d = 3, beta = 2
    d = np.array([3, 2, 2, 2])
    theta = node_thresholds(d, 2)
    assert theta[0] == pytest.approx(math.exp(-1) / 12)
    assert theta[0] == pytest.approx(0.030657, abs=1e-6)
    # huge degree hits the floor
    d = np.array([10 ** 6] + [10] * 11)
    assert node_thresholds(d, 3)[0] == 1e-6
    # R = 1, d = 1, beta = 1
    assert node_thresholds(np.array([1, 1]), 1)[0] == pytest.approx(math.exp(-1))


def test_threshold_sinks_and_single_node():
    theta = node_thresholds(np.array([0, 4, 4]), 3)
    assert theta[0] == pytest.approx(math.exp(-3))
    assert node_thresholds(np.array([2]), 2)[0] == pytest.approx(min(math.exp(-2), 2 * math.exp(-2) / 2,
                                                                     math.exp(-1) / (2 * 2)))
    with pytest.raises(ConfigurationError):
        node_thresholds(np.array([1, 1]), 0)


def test_apply_threshold_matches_dense_filter(rng):
    g = random_digraph(rng, 100, 0.05)
    theta = node_thresholds(np.diff(g.indptr), 3)
    cols = np.arange(0, 100, 3)
    b = expm_batch(build_operator(g), cols, taylor_coefficients([1.0, 3.0]))
    thr = apply_threshold(b, theta)
    for s in range(2):
        expected = np.where(b.psi[s] > theta[cols][None, :], b.psi[s], 0.0)
        np.testing.assert_array_equal(thr.columns[s].toarray(), expected)
    kept = sum(int(np.count_nonzero(c.toarray())) for c in thr.columns)
    assert thr.retained_fraction == pytest.approx(kept / b.psi.size)


def test_apply_threshold_strict_and_trivial_cases():
    g = Graph.from_edges([0, 1], [1, 0], n=2)
    b = expm_batch(build_operator(g), [0], taylor_coefficients([1e-9]))
    thr = apply_threshold(b, np.full(2, 0.5))
    assert thr.columns[0].nnz == 1 and thr.columns[0][0, 0] == pytest.approx(1.0)
    thr = apply_threshold(b, np.full(2, 1.0))
    assert thr.columns[0].nnz == 0


def test_ecf_one_hot_column():
    col = sparse.csc_matrix(np.array([[1.0], [0.0], [0.0]]))
    out = ecf_compress(ThresholdedBatch(np.array([0]), [col], 1 / 3), [math.pi], 3)
    assert out[0, 0] == pytest.approx(1 / 3)
    assert out[0, 1] == pytest.approx(0.0, abs=1e-16)
    out0 = ecf_compress(ThresholdedBatch(np.array([0]), [col], 1 / 3), [0.0], 3)
    assert out0[0, 0] == 1.0


def test_ecf_layout_is_timescale_major(rng):
    g = random_digraph(rng, 12, 0.3)
    cfg = set_hyperparameters(g, R=3, k_emb=256, transpose=False, aggregate=False)
    core = digraphwave_core(g, cfg)
    tags = core.column_tags
    assert len(tags) == core.data.shape[1] == 2 * cfg.k_tau * cfg.k_phi
    assert tags[0] == ("normal", 0, 0, "Re") and tags[1] == ("normal", 0, 0, "Im")
    assert tags[2 * cfg.k_phi] == ("normal", 1, 0, "Re")
    # cross-check a single entry against the dense oracle
    j, s, q = 4, 1, 2
    psi = np.clip(dense_psi(g, cfg.taus[s])[:, j], 0, 1)
    vals = psi[psi > cfg.thresholds[j]]
    t = cfg.t_samples[q]
    re = (g.n - vals.size + np.cos(t * vals).sum()) / g.n
    im = np.sin(t * vals).sum() / g.n
    base = s * 2 * cfg.k_phi + 2 * q
    assert core.data[j, base] == pytest.approx(re, abs=1e-12)
    assert core.data[j, base + 1] == pytest.approx(im, abs=1e-12)


def test_ecf_magnitude_at_most_one(rng):
    g = random_digraph(rng, 40, 0.1)
    emb = embed(g, R=3, k_emb=128)
    d = emb.data
    mag = np.hypot(d[:, 0::2], d[:, 1::2])
    assert mag.max() <= 1 + 1e-12
    assert np.abs(d).max() <= 1.0


def test_example_graph_ecf_points_distinct():
    lg = load_example_graph()
    cfg = set_hyperparameters(lg.graph, R=3, k_emb=128, transpose=False, aggregate=False)
    assert cfg.taus[0] == 1.0
    # first timescale block holds the ECF samples at tau = 1
    core = digraphwave_core(lg.graph, cfg).data[:, :2 * cfg.k_phi]
    for a, b in [(0, 19), (0, 20), (19, 20)]:
        assert np.linalg.norm(core[a] - core[b]) > 0


def test_automorphic_leaves_and_sinks_share_core_rows():
    g = Graph.from_edges([0, 0], [1, 2], n=3)
    cfg = set_hyperparameters(g, R=3, k_emb=64, transpose=False, aggregate=False)
    core = digraphwave_core(g, cfg).data
    np.testing.assert_array_equal(core[1], core[2])
    # every sink carries the same core embedding, whatever its in-structure
    g = Graph.from_edges([0, 0, 1, 3], [1, 2, 2, 4], n=6)
    cfg = set_hyperparameters(g, R=3, k_emb=64, transpose=False, aggregate=False)
    core = digraphwave_core(g, cfg).data
    for v in (2, 4, 5):
        np.testing.assert_array_equal(core[v], core[2])


@pytest.mark.parametrize("engine", ["fused", "dense"])
def test_batch_size_invariance(rng, engine):
    g = random_digraph(rng, 30, 0.1)
    outs = []
    for bs in (1, 7, 30):
        cfg = set_hyperparameters(g, R=3, k_emb=128, batch_size=bs)
        outs.append(digraphwave(g, cfg, engine=engine).data)
    np.testing.assert_array_equal(outs[0], outs[1])
    np.testing.assert_array_equal(outs[0], outs[2])


def test_engines_agree(rng):
    for _ in range(5):
        g = random_digraph(rng, int(rng.integers(5, 40)), rng.uniform(0.05, 0.4), n_sinks=2)
        cfg = set_hyperparameters(g, R=int(rng.integers(1, 4)), k_emb=128, batch_size=8)
        a = digraphwave(g, cfg, engine="fused").data
        b = digraphwave(g, cfg, engine="dense").data
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)


def test_thread_count_invariance(rng):
    g = random_digraph(rng, 80, 0.05)
    cfg = set_hyperparameters(g, R=3, k_emb=128, batch_size=16)
    ref = digraphwave(g, cfg, threads=1).data
    for threads in (2, 3, 8):
        np.testing.assert_array_equal(digraphwave(g, cfg, threads=threads).data, ref)


def test_unknown_engine(rng):
    g = random_digraph(rng, 5, 0.4)
    with pytest.raises(ConfigurationError):
        digraphwave(g, set_hyperparameters(g), engine="gpu")


def test_transposition_separates_sinks():
    # sinks 2 (fed by 0 and 1) and 3 (fed by 4) share a core row
    g = Graph.from_edges([0, 0, 1, 4], [1, 2, 2, 3], n=5)
    core = embed(g, R=2, k_emb=64, transpose=False, aggregate=False).data
    np.testing.assert_array_equal(core[2], core[3])
    t = embed(g, R=2, k_emb=64, transpose=True, aggregate=False).data
    assert np.linalg.norm(t[2] - t[3]) > 1e-4


def test_no_enhancements_is_core(rng):
    g = random_digraph(rng, 20, 0.2)
    cfg = set_hyperparameters(g, R=3, k_emb=64, transpose=False, aggregate=False)
    np.testing.assert_array_equal(digraphwave(g, cfg).data, digraphwave_core(g, cfg).data)


def test_enhancement_blocks_and_tags(rng):
    g = random_digraph(rng, 20, 0.2)
    cfg = set_hyperparameters(g, R=3, k_emb=128)
    emb = digraphwave(g, cfg)
    c = cfg.core_dim
    assert emb.data.shape == (20, 4 * c) == (20, cfg.dim)
    assert [t.orientation for t in emb.column_tags[::c]] == ["normal", "transposed", "aggregated", "aggregated"]
    core_t = digraphwave_core(g, cfg)
    np.testing.assert_array_equal(emb.data[:, :c], core_t.data)


def test_aggregation_is_neighbourhood_mean():
    g = Graph.from_edges([0, 1, 2], [1, 2, 0], n=4)  # node 3 isolated
    cfg = set_hyperparameters(g, R=2, k_emb=64, transpose=False, aggregate=True)
    emb = digraphwave(g, cfg).data
    c = cfg.core_dim
    core, agg = emb[:, :c], emb[:, c:]
    np.testing.assert_allclose(agg[0], (core[1] + core[2]) / 2, atol=1e-15)
    np.testing.assert_array_equal(agg[3], 0.0)


def test_transposed_thresholds_recomputed():
    g = Graph.from_edges([0, 0, 0, 0, 1], [1, 2, 3, 4, 2], n=5)
    a = embed(g, R=2, k_emb=64, aggregate=False).data
    b = embed(g, R=2, k_emb=64, aggregate=False, shared_thresholds=True).data
    half = a.shape[1] // 2
    np.testing.assert_array_equal(a[:, :half], b[:, :half])
    assert not np.array_equal(a[:, half:], b[:, half:])


def test_example_graph_identities():
    lg = load_example_graph()
    emb = embed(lg.graph, R=3, k_emb=128).data
    labels = lg.identity
    assert labels.max() + 1 == 9
    cents = []
    for c in range(9):
        rows = emb[labels == c]
        assert np.abs(rows - rows[0]).max() <= 1e-9
        cents.append(rows[0])
    cents = np.array(cents)
    dist = np.linalg.norm(cents[:, None] - cents[None], axis=2)
    assert dist[~np.eye(9, dtype=bool)].min() > 1e-4


def test_permutation_equivariance(rng):
    g = random_digraph(rng, 25, 0.15)
    perm = rng.permutation(g.n)
    a = embed(g, R=3, k_emb=128).data
    b = embed(permute(g, perm), R=3, k_emb=128).data
    np.testing.assert_allclose(b[perm], a, atol=1e-13)


def test_single_precision_output(rng):
    g = random_digraph(rng, 10, 0.3)
    emb = embed(g, precision="single")
    assert emb.data.dtype == np.float32


def test_standardize_cases():
    data = np.array([[1.0, 0.0], [1.0, 2.0]])
    z = standardize(EmbeddingMatrix(data, []))
    np.testing.assert_array_equal(z.data, [[0.0, -1.0], [0.0, 1.0]])
    z2 = standardize(z)
    np.testing.assert_allclose(z2.data, z.data, atol=1e-15)
    np.testing.assert_allclose(z.unstandardized(), data)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_standardize_properties(n, k, seed):
    data = np.random.default_rng(seed).normal(size=(n, k)) * 5 + 3
    data[:, 0] = 7.0
    z = standardize(EmbeddingMatrix(data, []))
    np.testing.assert_allclose(z.data.mean(axis=0), 0.0, atol=1e-12)
    std = z.data.std(axis=0)
    assert std[0] == 0.0
    np.testing.assert_allclose(std[1:][data[:, 1:].std(axis=0) > 1e-9], 1.0, atol=1e-9)
    np.testing.assert_allclose(z.unstandardized(), data, atol=1e-12)
