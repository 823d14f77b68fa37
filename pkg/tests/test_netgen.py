import io
import math

import numpy as np
import pytest

from subnet_sar.errors import ConfigError, ParseError
from subnet_sar.netgen import (
    LsmConfig,
    SbmConfig,
    gen_lsm,
    gen_sbm,
    load_labels,
    lsm_link_probability,
    sbm_edge_probabilities,
    write_labels,
)


def _tier_counts(net):
    src, dst = net.adjacency.edges()
    d = np.abs(net.labels[src] - net.labels[dst])
    lab = net.labels
    n = lab.size
    sizes = np.bincount(lab)
    n_in = int(np.sum(sizes * (sizes - 1)))
    n_adj = int(np.sum(2 * sizes[:-1] * sizes[1:]))
    n_far = n * (n - 1) - n_in - n_adj
    return (
        (int(np.sum(d == 0)), n_in),
        (int(np.sum(d == 1)), n_adj),
        (int(np.sum(d > 1)), n_far),
    )


def test_literal_probabilities():
    p = sbm_edge_probabilities(SbmConfig(10_000, 1000, scale="literal"))
    assert p == pytest.approx((0.2e-4, 0.2e-6, 0.2e-8), rel=1e-12)


def test_within_probabilities():
    # only the same-block rate is scaled by 10K, giving 2 / (N/K)
    p = sbm_edge_probabilities(SbmConfig(10_000, 1000))
    assert p == pytest.approx((0.2, 0.2e-6, 0.2e-8), rel=1e-12)
    assert sbm_edge_probabilities(SbmConfig(30_000, 1500))[0] == pytest.approx(0.1)


def test_block_probabilities():
    # every tier scaled by 10K
    p = sbm_edge_probabilities(SbmConfig(10_000, 1000, scale="block"))
    assert p == pytest.approx((0.2, 0.002, 2e-5), rel=1e-12)


def test_degree_probabilities():
    p = sbm_edge_probabilities(SbmConfig(10_000, 1000, scale="degree"))
    assert p == pytest.approx((0.2, 0.002, 2e-5), rel=1e-12)
    p = sbm_edge_probabilities(SbmConfig(10_000, 200, scale="degree"))
    assert p[0] == 0.2


def test_bad_config():
    with pytest.raises(ConfigError):
        SbmConfig(1, 1)
    with pytest.raises(ConfigError):
        SbmConfig(10, 0)
    with pytest.raises(ConfigError):
        SbmConfig(10, 2, scale="nope")
    with pytest.raises(ConfigError):
        LsmConfig(10, 0)


@pytest.mark.parametrize("scale", ["within", "block", "degree"])
def test_sbm_tier_rates(scale):
    cfg = SbmConfig(5000, 250, seed=3, scale=scale)
    net = gen_sbm(cfg)
    probs = sbm_edge_probabilities(cfg)
    rates = []
    for (hits, total), p in zip(_tier_counts(net), probs):
        sd = math.sqrt(total * p * (1 - p))
        assert abs(hits - total * p) <= 4 * sd + 1e-9
        rates.append(hits / total)
    assert rates[0] > rates[1]
    if scale != "within":
        assert rates[1] > rates[2]


def test_single_block_edge_count():
    # K = 1: every pair uses the within-block rate
    cfg = SbmConfig(3000, 1, seed=5, scale="literal")
    m = gen_sbm(cfg).adjacency.n_edges
    mean = 0.2 * (3000 - 1)
    assert abs(m - mean) <= 4 * math.sqrt(mean)


def test_fast_path_matches_bernoulli():
    # tier counts averaged over many small draws match the binomial means
    cfg = SbmConfig(40, 8, scale="degree")
    probs = sbm_edge_probabilities(cfg)
    acc = np.zeros(3)
    tot = np.zeros(3)
    reps = 400
    for s in range(reps):
        net = gen_sbm(SbmConfig(40, 8, seed=s, scale="degree"))
        for t, (hits, total) in enumerate(_tier_counts(net)):
            acc[t] += hits
            tot[t] += total
    for t in range(3):
        mean = tot[t] * probs[t]
        sd = math.sqrt(tot[t] * probs[t] * (1 - probs[t]))
        assert abs(acc[t] - mean) <= 4 * sd


def test_sbm_determinism_and_no_loops():
    a = gen_sbm(SbmConfig(2000, 200, seed=11))
    b = gen_sbm(SbmConfig(2000, 200, seed=11))
    assert (a.adjacency.matrix != b.adjacency.matrix).nnz == 0
    assert np.array_equal(a.labels, b.labels)
    assert not a.adjacency.matrix.diagonal().any()
    assert set(np.unique(a.labels)) <= set(range(200))


def test_lsm_link_probability():
    assert lsm_link_probability(5.0, 1.0, 0.0, 1.0, 1.0, 10.0) == pytest.approx(
        1 / (1 + math.exp(-5)), abs=1e-12
    )
    assert lsm_link_probability(5.0, 0.0, 0.0, 0.0, 1e6, 1.0) < 1e-300


def test_lsm_affinity_and_determinism():
    cfg = LsmConfig(2000, 100, seed=9)
    net = gen_lsm(cfg)
    again = gen_lsm(cfg)
    assert (net.adjacency.matrix != again.adjacency.matrix).nnz == 0
    assert not net.adjacency.matrix.diagonal().any()
    src, dst = net.adjacency.edges()
    same = net.labels[src] == net.labels[dst]
    sizes = np.bincount(net.labels, minlength=100)
    n_same = np.sum(sizes * (sizes - 1))
    n_cross = 2000 * 1999 - n_same
    assert same.sum() / n_same > (~same).sum() / n_cross
    assert net.latent.shape == (2000,)


def test_lsm_window_loses_nothing():
    # the windowed generator against a full pairwise draw: edge counts agree
    cfg = LsmConfig(300, 10, seed=1)
    z_scale = 300 / 10
    counts = []
    full = []
    for s in range(30):
        net = gen_lsm(LsmConfig(300, 10, seed=s))
        counts.append(net.adjacency.n_edges)
        z, lab = net.latent, net.labels
        alpha = np.where(lab[:, None] == lab[None, :], cfg.alpha_within, cfg.alpha_between)
        # expected count given z, integrating the covariate numerically
        x = np.random.default_rng(s).standard_normal((20,))
        p = np.mean(
            [lsm_link_probability(alpha, 1.0, xi, z[:, None], z[None, :], z_scale) for xi in x],
            axis=0,
        )
        np.fill_diagonal(p, 0)
        full.append(p.sum())
    assert abs(np.mean(counts) - np.mean(full)) <= 0.05 * np.mean(full)


def test_labels_round_trip():
    lab = np.array([2, 0, 1, 1])
    buf = io.StringIO()
    write_labels(lab, buf)
    assert buf.getvalue() == "0\t2\n1\t0\n2\t1\n3\t1\n"
    assert load_labels(io.StringIO(buf.getvalue())).tolist() == lab.tolist()
    with pytest.raises(ParseError):
        load_labels(io.StringIO("0\t1\n2\t1\n"))
    with pytest.raises(ParseError, match="line 1"):
        load_labels(io.StringIO("0 1 2\n"))
