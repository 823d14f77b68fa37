"""Synthetic directed networks: stochastic block model and latent space model.

Both generators return the adjacency matrix together with the block /
cluster labels, which the cluster sampler needs.  Labels are 0-based here;
only label differences enter the edge probabilities, so the offset is
immaterial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ParseError
from .netcore import AdjacencyMatrix

__all__ = [
    "SBM_SCALES",
    "SbmConfig",
    "LsmConfig",
    "GeneratedNetwork",
    "sbm_edge_probabilities",
    "gen_sbm",
    "gen_lsm",
    "lsm_link_probability",
    "write_labels",
    "load_labels",
]

# pairs whose link probability is bounded by exp(-_LSM_TAIL) are skipped;
# summed over 1e10 ordered pairs this leaves < 1e-9 expected missing edges
_LSM_TAIL = 45.0


@dataclass(frozen=True)
class GeneratedNetwork:
    adjacency: AdjacencyMatrix
    labels: np.ndarray
    latent: Optional[np.ndarray] = None


SBM_SCALES = ("within", "block", "degree", "literal")


@dataclass(frozen=True)
class SbmConfig:
    """Stochastic block model settings.

    Pairs in the same block, in adjacent blocks (``|c_i - c_j| = 1``) and in
    all other blocks get three different edge probabilities.  ``scale``
    decides how they depend on ``N`` and the block size ``s = N / K``:

    ``"within"`` (default)
        The same-block rate ``0.2 N**-1`` times ``10 K``, which is ``2 / s``,
        so a node has about ``2 (s - 1) / s`` same-block out-edges (1.8 at
        ``s = 10``) whatever ``N``.  The two cross-block tiers stay at
        ``0.2 N**-1.5`` and ``0.2 N**-2``, so blocks are nearly isolated.
    ``"block"``
        All three tier formulas times ``10 K``.  On top of the within-block
        edges each node gets about ``2 / s`` far-tier edges.
    ``"degree"``
        The tier formulas times ``N``: ``0.2``, ``0.2 N**-0.5`` and
        ``0.2 N**-1``.  The within-block degree grows linearly in ``s``.
    ``"literal"``
        ``0.2 N**-1``, ``0.2 N**-1.5`` and ``0.2 N**-2``.  Expected out-degree
        is about ``0.2 / K``, so nearly every node is isolated.
    """

    n_nodes: int
    n_blocks: int
    seed: Optional[int] = None
    scale: str = "within"

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ConfigError("SBM needs at least two nodes")
        if self.n_blocks < 1:
            raise ConfigError("SBM needs at least one block")
        if self.scale not in SBM_SCALES:
            raise ConfigError(f"unknown SBM scale {self.scale!r}")


@dataclass(frozen=True)
class LsmConfig:
    """Latent space model settings (latent positions have unit variance)."""

    n_nodes: int
    n_blocks: int
    beta: float = 1.0
    alpha_within: float = 5.0
    alpha_between: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ConfigError("LSM needs at least two nodes")
        if self.n_blocks < 1:
            raise ConfigError("LSM needs at least one cluster")


def sbm_edge_probabilities(cfg: SbmConfig):
    """Return ``(p_within, p_adjacent, p_far)`` for ``cfg``."""
    n = float(cfg.n_nodes)
    probs = [0.2 / n, 0.2 * n ** -1.5, 0.2 * n ** -2.0]
    if cfg.scale == "within":
        probs[0] *= 10.0 * cfg.n_blocks
    elif cfg.scale == "block":
        probs = [p * 10.0 * cfg.n_blocks for p in probs]
    elif cfg.scale == "degree":
        probs = [p * n for p in probs]
    return tuple(min(p, 1.0) for p in probs)


def _random_labels(n, k, rng):
    return rng.integers(0, k, size=n)


def _pick(rng, total, p):
    """Uniform subset of ``range(total)`` with Binomial(total, p) size."""
    if total <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    m = rng.binomial(total, p)
    if m == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(total, size=m, replace=False)).astype(np.int64)


def _within_pairs(rng, members, starts, sizes, p):
    per_block = sizes * (sizes - 1)
    offsets = np.concatenate([[0], np.cumsum(per_block)])
    idx = _pick(rng, int(offsets[-1]), p)
    if idx.size == 0:
        return idx, idx
    b = np.searchsorted(offsets, idx, side="right") - 1
    t = idx - offsets[b]
    s = sizes[b]
    u, r = np.divmod(t, s - 1)
    v = np.where(r < u, r, r + 1)
    return members[starts[b] + u], members[starts[b] + v]


def _adjacent_pairs(rng, members, starts, sizes, p):
    # ordered pairs between block b and b+1, both directions
    prod = sizes[:-1] * sizes[1:]
    per = 2 * prod
    offsets = np.concatenate([[0], np.cumsum(per)])
    idx = _pick(rng, int(offsets[-1]), p)
    if idx.size == 0:
        return idx, idx
    b = np.searchsorted(offsets, idx, side="right") - 1
    t = idx - offsets[b]
    direction, t = np.divmod(t, prod[b])
    u, v = np.divmod(t, sizes[b + 1])
    lo = members[starts[b] + u]
    hi = members[starts[b + 1] + v]
    fwd = direction == 0
    return np.where(fwd, lo, hi), np.where(fwd, hi, lo)


def _far_pairs(rng, labels, total, p):
    n = labels.size
    m = rng.binomial(total, p) if total > 0 and p > 0 else 0
    if m == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e
    keys = np.empty(0, dtype=np.int64)
    while keys.size < m:
        need = m - keys.size
        draw = max(2 * need, 64)
        i = rng.integers(0, n, size=draw)
        j = rng.integers(0, n, size=draw)
        ok = np.abs(labels[i] - labels[j]) > 1
        cand = i[ok] * n + j[ok]
        # keep first occurrences so the subset stays uniform
        merged = np.concatenate([keys, cand])
        _, first = np.unique(merged, return_index=True)
        keys = merged[np.sort(first)][:m]
    return np.divmod(keys, n)


def gen_sbm(cfg: SbmConfig) -> GeneratedNetwork:
    """Draw a directed stochastic block model network.

    Every ordered pair ``i != j`` is an independent Bernoulli trial.  Rather
    than looping over all ``N**2`` pairs, each probability tier draws its
    edge count from the binomial law and then a uniform subset of that many
    pairs, which has the same distribution.
    """
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.n_nodes, cfg.n_blocks
    labels = _random_labels(n, k, rng)
    p_in, p_adj, p_far = sbm_edge_probabilities(cfg)

    members = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels, minlength=k).astype(np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    s1, d1 = _within_pairs(rng, members, starts, sizes, p_in)
    if k > 1:
        s2, d2 = _adjacent_pairs(rng, members, starts, sizes, p_adj)
    else:
        s2 = d2 = np.empty(0, dtype=np.int64)
    n_within = int(np.sum(sizes * (sizes - 1)))
    n_adj = int(np.sum(2 * sizes[:-1] * sizes[1:]))
    n_far = n * (n - 1) - n_within - n_adj
    s3, d3 = _far_pairs(rng, labels, n_far, p_far)

    adj = AdjacencyMatrix.from_edges(
        np.concatenate([s1, s2, s3]), np.concatenate([d1, d2, d3]), n
    )
    return GeneratedNetwork(adj, labels)


def lsm_link_probability(alpha, beta, x, z_i, z_j, distance_scale):
    """Logistic link ``1 / (1 + exp(-(alpha + beta*x - scale*|z_i - z_j|)))``."""
    c = alpha + beta * np.asarray(x) - distance_scale * np.abs(
        np.asarray(z_i) - np.asarray(z_j)
    )
    return expit(c)


def gen_lsm(cfg: LsmConfig) -> GeneratedNetwork:
    """Draw a directed latent space model network.

    Latent positions are ``Z_i ~ Normal(2 (c_i + 1), 1)`` and each ordered
    pair gets its own standard normal covariate.  Pairs so far apart in the
    latent space that their link probability is below ``exp(-45)`` whatever
    the covariate (in expectation) are never enumerated.
    """
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.n_nodes, cfg.n_blocks
    labels = _random_labels(n, k, rng)
    z = rng.normal(2.0 * (labels + 1), 1.0)
    scale = n / k

    a_max = max(cfg.alpha_within, cfg.alpha_between)
    # E exp(beta X) = exp(beta^2 / 2) bounds the logistic tail
    reach = (a_max + 0.5 * cfg.beta ** 2 + _LSM_TAIL) / scale

    order = np.argsort(z, kind="stable")
    zs = z[order]
    lo = np.searchsorted(zs, zs - reach, side="left")
    hi = np.searchsorted(zs, zs + reach, side="right")

    src_parts, dst_parts = [], []
    chunk = 1 << 20
    pos = 0
    while pos < n:
        # grow the block of source positions until ~chunk candidate pairs
        counts = hi[pos:] - lo[pos:]
        csum = np.cumsum(counts)
        stop = pos + max(1, int(np.searchsorted(csum, chunk, side="right")))
        stop = min(stop, n)
        cnt = hi[pos:stop] - lo[pos:stop]
        pi = np.repeat(np.arange(pos, stop), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        pj = np.repeat(lo[pos:stop], cnt) + offs
        keep = pi != pj
        pi, pj = pi[keep], pj[keep]
        i, j = order[pi], order[pj]
        alpha = np.where(
            labels[i] == labels[j], cfg.alpha_within, cfg.alpha_between
        )
        x = rng.standard_normal(i.size)
        prob = lsm_link_probability(alpha, cfg.beta, x, z[i], z[j], scale)
        hit = rng.random(i.size) < prob
        src_parts.append(i[hit])
        dst_parts.append(j[hit])
        pos = stop

    adj = AdjacencyMatrix.from_edges(
        np.concatenate(src_parts), np.concatenate(dst_parts), n
    )
    return GeneratedNetwork(adj, labels, z)


def write_labels(labels, fh: IO[str]) -> None:
    """Write the ``node<TAB>cluster`` sidecar file."""
    for i, c in enumerate(np.asarray(labels).tolist()):
        fh.write(f"{i}\t{c}\n")


def load_labels(fh: IO[str], n_nodes: Optional[int] = None) -> np.ndarray:
    """Read a ``node<TAB>cluster`` file into a dense label array."""
    nodes, labs = [], []
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'node<TAB>cluster', got {line!r}", lineno)
        try:
            nodes.append(int(parts[0]))
            labs.append(int(parts[1]))
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno)
    size = n_nodes if n_nodes is not None else (max(nodes, default=-1) + 1)
    out = np.full(size, -1, dtype=np.int64)
    out[np.asarray(nodes, dtype=np.int64)] = labs
    if (out < 0).any():
        raise ParseError("label file does not cover every node")
    return out
