"""Subnetwork sampling: SRS, snowball variants, cluster sampling and walks.

Neighbour expansion always follows out-edges: if ``i`` follows ``j`` then
``j`` is a neighbour of ``i``.  Every method returns exactly ``target_n``
distinct nodes.  When a growth step overshoots, a uniform subset of that
step's nodes is kept.  Traversals that run out of unvisited neighbours
restart from a uniformly random unvisited node.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .netcore import AdjacencyMatrix, WeightMatrix

__all__ = [
    "Method",
    "SamplerSpec",
    "SampleResult",
    "draw",
    "sample",
    "wave_trace",
    "bfs_ball",
]

# a walk that adds no new node for this many steps jumps elsewhere
STALL_STEPS = 1000


class Method(str, enum.Enum):
    SRS = "srs"
    SNOW = "snow"
    CS = "cs"
    DFS = "dfs"
    FF = "ff"
    SNOWK = "snowk"
    RWR = "rwr"
    RWJ = "rwj"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown sampling method {value!r}") from None


@dataclass(frozen=True)
class SamplerSpec:
    """What to sample and how.

    ``n_seeds`` applies to the wave methods (SNOW, SNOW-k, FF); ``seed_nodes``
    overrides the random seed choice for every traversal method.
    """

    method: Method
    target_n: int
    n_seeds: int = 5
    k: int = 5
    p_ff: float = 0.25
    p_rw: float = 0.75
    cluster_labels: Optional[np.ndarray] = None
    seed: Optional[int] = None
    seed_nodes: Optional[Sequence[int]] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.target_n < 1:
            raise ConfigError("target_n must be positive")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be positive")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        for name in ("p_ff", "p_rw"):
            p = getattr(self, name)
            if not 0 < p < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.method is Method.CS and self.cluster_labels is None:
            raise ConfigError("cluster sampling needs cluster_labels")


@dataclass
class SampleResult:
    nodes: np.ndarray
    waves: List[int] = field(default_factory=list)
    restarts: int = 0
    short: bool = False


def _csr(graph) -> sp.csr_matrix:
    if isinstance(graph, (AdjacencyMatrix, WeightMatrix)):
        return graph.matrix
    return sp.csr_matrix(graph)


class _State:
    """Selection bookkeeping shared by all traversals."""

    def __init__(self, mat, rng):
        self.indptr = mat.indptr
        self.indices = mat.indices
        self.n_nodes = mat.shape[0]
        self.rng = rng
        self.selected = np.zeros(self.n_nodes, dtype=bool)
        self.order: List[int] = []
        self.waves: List[int] = []
        self.restarts = 0

    def __len__(self):
        return len(self.order)

    def nbrs(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def add(self, nodes):
        for v in nodes:
            v = int(v)
            self.selected[v] = True
            self.order.append(v)

    def add_step(self, new, target):
        """Add one growth step, trimming it uniformly to hit ``target``."""
        new = np.asarray(new, dtype=np.int64)
        self.waves.append(int(new.size))
        room = target - len(self.order)
        if new.size > room:
            keep = np.sort(self.rng.choice(new.size, size=room, replace=False))
            new = new[keep]
        self.add(new)
        return new

    def random_unvisited(self):
        left = self.n_nodes - len(self.order)
        if left <= 0:
            return None
        if left * 2 > self.n_nodes:
            while True:
                v = int(self.rng.integers(self.n_nodes))
                if not self.selected[v]:
                    return v
        return int(self.rng.choice(np.flatnonzero(~self.selected)))


def _initial_seeds(st, spec, count):
    if spec.seed_nodes is not None:
        seeds = np.asarray(spec.seed_nodes, dtype=np.int64)
        if seeds.size == 0 or seeds.min() < 0 or seeds.max() >= st.n_nodes:
            raise ConfigError("seed_nodes out of range")
        if np.unique(seeds).size != seeds.size:
            raise ConfigError("duplicate seed_nodes")
        return seeds
    return st.rng.choice(st.n_nodes, size=min(count, st.n_nodes), replace=False)


def _gather(st, frontier):
    """All out-neighbours of ``frontier`` (with repeats)."""
    f = np.asarray(frontier, dtype=np.int64)
    lo, hi = st.indptr[f], st.indptr[f + 1]
    cnt = hi - lo
    if cnt.sum() == 0:
        return np.empty(0, dtype=np.int64)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    return st.indices[np.repeat(lo, cnt) + offs].astype(np.int64)


def _expand_all(st, frontier):
    cand = np.unique(_gather(st, frontier))
    return cand[~st.selected[cand]]


def _expand_capped(st, frontier, cap_fn):
    picked: List[int] = []
    taken = set()
    for i in frontier:
        nb = st.nbrs(int(i))
        avail = [int(v) for v in nb if not st.selected[v] and int(v) not in taken]
        r = min(cap_fn(), len(avail))
        if r == 0:
            continue
        chosen = st.rng.choice(len(avail), size=r, replace=False)
        for c in sorted(chosen.tolist()):
            taken.add(avail[c])
            picked.append(avail[c])
    return np.asarray(picked, dtype=np.int64)


def _wave_sampler(st, spec, target, expand):
    seeds = _initial_seeds(st, spec, spec.n_seeds)
    frontier = st.add_step(seeds, target)
    while len(st) < target:
        new = expand(st, frontier)
        if new.size == 0:
            v = st.random_unvisited()
            if v is None:
                break
            st.restarts += 1
            new = np.asarray([v])
        frontier = st.add_step(new, target)


def _cluster_sampler(st, spec, target):
    labels = np.asarray(spec.cluster_labels)
    if labels.shape != (st.n_nodes,):
        raise ConfigError("cluster_labels must have one entry per node")
    ids, inv = np.unique(labels, return_inverse=True)
    members = np.argsort(inv, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(inv, minlength=ids.size))])
    for c in st.rng.permutation(ids.size):
        if len(st) >= target:
            break
        st.add_step(members[bounds[c]:bounds[c + 1]], target)


def _dfs_sampler(st, spec, target):
    start = int(_initial_seeds(st, spec, 1)[0])
    st.add_step([start], target)
    stack = [start]
    while len(st) < target:
        if not stack:
            v = st.random_unvisited()
            if v is None:
                break
            st.restarts += 1
            st.add_step([v], target)
            stack = [v]
            continue
        nb = st.nbrs(stack[-1])
        avail = nb[~st.selected[nb]]
        if avail.size:
            nxt = int(avail[st.rng.integers(avail.size)])
            st.add_step([nxt], target)
            stack.append(nxt)
        else:
            stack.pop()


def _walk_sampler(st, spec, target, jump):
    anchor = int(_initial_seeds(st, spec, 1)[0])
    st.add_step([anchor], target)
    cur = anchor
    stall = 0
    while len(st) < target:
        if stall >= STALL_STEPS:
            v = st.random_unvisited()
            if v is None:
                break
            st.restarts += 1
            st.add_step([v], target)
            anchor = cur = v
            stall = 0
            continue
        nb = st.nbrs(cur)
        move = st.rng.random() < spec.p_rw
        if move and nb.size:
            cur = int(nb[st.rng.integers(nb.size)])
            if st.selected[cur]:
                stall += 1
            else:
                st.add_step([cur], target)
                stall = 0
        elif jump:
            v = st.random_unvisited()
            if v is None:
                break
            st.add_step([v], target)
            cur = v
            stall = 0
        else:
            cur = anchor
            stall += 1


def draw(graph, spec: SamplerSpec, rng=None) -> SampleResult:
    """Run the sampler and return the nodes plus per-step diagnostics.

    ``rng`` defaults to a generator seeded with ``spec.seed``.
    """
    mat = _csr(graph)
    n_nodes = mat.shape[0]
    if n_nodes == 0:
        raise ConfigError("graph is empty")
    if spec.target_n > n_nodes:
        raise ConfigError(f"target_n={spec.target_n} exceeds {n_nodes} nodes")
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    st = _State(mat, rng)
    target = spec.target_n
    m = spec.method
    if m is Method.SRS:
        st.add_step(rng.choice(n_nodes, size=target, replace=False), target)
    elif m is Method.SNOW:
        _wave_sampler(st, spec, target, _expand_all)
    elif m is Method.SNOWK:
        _wave_sampler(st, spec, target, lambda s, f: _expand_capped(s, f, lambda: spec.k))
    elif m is Method.FF:
        # failures before the first success: support {0, 1, ...}
        geo = lambda: int(rng.geometric(spec.p_ff)) - 1
        _wave_sampler(st, spec, target, lambda s, f: _expand_capped(s, f, geo))
    elif m is Method.CS:
        _cluster_sampler(st, spec, target)
    elif m is Method.DFS:
        _dfs_sampler(st, spec, target)
    elif m is Method.RWR:
        _walk_sampler(st, spec, target, jump=False)
    elif m is Method.RWJ:
        _walk_sampler(st, spec, target, jump=True)
    nodes = np.asarray(st.order, dtype=np.int64)
    short = nodes.size < target
    if short:
        warnings.warn(f"sample has only {nodes.size} of {target} nodes", RuntimeWarning, stacklevel=2)
    return SampleResult(nodes, st.waves, st.restarts, short)


def sample(graph, spec: SamplerSpec, rng=None) -> np.ndarray:
    """Return the sampled node sequence ``S1``."""
    return draw(graph, spec, rng).nodes


def wave_trace(graph, spec: SamplerSpec, rng=None) -> List[int]:
    """Size of each growth step (before trimming), seeds first."""
    return draw(graph, spec, rng).waves


def bfs_ball(graph, seeds, waves: int, k: Optional[int] = None, rng=None) -> np.ndarray:
    """Nodes reached from ``seeds`` in at most ``waves`` expansion rounds.

    With ``k`` set, each frontier node contributes at most ``k`` random new
    neighbours, as in SNOW-k.  No trimming and no restarts.
    """
    mat = _csr(graph)
    st = _State(mat, np.random.default_rng(rng))
    spec = SamplerSpec(Method.SNOW, mat.shape[0], seed_nodes=list(seeds))
    if k is None:
        expand = _expand_all
    else:
        expand = lambda s, f: _expand_capped(s, f, lambda: k)
    seeds_arr = _initial_seeds(st, spec, len(seeds))
    st.add(seeds_arr)
    frontier = seeds_arr
    for _ in range(waves):
        new = expand(st, frontier)
        if new.size == 0:
            break
        st.add(new)
        frontier = new
    return np.asarray(st.order, dtype=np.int64)
