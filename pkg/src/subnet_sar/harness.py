"""Monte Carlo driver: repeated generate / sample / fit cycles and their summary.

Every random draw comes from ``default_rng([base_seed, cell, rho_index,
replication, stage])``, so a report depends only on the configuration and
not on scheduling or thread count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dgp import DgpConfig, ErrorDist, draw_errors, gen_response
from .errors import ConfigError, SubnetSARError
from .inference import SeVariant, bootstrap_se, confidence_interval, plugin_se, se_ingredients
from .netcore import AdjacencyMatrix, extract_selection, row_normalize
from .netgen import LsmConfig, SbmConfig, gen_lsm, gen_sbm
from .qmle import FitOptions, fit
from .sampler import Method, SamplerSpec, sample

__all__ = [
    "NETWORKS",
    "ExperimentConfig",
    "CellResult",
    "MCReport",
    "run_cell",
    "run_experiment",
    "emit_report",
    "CSV_COLUMNS",
]

NETWORKS = ("sbm", "lsm", "edgelist")
CSV_COLUMNS = (
    "network", "N", "K", "method", "rho", "bias", "se_hat", "se", "ecp", "cpu_s", "n_fail",
)
_BT_COLUMNS = ("se_bt", "ecp_bt")
FAIL_WARN_FRACTION = 0.01

# substream stages
_NET, _ERR, _SAMPLE, _BOOT = range(4)


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation cell family: a network model and a grid of ``rho``.

    ``adjacency`` and ``labels`` are only used with ``network="edgelist"``;
    the CLI fills them from files.  ``sbm_scale`` is passed to
    :class:`SbmConfig`.
    """

    network: str = "sbm"
    n_nodes: int = 10_000
    n_blocks: int = 1000
    rho_grid: Tuple[float, ...] = (0.0, 0.2, 0.4, 0.6)
    error_dist: ErrorDist = ErrorDist.EXP
    method: Method = Method.SNOW
    n_seeds: int = 5
    k: int = 5
    p_ff: float = 0.25
    p_rw: float = 0.75
    subsample_ratio: float = 0.01
    replications: int = 500
    base_seed: int = 0
    se_variant: SeVariant = SeVariant.LEMMA2
    bootstrap_B: Optional[int] = None
    level: float = 0.95
    sbm_scale: str = "within"
    beta: float = 1.0
    alpha_within: float = 5.0
    alpha_between: float = 1.0
    threads: int = 1
    adjacency: Optional[AdjacencyMatrix] = field(default=None, repr=False, compare=False)
    labels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        net = str(self.network).lower()
        if net not in NETWORKS:
            raise ConfigError(f"network must be one of {NETWORKS}")
        object.__setattr__(self, "network", net)
        object.__setattr__(self, "rho_grid", tuple(float(r) for r in self.rho_grid))
        object.__setattr__(self, "error_dist", ErrorDist.parse(self.error_dist))
        object.__setattr__(self, "method", Method.parse(self.method))
        object.__setattr__(self, "se_variant", SeVariant.parse(self.se_variant))
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if any(not abs(r) < 1 for r in self.rho_grid):
            raise ConfigError("every rho must lie in (-1, 1)")
        if not 0 < self.subsample_ratio <= 1:
            raise ConfigError("subsample_ratio must lie in (0, 1]")
        if self.bootstrap_B is not None and self.bootstrap_B < 2:
            raise ConfigError("bootstrap_B must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if net == "edgelist":
            if self.adjacency is None:
                raise ConfigError("edgelist experiments need an adjacency matrix")
            object.__setattr__(self, "n_nodes", self.adjacency.n_nodes)
            k = 0 if self.labels is None else int(np.unique(self.labels).size)
            object.__setattr__(self, "n_blocks", k)
        if self.method is Method.CS and net == "edgelist" and self.labels is None:
            raise ConfigError("cluster sampling on an edge list needs labels")

    @property
    def sample_size(self) -> int:
        return max(2, int(round(self.subsample_ratio * self.n_nodes)))

    @classmethod
    def from_dict(cls, d: dict, adjacency=None, labels=None) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)} - {"adjacency", "labels"}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d, adjacency=adjacency, labels=labels)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in ("adjacency", "labels"):
                continue
            v = getattr(self, f.name)
            out[f.name] = v.value if hasattr(v, "value") else (list(v) if isinstance(v, tuple) else v)
        return out


@dataclass
class CellResult:
    network: str
    N: int
    K: int
    method: str
    rho: float
    bias: float
    se_hat: float
    se: float
    ecp: float
    cpu_s: float
    n_fail: int
    se_bt: Optional[float] = None
    ecp_bt: Optional[float] = None
    estimates: List[float] = field(default_factory=list)
    se_hats: List[float] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    @property
    def unreliable(self) -> bool:
        m = len(self.estimates) + self.n_fail
        return m > 0 and self.n_fail / m > FAIL_WARN_FRACTION


@dataclass
class MCReport:
    rows: List[CellResult] = field(default_factory=list)
    config: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "MCReport":
        return cls([CellResult(**r) for r in d.get("rows", [])], d.get("config"))


@dataclass
class _Rep:
    rho_hat: float = math.nan
    se: float = math.nan
    covered: bool = False
    cpu: float = 0.0
    se_bt: float = math.nan
    covered_bt: bool = False
    error: Optional[str] = None


def _stream(cfg, cell, rho_idx, m, stage):
    return np.random.default_rng([cfg.base_seed, cell, rho_idx, m, stage])


def _network(cfg, seed_key):
    if cfg.network == "edgelist":
        return cfg.adjacency, cfg.labels
    if cfg.network == "sbm":
        g = gen_sbm(SbmConfig(cfg.n_nodes, cfg.n_blocks, seed=seed_key, scale=cfg.sbm_scale))
    else:
        g = gen_lsm(LsmConfig(
            cfg.n_nodes, cfg.n_blocks, beta=cfg.beta, alpha_within=cfg.alpha_within,
            alpha_between=cfg.alpha_between, seed=seed_key,
        ))
    return g.adjacency, g.labels


def _sampler_spec(cfg, labels):
    return SamplerSpec(
        cfg.method, cfg.sample_size, n_seeds=cfg.n_seeds, k=cfg.k, p_ff=cfg.p_ff,
        p_rw=cfg.p_rw, cluster_labels=labels if cfg.method is Method.CS else None,
    )


def _replicate(cfg, rho, cell, rho_idx, m, fixed, fit_opts) -> _Rep:
    rep = _Rep()
    try:
        if fixed is None:
            adj, labels = _network(cfg, [cfg.base_seed, cell, rho_idx, m, _NET])
            W = row_normalize(adj)
        else:
            adj, labels, W = fixed
        e = draw_errors(cfg.error_dist, adj.n_nodes, _stream(cfg, cell, rho_idx, m, _ERR))
        y = gen_response(W, DgpConfig(rho, cfg.error_dist), e).y
        spec = _sampler_spec(cfg, labels)
        s1 = sample(adj, spec, rng=_stream(cfg, cell, rho_idx, m, _SAMPLE))
        sel = extract_selection(W, s1)
        y1 = y[sel.nodes]

        t0 = time.thread_time()
        res = fit(y1, sel.w11, fit_opts)
        ing = se_ingredients(res.rho_hat, res.sigma2_hat, y1, sel.w11)
        se = plugin_se(ing, variant=cfg.se_variant)
        ci = confidence_interval(res.rho_hat, se, cfg.level)
        rep.cpu = time.thread_time() - t0

        rep.rho_hat, rep.se = res.rho_hat, se
        rep.covered = ci.ci_lo <= rho <= ci.ci_hi
        if cfg.bootstrap_B:
            bt = bootstrap_se(
                adj, W, y, spec, cfg.bootstrap_B,
                rng=_stream(cfg, cell, rho_idx, m, _BOOT), fit_opts=fit_opts,
            )
            ci_bt = confidence_interval(res.rho_hat, bt.se_bt, cfg.level)
            rep.se_bt = bt.se_bt
            rep.covered_bt = ci_bt.ci_lo <= rho <= ci_bt.ci_hi
    except (SubnetSARError, np.linalg.LinAlgError) as exc:
        rep.error = f"replication {m}: {type(exc).__name__}: {exc}"
    return rep


def _mean(xs):
    return math.fsum(xs) / len(xs) if xs else math.nan


def run_cell(cfg: ExperimentConfig, rho: float, cell: int = 0, rho_idx: int = 0,
             fit_opts: Optional[FitOptions] = None) -> CellResult:
    """Run ``cfg.replications`` replications at one ``rho`` and summarise.

    Synthetic networks are redrawn in every replication; an edge list stays
    fixed while errors and samples are redrawn.  ``se`` is the spread of the
    estimates with divisor ``M``.  Failed replications are counted, left out
    of every average, and trigger a warning above 1% of ``M``.
    """
    fixed = None
    if cfg.network == "edgelist":
        fixed = (cfg.adjacency, cfg.labels, row_normalize(cfg.adjacency))

    def one(m):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return _replicate(cfg, rho, cell, rho_idx, m, fixed, fit_opts)

    ms = range(cfg.replications)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            reps = list(pool.map(one, ms))
    else:
        reps = [one(m) for m in ms]

    ok = [r for r in reps if r.error is None]
    failures = [r.error for r in reps if r.error is not None]
    est = [r.rho_hat for r in ok]
    rho_bar = _mean(est)
    se = math.sqrt(_mean([(x - rho_bar) ** 2 for x in est])) if est else math.nan
    out = CellResult(
        network=cfg.network,
        N=int(cfg.n_nodes),
        K=int(cfg.n_blocks),
        method=cfg.method.value,
        rho=float(rho),
        bias=rho_bar - rho,
        se_hat=_mean([r.se for r in ok]),
        se=se,
        ecp=_mean([float(r.covered) for r in ok]),
        cpu_s=_mean([r.cpu for r in ok]),
        n_fail=len(failures),
        estimates=est,
        se_hats=[r.se for r in ok],
        failures=failures,
    )
    if cfg.bootstrap_B:
        out.se_bt = _mean([r.se_bt for r in ok])
        out.ecp_bt = _mean([float(r.covered_bt) for r in ok])
    if out.unreliable:
        warnings.warn(
            f"{out.n_fail} of {cfg.replications} replications failed at rho={rho}",
            RuntimeWarning, stacklevel=2,
        )
    return out


def run_experiment(cfg, fit_opts: Optional[FitOptions] = None) -> MCReport:
    """Run every ``rho`` of one config, or every config of a sequence.

    The position in the sequence is the cell id of the RNG substreams.
    """
    cfgs: Sequence[ExperimentConfig] = [cfg] if isinstance(cfg, ExperimentConfig) else list(cfg)
    rows = []
    for cell, c in enumerate(cfgs):
        for i, rho in enumerate(c.rho_grid):
            rows.append(run_cell(c, rho, cell=cell, rho_idx=i, fit_opts=fit_opts))
    conf = cfgs[0].to_dict() if len(cfgs) == 1 else [c.to_dict() for c in cfgs]
    return MCReport(rows, conf)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_report(report: MCReport, fmt: str = "csv") -> bytes:
    """Serialise a report as CSV (6 significant digits) or JSON (lossless)."""
    fmt = fmt.lower()
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")
    if fmt != "csv":
        raise ConfigError(f"unknown report format {fmt!r}")
    cols = list(CSV_COLUMNS)
    if any(r.se_bt is not None for r in report.rows):
        cols += list(_BT_COLUMNS)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue().encode("utf-8")
