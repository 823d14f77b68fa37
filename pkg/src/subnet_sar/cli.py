"""Command line front end.

Each subcommand reads and writes plain files: edge lists, one-value-per-line
node and response files, JSON configs and reports.  Output goes to stdout
unless ``--out`` is given.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
import warnings

import numpy as np

from . import __version__
from .conditions import verify_conditions
from .dgp import DgpConfig, ErrorDist, draw_errors, gen_response, load_response, write_response
from .errors import SubnetSARError
from .harness import ExperimentConfig, emit_report, run_experiment
from .inference import SeVariant, bootstrap_se, confidence_interval, plugin_se, se_ingredients
from .netcore import extract_selection, load_edge_list, row_normalize, write_edge_list
from .netgen import SBM_SCALES, LsmConfig, SbmConfig, gen_lsm, gen_sbm, load_labels, write_labels
from .qmle import fit
from .sampler import Method, SamplerSpec, sample


def _emit(args, data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(args.out, "wb") as fh:
            fh.write(data)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _read_nodes(path):
    with open(path) as fh:
        return np.asarray(
            [int(line) for line in fh if line.strip() and not line.startswith("#")],
            dtype=np.int64,
        )


def _read_labels(path, n_nodes):
    if path is None:
        return None
    with open(path) as fh:
        return load_labels(fh, n_nodes)


def _spec(args, labels):
    return SamplerSpec(
        Method.parse(args.method), args.n, n_seeds=args.seeds, k=args.k,
        p_ff=args.p_ff, p_rw=args.p_rw, cluster_labels=labels,
    )


# subcommands ---------------------------------------------------------------

def cmd_generate(args):
    if args.model == "sbm":
        net = gen_sbm(SbmConfig(args.N, args.K, seed=args.rng, scale=args.scale))
    else:
        net = gen_lsm(LsmConfig(
            args.N, args.K, beta=args.beta, alpha_within=args.alpha_within,
            alpha_between=args.alpha_between, seed=args.rng,
        ))
    buf = io.StringIO()
    write_edge_list(net.adjacency, buf)
    _emit(args, buf.getvalue())
    if args.labels:
        with open(args.labels, "w") as fh:
            write_labels(net.labels, fh)


def cmd_sample(args):
    adj = load_edge_list(args.graph)
    labels = _read_labels(args.labels, adj.n_nodes)
    nodes = sample(adj, _spec(args, labels), rng=args.rng)
    _emit(args, "".join(f"{int(v)}\n" for v in nodes))


def cmd_simulate(args):
    adj = load_edge_list(args.graph)
    W = row_normalize(adj)
    rng = np.random.default_rng(args.rng)
    cfg = DgpConfig(args.rho, ErrorDist.parse(args.errors), neumann_tol=args.tol)
    resp = gen_response(W, cfg, draw_errors(cfg.error_dist, W.n_nodes, rng))
    buf = io.StringIO()
    write_response(resp.y, buf)
    _emit(args, buf.getvalue())


def _load_problem(args):
    adj = load_edge_list(args.graph)
    W = row_normalize(adj)
    with open(args.y) as fh:
        y = load_response(fh)
    if y.size != adj.n_nodes:
        raise SubnetSARError(f"response has {y.size} values for {adj.n_nodes} nodes")
    return adj, W, y


def cmd_estimate(args):
    adj, W, y = _load_problem(args)
    if args.full:
        s1 = np.arange(adj.n_nodes)
    elif args.s1:
        s1 = _read_nodes(args.s1)
    else:
        raise SubnetSARError("give --s1 or --full")
    sel = extract_selection(W, s1)
    y1 = y[sel.nodes]
    res = fit(y1, sel.w11)
    ing = se_ingredients(res.rho_hat, res.sigma2_hat, y1, sel.w11)
    se = plugin_se(ing, variant=SeVariant.parse(args.variant))
    ci = confidence_interval(res.rho_hat, se, args.level)
    _emit(args, _json({
        "rho_hat": res.rho_hat,
        "sigma2_hat": res.sigma2_hat,
        "se": se,
        "ci_lo": ci.ci_lo,
        "ci_hi": ci.ci_hi,
        "iterations": res.iterations,
        "converged": res.converged,
        "n": int(sel.n),
    }))


def cmd_bootstrap(args):
    adj, W, y = _load_problem(args)
    labels = _read_labels(args.labels, adj.n_nodes)
    spec = _spec(args, labels)
    bt = bootstrap_se(adj, W, y, spec, args.B, rng=args.rng)
    _emit(args, _json({
        "se_bt": bt.se_bt,
        "n_success": bt.n_success,
        "n_dropped": bt.n_dropped,
        "estimates": bt.estimates,
    }))


def cmd_verify(args):
    adj = load_edge_list(args.graph)
    W = row_normalize(adj)
    rep = verify_conditions(adj, W, _read_nodes(args.s1), args.rho, restrict=args.restrict)
    _emit(args, _json(rep.to_dict()))


def _config_from_file(path, threads):
    with open(path) as fh:
        raw = json.load(fh)
    items = raw if isinstance(raw, list) else raw.get("cells", [raw])
    cfgs = []
    for d in items:
        d = dict(d)
        graph, labels = d.pop("graph", None), d.pop("labels", None)
        extra = {}
        if graph is not None:
            adj = load_edge_list(graph)
            extra = {"adjacency": adj, "labels": _read_labels(labels, adj.n_nodes)}
            d.setdefault("network", "edgelist")
        if threads is not None:
            d["threads"] = threads
        cfgs.append(ExperimentConfig.from_dict(d, **extra))
    return cfgs


def cmd_mc(args):
    cfgs = _config_from_file(args.config, args.threads)
    if args.replications is not None or args.base_seed is not None:
        fixed = []
        for c in cfgs:
            d = c.to_dict()
            if args.replications is not None:
                d["replications"] = args.replications
            if args.base_seed is not None:
                d["base_seed"] = args.base_seed
            fixed.append(ExperimentConfig(**d, adjacency=c.adjacency, labels=c.labels))
        cfgs = fixed
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        report = run_experiment(cfgs)
    _emit(args, emit_report(report, args.format))


# parser ----------------------------------------------------------------------

def _add_sampler_args(p):
    p.add_argument("--method", default="snow", help="srs, snow, cs, dfs, ff, snowk, rwr or rwj")
    p.add_argument("--n", type=int, required=True, help="subnetwork size")
    p.add_argument("--seeds", type=int, default=5, help="initial seeds for wave methods")
    p.add_argument("--k", type=int, default=5, help="neighbour cap for snowk")
    p.add_argument("--p-ff", type=float, default=0.25, dest="p_ff")
    p.add_argument("--p-rw", type=float, default=0.75, dest="p_rw")
    p.add_argument("--labels", help="node<TAB>cluster file (needed by cs)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for mc")

    ap = argparse.ArgumentParser(prog="subnet-sar", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="draw an SBM or LSM network")
    p.add_argument("--model", choices=("sbm", "lsm"), default="sbm")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--rng", type=int, default=None)
    p.add_argument("--scale", default="within", choices=SBM_SCALES)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--alpha-within", type=float, default=5.0, dest="alpha_within")
    p.add_argument("--alpha-between", type=float, default=1.0, dest="alpha_between")
    p.add_argument("--labels", help="also write node<TAB>cluster labels here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", parents=[common], help="draw a subnetwork node set")
    p.add_argument("--graph", required=True)
    p.add_argument("--rng", type=int, default=None)
    _add_sampler_args(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", parents=[common], help="draw a SAR response on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--errors", default="exp", choices=("exp", "norm"))
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--rng", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="subnetwork QMLE with plug-in SE")
    p.add_argument("--graph", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--s1")
    p.add_argument("--full", action="store_true", help="use every node")
    p.add_argument("--variant", default="lemma2", choices=[v.value for v in SeVariant])
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bootstrap", parents=[common], help="resampling standard error")
    p.add_argument("--graph", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--B", type=int, default=20)
    p.add_argument("--rng", type=int, default=None)
    _add_sampler_args(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("verify-conditions", parents=[common], help="network condition diagnostics")
    p.add_argument("--graph", required=True)
    p.add_argument("--s1", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--restrict", action="store_true",
                   help="stationary vector on the largest strongly connected component")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SubnetSARError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
