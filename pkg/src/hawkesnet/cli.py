"""``hawkesnet`` command-line interface.

Settings are resolved as command line > ``--config`` file section > built-in
defaults. Exit codes: 0 success, 2 invalid input, 3 nonconvergence, 4 IO.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings

import numpy as np

from . import bench as bn
from .core import Link, MultiModel, NonConvergenceError, StabilityError
from .crosscov import (cross_covariance, oracle_weights, parse_rule, similarity_matrix,
                       threshold_covariance, uniform_weights, weights_from_counts)
from .estimate import (SolverConfig, default_grid, joint_fit, precompute_design,
                       threshold_edges, tune)
from .infer import TestConfig, hierarchical_test, score_statistics
from .io import (parse_float_list, read_events, read_model, read_weights, write_events,
                 write_model, write_weights)
from .simulate import simulate_multi
from .tree import build_tree, load_tree

log = logging.getLogger("hawkesnet")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "simulate": dict(horizons=None, seed=0, burn_in=None),
    "weights": dict(horizons=None, bin_width=1.0, max_lag=5, rule="pvalue:0.1"),
    "estimate": dict(horizons=None, weights="auto", rho1=None, rho2=None, tune=False,
                     grid=None, link="linear", tau=None, epsilon=1e-3, max_iter=10_000,
                     tol=1e-6, gamma_ebic=1.0, bin_width=1.0, max_lag=5, rule="pvalue:0.1"),
    "tune": dict(horizons=None, weights="auto", grid=None, link="linear", epsilon=1e-3,
                 max_iter=10_000, tol=1e-6, gamma_ebic=1.0, bin_width=1.0, max_lag=5,
                 rule="pvalue:0.1", model_out=None),
    "test": dict(horizons=None, tree="auto", alpha=0.05, node_test="sum", pvalues=None,
                 bin_width=1.0, max_lag=5, rule="pvalue:0.1", gumbel_d=0.5),
    "bench-est": dict(p=20, horizons="200,500,300", seeds=20, seed0=0,
                      strategies="oracle,empirical,uniform,separate", fusion="weak,strong",
                      n_path=20, full=False),
    "bench-test": dict(p=10, ms="1,5,10,20", runs=200, seed0=0, horizon=1000.0,
                       methods="bonferroni,oracle,empirical", alpha=0.05, node_test="sum",
                       null="benchmark", full=False),
}

REQUIRED = {
    "simulate": ("model", "horizons", "out"),
    "weights": ("events", "out"),
    "estimate": ("events", "out"),
    "tune": ("events", "out"),
    "test": ("events", "model", "out"),
    "bench-est": ("out",),
    "bench-test": ("out",),
}


class UsageError(ValueError):
    pass


def _parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with one section per subcommand")
    common.add_argument("--threads", type=int,
                        help="worker threads (default: $HAWKESNET_THREADS or all cores)")
    common.add_argument("--log-level", default="WARNING")

    p = argparse.ArgumentParser(prog="hawkesnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        return sub.add_parser(name, help=help_, parents=[common],
                              argument_default=argparse.SUPPRESS)

    def events(sp):
        sp.add_argument("--events", help="CSV with header experiment,unit,time")
        sp.add_argument("--horizons", help="comma list, one per experiment "
                                            "(default: last event time)")

    def cov(sp):
        sp.add_argument("--bin-width", type=float)
        sp.add_argument("--max-lag", type=int)
        sp.add_argument("--rule", help="pvalue:<cutoff> or abs:<kappa>")

    def solver(sp):
        sp.add_argument("--weights", help="JSON file, auto, uniform or oracle:<model.json>")
        sp.add_argument("--grid", help="JSON list of [rho1, rho2] pairs or 'r1:r2,...'")
        sp.add_argument("--link", choices=["linear", "exp"])
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--max-iter", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--gamma-ebic", type=float)
        cov(sp)

    s = cmd("simulate", "simulate event data from a model")
    s.add_argument("--model")
    s.add_argument("--horizons")
    s.add_argument("--seed", type=int)
    s.add_argument("--burn-in", type=float)
    s.add_argument("--out")

    s = cmd("weights", "similarity weights from cross-covariances")
    events(s)
    cov(s)
    s.add_argument("--out")

    s = cmd("estimate", "joint penalized estimation")
    events(s)
    solver(s)
    s.add_argument("--rho1", type=float)
    s.add_argument("--rho2", type=float)
    s.add_argument("--tune", action="store_true")
    s.add_argument("--tau", type=float, help="threshold (default 2*rho1)")
    s.add_argument("--out")

    s = cmd("tune", "eBIC over a grid of tuning parameters")
    events(s)
    solver(s)
    s.add_argument("--model-out")
    s.add_argument("--out")

    s = cmd("test", "hierarchical testing of every edge")
    events(s)
    cov(s)
    s.add_argument("--model", help="fitted model JSON supplying the plug-in intensity")
    s.add_argument("--tree", help="JSON file, auto or oracle:<model.json>")
    s.add_argument("--alpha", type=float)
    s.add_argument("--node-test", choices=["sum", "max"])
    s.add_argument("--gumbel-d", type=float)
    s.add_argument("--pvalues", help="CSV of node p-values")
    s.add_argument("--out")

    s = cmd("bench-est", "edge-selection benchmark")
    s.add_argument("--p", type=int)
    s.add_argument("--horizons")
    s.add_argument("--seeds", type=int, help="number of replications")
    s.add_argument("--seed0", type=int)
    s.add_argument("--strategies")
    s.add_argument("--fusion")
    s.add_argument("--n-path", type=int)
    s.add_argument("--full", action="store_true", help="p=100 and 100 replications")
    s.add_argument("--out")

    s = cmd("bench-test", "edge-testing benchmark")
    s.add_argument("--p", type=int)
    s.add_argument("--ms", help="comma list of experiment counts")
    s.add_argument("--runs", type=int)
    s.add_argument("--seed0", type=int)
    s.add_argument("--horizon", type=float)
    s.add_argument("--methods")
    s.add_argument("--alpha", type=float)
    s.add_argument("--node-test", choices=["sum", "max"])
    s.add_argument("--null", choices=["benchmark", "all-null"])
    s.add_argument("--full", action="store_true", help="p=100 and 1000 runs")
    s.add_argument("--out")
    return p


def resolve(command, cli: dict) -> dict:
    """Merge defaults, the config-file section and explicit flags."""
    settings = dict(DEFAULTS[command])
    path = cli.get("config")
    if path:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: invalid JSON ({exc})") from None
        section = doc.get(command, {})
        if not isinstance(section, dict):
            raise UsageError(f"{path}: section {command!r} must be an object")
        for key in ("threads", "log_level"):
            if key in doc:
                settings[key] = doc[key]
        settings.update({k.replace("-", "_"): v for k, v in section.items()})
    settings.update({k: v for k, v in cli.items() if k not in ("command", "config")})
    missing = [k for k in REQUIRED[command] if settings.get(k) is None]
    if missing:
        raise UsageError(f"{command}: missing required option(s) "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    if settings.get("threads") is None:
        settings["threads"] = bn.default_threads()
    if int(settings["threads"]) < 1:
        raise UsageError("--threads must be positive")
    return settings


def _horizons(s):
    h = s.get("horizons")
    if h is None:
        return None
    h = parse_float_list(h) if isinstance(h, str) else [float(x) for x in np.atleast_1d(h)]
    if any(not x > 0 for x in h):
        raise UsageError("horizons must be positive")
    return h


def _rule(s):
    return parse_rule(s["rule"]) if isinstance(s["rule"], str) else s["rule"]


def _thresholded(data, s):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [threshold_covariance(cross_covariance(e, s["bin_width"], s["max_lag"]), _rule(s))
                for e in data]


def _weights(data, s):
    choice = s["weights"]
    if data.M < 2:
        return None
    if choice == "auto":
        return weights_from_counts(similarity_matrix(_thresholded(data, s)))
    if choice == "uniform":
        return uniform_weights(data.M)
    if choice == "none":
        return None
    if choice.startswith("oracle:"):
        return oracle_weights(read_model(choice.split(":", 1)[1]).beta)
    W = read_weights(choice)
    if W.M != data.M:
        raise UsageError(f"weights are {W.M} x {W.M} but the data have {data.M} experiments")
    return W


def _grid(s):
    g = s.get("grid")
    if g is None:
        return None
    if isinstance(g, str):
        if g.strip().startswith("["):
            g = json.loads(g)
        elif ":" in g:
            g = [tuple(float(x) for x in pair.split(":")) for pair in g.split(",")]
        else:
            with open(g) as fh:
                g = json.load(fh)
    grid = [tuple(map(float, pair)) for pair in g]
    if not grid or any(len(pair) != 2 or min(pair) < 0 for pair in grid):
        raise UsageError("grid must be a nonempty list of nonnegative (rho1, rho2) pairs")
    return grid


def _solver(s):
    return SolverConfig(float(s["epsilon"]), int(s["max_iter"]), float(s["tol"]))


def cmd_simulate(s):
    model = read_model(s["model"])
    h = _horizons(s)
    if len(h) == 1:
        h *= model.M
    if len(h) != model.M:
        raise UsageError(f"{len(h)} horizons for a model with {model.M} experiments")
    data = simulate_multi(model, h, int(s["seed"]), s.get("burn_in"))
    write_events(data, s["out"])
    log.info("wrote %d events", sum(int(e.counts.sum()) for e in data))


def cmd_weights(s):
    data = read_events(s["events"], _horizons(s))
    if data.M < 2:
        raise UsageError("similarity weights need at least two experiments")
    counts = similarity_matrix(_thresholded(data, s))
    W = weights_from_counts(counts)
    write_weights(W, s["out"], {"edge_counts": np.diag(counts).tolist()})


def cmd_estimate(s):
    data = read_events(s["events"], _horizons(s))
    link = Link.parse(s["link"])
    tuned = bool(s["tune"])
    if not tuned and s["rho1"] is None:
        raise UsageError("estimate: give --rho1 (and --rho2) or --tune")
    W = _weights(data, s)
    design = precompute_design(data, link=link)
    if tuned:
        res = tune(design, W, _grid(s), link, _solver(s), gamma_ebic=s["gamma_ebic"])
        fit = res.fit
    else:
        rho2 = s["rho2"] if s["rho2"] is not None else s["rho1"]
        fit = joint_fit(design, W, s["rho1"], rho2, link, _solver(s))
    if not fit.all_converged:
        raise NonConvergenceError("solver did not converge; raise --max-iter or --tol")
    tau = 2 * fit.rho1 if s["tau"] is None else float(s["tau"])
    beta = threshold_edges(fit, tau)
    model = fit.as_model()
    out = MultiModel(model.mu, beta, model.kernel, model.link)
    write_model(out, s["out"], {"rho1": fit.rho1, "rho2": fit.rho2, "tau": tau,
                                "weights": None if W is None else W.W.tolist()})


def cmd_tune(s):
    data = read_events(s["events"], _horizons(s))
    link = Link.parse(s["link"])
    W = _weights(data, s)
    design = precompute_design(data, link=link)
    res = tune(design, W, _grid(s), link, _solver(s), gamma_ebic=s["gamma_ebic"])
    with open(s["out"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("rho1", "rho2", "ebic"))
        for r1, r2, e in res.table:
            w.writerow((repr(r1), repr(r2), repr(e)))
    if s.get("model_out"):
        write_model(res.fit.as_model(), s["model_out"], {"rho1": res.best[0], "rho2": res.best[1]})


def cmd_test(s):
    data = read_events(s["events"], _horizons(s))
    model = read_model(s["model"])
    if (model.M, model.p) != (data.M, data.p):
        raise UsageError(f"model is {model.M} experiments x {model.p} units, "
                         f"data are {data.M} x {data.p}")
    choice = s["tree"]
    if choice == "auto":
        thr = _thresholded(data, s)
        S = similarity_matrix(thr)
        counts = np.diag(S).copy()
        np.fill_diagonal(S, 0)
        trees = build_tree(S, counts)
    elif choice.startswith("oracle:"):
        trees = bn.edge_trees(read_model(choice.split(":", 1)[1]).beta)
    else:
        trees = load_tree(choice)
        if trees.M != data.M:
            raise UsageError(f"tree covers {trees.M} experiments, data have {data.M}")
    cfg = TestConfig(float(s["alpha"]), s["node_test"], gumbel_d=float(s["gumbel_d"]))
    stats = score_statistics(data, model)
    rej = hierarchical_test(trees, stats, cfg)
    p = data.p
    with open(s["out"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge"] + [str(m) for m in range(1, data.M + 1)])
        for k in range(p * p):
            w.writerow([f"{k % p + 1}->{k // p + 1}"] + rej.Z[k].tolist())
    if s.get("pvalues"):
        with open(s["pvalues"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("edge", "level", "node_set", "p"))
            for k, level, node, pv in rej.node_pvalues:
                w.writerow((f"{k % p + 1}->{k // p + 1}", level, ";".join(map(str, node)),
                            repr(pv)))


def _list(x, cast=str):
    if isinstance(x, str):
        return tuple(cast(v) for v in x.split(",") if v.strip())
    return tuple(cast(v) for v in x)


def cmd_bench_est(s):
    p, n = (100, 100) if s["full"] else (int(s["p"]), int(s["seeds"]))
    horizons = _list(s["horizons"], float)
    cfg = bn.BenchConfig(p=p, M=len(horizons), horizons=horizons,
                         seeds=tuple(range(int(s["seed0"]), int(s["seed0"]) + n)),
                         strategies=_list(s["strategies"]), fusion=_list(s["fusion"]),
                         n_path=int(s["n_path"]), threads=int(s["threads"]))
    bn.emit_plot_data(bn.run_benchmark_estimation(cfg), s["out"])


def cmd_bench_test(s):
    p, n = (100, 1000) if s["full"] else (int(s["p"]), int(s["runs"]))
    cfg = bn.BenchConfig(p=p, seeds=tuple(range(int(s["seed0"]), int(s["seed0"]) + n)),
                         testing_Ms=_list(s["ms"], int), testing_horizon=float(s["horizon"]),
                         methods=_list(s["methods"]), alpha=float(s["alpha"]),
                         node_test=s["node_test"], null=s["null"], threads=int(s["threads"]))
    bn.emit_plot_data(bn.run_benchmark_testing(cfg), s["out"])


COMMANDS = {
    "simulate": cmd_simulate,
    "weights": cmd_weights,
    "estimate": cmd_estimate,
    "tune": cmd_tune,
    "test": cmd_test,
    "bench-est": cmd_bench_est,
    "bench-test": cmd_bench_test,
}


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    cli = vars(ns)
    command = cli.pop("command")
    try:
        s = resolve(command, cli)
        logging.basicConfig(level=str(s.get("log_level", "WARNING")).upper(),
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[command](s)
    except NonConvergenceError as exc:
        print(f"hawkesnet {command}: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (OSError, csv.Error) as exc:
        print(f"hawkesnet {command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, StabilityError, KeyError, TypeError) as exc:
        print(f"hawkesnet {command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
