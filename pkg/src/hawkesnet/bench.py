"""Monte Carlo benchmarks for edge selection and for edge testing.

Results are tidy records ``(strategy, rho1, rho2, metric, value, stderr,
seed_count)``; see :func:`emit_plot_data`.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Link, MultiModel, NonConvergenceError
from .crosscov import (cross_covariance, oracle_weights, similarity_matrix,
                       similarity_weights, threshold_covariance, uniform_weights)
from .estimate import (PrecomputedDesign, SolverConfig, default_grid, ebic, joint_fit,
                       precompute_design, threshold_edges, tune)
from .infer import (TestConfig, bonferroni_test, hierarchical_test,
                    score_statistics)
from .simulate import default_layouts, make_benchmark_networks, simulate_multi
from .tree import SimilarityTree, build_tree, oracle_tree

logger = logging.getLogger(__name__)

__all__ = [
    "BenchConfig",
    "BenchReport",
    "PLOT_COLUMNS",
    "run_benchmark_estimation",
    "run_benchmark_testing",
    "emit_plot_data",
    "read_plot_data",
    "normalized_auc",
    "max_rho1",
    "testing_model",
    "edge_trees",
    "default_threads",
]

PLOT_COLUMNS = ("strategy", "rho1", "rho2", "metric", "value", "stderr", "seed_count")
STRATEGIES = ("oracle", "empirical", "uniform", "separate")
FUSION = {"weak": 1.0, "strong": 10.0}
TEST_METHODS = ("bonferroni", "oracle", "empirical")


def default_threads():
    env = os.environ.get("HAWKESNET_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("HAWKESNET_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BenchConfig:
    p: int = 20
    M: int = 3
    layouts: tuple = None
    horizons: tuple = (200.0, 500.0, 300.0)
    seeds: tuple = tuple(range(20))
    strategies: tuple = STRATEGIES
    fusion: tuple = ("weak", "strong")
    n_path: int = 20
    path_span: float = 1e-3
    tau: str = "2rho1"               # or a number
    bin_width: float = 1.0
    max_lag: int = 5
    rule: object = None              # threshold rule for cross-covariances
    alpha: float = 0.05
    node_test: str = "sum"
    testing_Ms: tuple = (1, 5, 10, 20)
    testing_horizon: float = 1000.0
    testing_grid: int = 8            # rho1 values tried when tuning the plug-in fit
    methods: tuple = TEST_METHODS
    null: str = "benchmark"          # "benchmark" or "all-null"
    circle: float = 0.3
    star: float = 0.6
    mu: float = 0.2
    solver: SolverConfig = field(default_factory=SolverConfig)
    threads: int = 1
    max_failure: float = 0.2

    def __post_init__(self):
        if len(self.seeds) < 1:
            raise ValueError("need at least one replication")
        if not self.strategies:
            raise ValueError("strategies must be nonempty")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad:
            raise ValueError(f"unknown strategies {sorted(bad)}")
        bad = set(self.fusion) - set(FUSION)
        if bad:
            raise ValueError(f"unknown fusion strengths {sorted(bad)}")
        bad = set(self.methods) - set(TEST_METHODS) - {"scrambled"}
        if bad:
            raise ValueError(f"unknown testing methods {sorted(bad)}")
        if self.null not in ("benchmark", "all-null"):
            raise ValueError("null must be 'benchmark' or 'all-null'")

    @property
    def replications(self) -> int:
        return len(self.seeds)

    def model(self) -> MultiModel:
        layouts = self.layouts or default_layouts(self.p, circle=self.circle, star=self.star,
                                                  n_experiments=self.M)
        return make_benchmark_networks(self.p, layouts, self.mu)


@dataclass
class BenchReport:
    records: list = field(default_factory=list)
    per_seed: dict = field(default_factory=dict)      # (strategy, metric) -> {seed: value}
    failures: dict = field(default_factory=dict)

    def add(self, strategy, rho1, rho2, metric, values):
        v = np.asarray(values, dtype=float)
        n = v.size
        se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        self.records.append((strategy, float(rho1), float(rho2), metric,
                             float(v.mean()) if n else float("nan"), se, n))

    def value(self, strategy, metric, rho1=None):
        for r in self.records:
            if r[0] == strategy and r[3] == metric and (rho1 is None or r[1] == rho1):
                return r[4]
        raise KeyError((strategy, metric))

    def stderr(self, strategy, metric):
        for r in self.records:
            if r[0] == strategy and r[3] == metric:
                return r[5]
        raise KeyError((strategy, metric))


def _map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return {k: fn(k) for k in items}
    with ThreadPoolExecutor(threads) as pool:
        return dict(zip(items, pool.map(fn, items)))


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


def max_rho1(design: PrecomputedDesign) -> float:
    """Smallest ``rho1`` at which every connectivity estimate is zero."""
    T = design.total_horizon
    top = 0.0
    for d in design.designs:
        mu = d.gamma[:, 0] / d.horizon
        grad = d.gamma[:, 1:] - mu[:, None] * d.Q[0, 1:][None, :]
        top = max(top, float(np.abs(grad).max()) / T)
    return top


def normalized_auc(fp, tp, n_neg, n_pos) -> float:
    """Area under the TP-vs-FP curve with both axes scaled to [0, 1].

    The curve is closed with (0, 0) and (1, 1) and made monotone.
    """
    x = np.concatenate([[0.0], np.asarray(fp, float) / n_neg, [1.0]])
    y = np.concatenate([[0.0], np.asarray(tp, float) / n_pos, [1.0]])
    order = np.lexsort((y, x))
    x, y = x[order], np.maximum.accumulate(y[order])
    return float(np.trapezoid(y, x))


def _empirical_weights(data, config):
    thr = [threshold_covariance(cross_covariance(e, config.bin_width, config.max_lag),
                                config.rule) for e in data]
    return similarity_weights(thr), thr


def _strategy_runs(config):
    runs = []
    for s in config.strategies:
        if s == "separate" or config.M < 2:
            runs.append((s, s, 0.0))
        else:
            runs += [(f"{s}-{f}", s, FUSION[f]) for f in config.fusion]
    return runs


def _estimation_seed(seed, config, model):
    truth = model.beta != 0
    data = simulate_multi(model, config.horizons, seed)
    design = precompute_design(data, model.kernel)
    top = max_rho1(design)
    path = np.geomspace(top, top * config.path_span, config.n_path)
    weights = {"oracle": oracle_weights(model.beta).W if config.M > 1 else None,
               "uniform": uniform_weights(config.M).W if config.M > 1 else None,
               "separate": None}
    if "empirical" in config.strategies and config.M > 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            weights["empirical"] = _empirical_weights(data, config)[0].W
    out = {}
    fits = failed = 0
    for name, strat, ratio in _strategy_runs(config):
        W = weights[strat]
        tp, fp, crit = [], [], []
        theta = None
        for r1 in path:
            fit = joint_fit(design, W, r1, ratio * r1, config=config.solver, theta0=theta)
            theta = fit.theta
            fits += 1
            failed += int(not fit.all_converged)
            tau = 2 * r1 if config.tau == "2rho1" else float(config.tau)
            est = threshold_edges(fit, tau) != 0
            tp.append(int((est & truth).sum()))
            fp.append(int((est & ~truth).sum()))
            # the marked point is the thresholded estimate, so count its support
            crit.append(ebic(fit, design, tol=tau))
        k = int(np.argmin(crit))
        out[name] = dict(tp=np.array(tp), fp=np.array(fp), rho1=path, rho2=ratio * path,
                         auc=normalized_auc(fp, tp, (~truth).sum(), truth.sum()),
                         ebic_tp=tp[k], ebic_fp=fp[k], ebic_rho1=path[k])
    return out, fits, failed


def run_benchmark_estimation(config: BenchConfig) -> BenchReport:
    """TP/FP paths, normalized AUC and the eBIC-selected point per weight strategy."""
    model = config.model()
    results = _map(lambda s: _estimation_seed(s, config, model), config.seeds, config.threads)
    report = BenchReport()
    total = sum(r[1] for r in results.values())
    failed = sum(r[2] for r in results.values())
    report.failures["fits"] = (failed, total)
    if total and failed / total > config.max_failure:
        raise NonConvergenceError(f"{failed} of {total} fits did not converge")
    seeds = sorted(results)
    for name, _, _ in _strategy_runs(config):
        runs = [results[s][0][name] for s in seeds]
        tp = np.array([r["tp"] for r in runs])
        fp = np.array([r["fp"] for r in runs])
        r1 = np.array([r["rho1"] for r in runs]).mean(axis=0)
        r2 = np.array([r["rho2"] for r in runs]).mean(axis=0)
        for k in range(config.n_path):
            report.add(name, r1[k], r2[k], "tp", tp[:, k])
            report.add(name, r1[k], r2[k], "fp", fp[:, k])
        auc = [r["auc"] for r in runs]
        report.add(name, np.nan, np.nan, "auc", auc)
        report.add(name, np.nan, np.nan, "ebic_tp", [r["ebic_tp"] for r in runs])
        report.add(name, np.nan, np.nan, "ebic_fp", [r["ebic_fp"] for r in runs])
        report.per_seed[(name, "auc")] = dict(zip(seeds, auc))
    return report


# ---------------------------------------------------------------------------
# Testing
# ---------------------------------------------------------------------------


def testing_model(p, M, circle=0.3, star=0.6, mu=0.2, null="benchmark") -> MultiModel:
    """``M - 1`` copies of network 1 followed by network 3 (all zero for ``null="all-null"``)."""
    net1, _, net3 = default_layouts(p, circle=circle, star=star)
    layouts = [net1] * (M - 1) + [net3] if M > 1 else [net1]
    model = make_benchmark_networks(p, layouts, mu)
    if null == "all-null":
        return MultiModel(model.mu, np.zeros_like(model.beta), model.kernel, model.link)
    return model


def edge_trees(beta, kind="oracle"):
    """Per-edge trees; ``"scrambled"`` reverses the oracle order."""
    M, p, _ = beta.shape
    trees = []
    for i in range(p):
        for j in range(p):
            t = oracle_tree(beta[:, i, j])
            if kind == "scrambled":
                t = SimilarityTree(tuple(reversed(t.order)), "scrambled")
            trees.append(t)
    return trees


def _plugin_fit(data, kernel, n_grid=8):
    """eBIC-tuned lasso fit of each experiment on its own (no fusion)."""
    design = precompute_design(data, kernel)
    grid = [(r, r) for r, _ in default_grid(design, n=n_grid, ratios=(1.0,))]
    return tune(design, None, grid).fit


def _empirical_tree(data, config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        thr = [threshold_covariance(cross_covariance(e, config.bin_width, config.max_lag),
                                    config.rule) for e in data]
    S = similarity_matrix(thr)
    counts = np.diag(S).copy()
    np.fill_diagonal(S, 0)
    return build_tree(S, counts)


def _rates(Z, truth):
    rej = Z.astype(bool)
    tp = int((rej & truth).sum())
    fp = int((rej & ~truth).sum())
    power = tp / truth.sum() if truth.any() else np.nan
    return dict(fwer=float(fp > 0), power=power, fdr=fp / max(tp + fp, 1))


def _testing_run(seed, M, config):
    model = testing_model(config.p, M, config.circle, config.star, config.mu, config.null)
    data = simulate_multi(model, [config.testing_horizon] * M, seed)
    stats = score_statistics(data, _plugin_fit(data, model.kernel, config.testing_grid))
    truth = model.beta.reshape(M, -1).T != 0          # (p^2, M)
    tc = TestConfig(config.alpha, config.node_test)
    out = {}
    for method in config.methods:
        if method == "bonferroni":
            Z = bonferroni_test(stats, config.alpha).Z
        elif method == "empirical":
            Z = hierarchical_test(_empirical_tree(data, config) if M > 1
                                  else SimilarityTree((1,)), stats, tc).Z
        else:
            Z = hierarchical_test(edge_trees(model.beta, method), stats, tc).Z
        out[method] = _rates(Z, truth)
    return out


def run_benchmark_testing(config: BenchConfig) -> BenchReport:
    """Power, FWER and FDR of each testing method for every ``M`` in ``testing_Ms``."""
    report = BenchReport()
    for M in config.testing_Ms:
        res = _map(lambda s: _testing_run(s, M, config), config.seeds, config.threads)
        seeds = sorted(res)
        for method in config.methods:
            for metric in ("power", "fwer", "fdr"):
                vals = [res[s][method][metric] for s in seeds]
                vals = [v for v in vals if not np.isnan(v)]
                report.add(method, np.nan, np.nan, f"{metric}@M={M}", vals)
                report.per_seed[(method, f"{metric}@M={M}")] = dict(
                    zip(seeds, [res[s][method][metric] for s in seeds]))
    return report


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def emit_plot_data(report: BenchReport, path):
    """Write the report as a tidy CSV with columns :data:`PLOT_COLUMNS`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)
        for rec in report.records:
            s, r1, r2, metric, value, se, n = rec
            w.writerow((s, repr(r1), repr(r2), metric, repr(value), repr(se), n))
    return path


def read_plot_data(path) -> BenchReport:
    report = BenchReport()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PLOT_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(PLOT_COLUMNS)}")
        for row in reader:
            report.records.append((row["strategy"], float(row["rho1"]), float(row["rho2"]),
                                   row["metric"], float(row["value"]), float(row["stderr"]),
                                   int(row["seed_count"])))
    return report
