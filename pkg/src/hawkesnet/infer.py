"""De-correlated score tests and hierarchical multiple testing of network edges.

For edge ``j -> i`` in experiment ``m`` the regressor ``x_j`` is replaced by
its residual ``x~_j`` after projecting out the intercept and the other
columns, and the score

    S = (1/T) [ sum_{events of i} x~_j(t-) - int lambda0(t) x~_j(t) dt ]

is evaluated at the fit with ``beta_ij`` set to zero. ``V`` standardises
``T S`` by ``sqrt(int lambda_hat x~_j^2 dt)``, the predictable variation of the
score martingale under the plug-in intensity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi2, norm

from .core import (ExperimentData, ExponentialKernel, Link, MultiExperimentData,
                   event_states, exp_segments, experiment_design, quadrature_nodes)
from .tree import SimilarityTree, node_sets

__all__ = [
    "ScoreStats",
    "TestConfig",
    "RejectionMatrix",
    "Decorrelation",
    "decorrelate",
    "decorrelation_vector",
    "score_statistics",
    "score_statistic",
    "node_pvalue_sum",
    "node_pvalue_max",
    "critical_levels",
    "hierarchical_test",
    "bonferroni_test",
]

UNPENALIZED_MAX_DIM = 50


@dataclass(frozen=True)
class ScoreStats:
    """``V[i, j, m]`` for edge ``j -> i`` in experiment ``m``; ``upsilon[j, m]``."""

    V: np.ndarray
    upsilon: np.ndarray
    degenerate: np.ndarray = None

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        if V.ndim != 3 or V.shape[0] != V.shape[1]:
            raise ValueError("V must have shape (p, p, M)")
        if not np.all(np.isfinite(V)):
            raise ValueError("score statistics contain non-finite values")
        U = np.asarray(self.upsilon, dtype=float)
        if U.shape != (V.shape[1], V.shape[2]):
            raise ValueError("upsilon must have shape (p, M)")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "upsilon", U)
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", ~(U > 0))

    @property
    def p(self) -> int:
        return self.V.shape[0]

    @property
    def M(self) -> int:
        return self.V.shape[2]

    def edge(self, k) -> np.ndarray:
        """Statistics of edge ``k = i * p + j`` across experiments."""
        return self.V[k // self.p, k % self.p]


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 0.05
    node_test: str = "sum"
    edges: tuple = None          # subset J of edge indices k = i * p + j
    gumbel_d: float = 0.5
    exact_max_below: int = 10

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.node_test not in ("sum", "max"):
            raise ValueError("node_test must be 'sum' or 'max'")
        if not self.gumbel_d > 0:
            raise ValueError("gumbel_d must be positive")


@dataclass
class RejectionMatrix:
    Z: np.ndarray                                  # (p^2, M) of 0/1
    node_pvalues: list = field(default_factory=list)   # (edge, level, node set, p)
    n_tests: np.ndarray = None
    levels: np.ndarray = None

    @property
    def p(self) -> int:
        return int(round(math.sqrt(self.Z.shape[0])))

    def as_cube(self) -> np.ndarray:
        """``(M, p, p)`` boolean array, ``[m, i, j]`` for edge ``j -> i``."""
        p = self.p
        return self.Z.T.reshape(-1, p, p).astype(bool)


# ---------------------------------------------------------------------------
# Decorrelation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decorrelation:
    a: np.ndarray            # x~_j = X a, a[j] = 1
    upsilon: float           # a'Qa / T
    degenerate: bool
    penalty: float = 0.0
    residual: np.ndarray = None


def _lasso_gram(G, c, lam, free, iters=2000, tol=1e-10):
    """Coordinate descent for ``1/2 g'Gg - c'g + lam * sum_{k not free} |g_k|``."""
    n = c.size
    g = np.zeros(n)
    diag = np.diag(G).copy()
    grad = -c.copy()             # G g - c
    for _ in range(iters):
        biggest = 0.0
        for k in range(n):
            if diag[k] <= 0:
                continue
            old = g[k]
            z = old - grad[k] / diag[k]
            t = 0.0 if free[k] else lam / diag[k]
            new = math.copysign(max(abs(z) - t, 0.0), z)
            if new != old:
                grad += G[:, k] * (new - old)
                g[k] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return g


def decorrelation_vector(Q, j, T, penalty=None, gamma_ebic=1.0, n_grid=8) -> Decorrelation:
    """Residual coefficients of column ``j`` of a Gram matrix ``Q`` (column 0 is the intercept).

    ``penalty=None`` projects exactly when ``Q`` has at most 50 columns and
    otherwise runs a lasso whose level is picked by eBIC on ``n_grid`` values.
    ``penalty=0`` forces the exact projection.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if not 1 <= j < n:
        raise ValueError(f"column {j} out of range 1..{n - 1}")
    rest = np.array([k for k in range(n) if k != j])
    G = Q[np.ix_(rest, rest)] / T
    c = Q[rest, j] / T
    free = rest == 0
    scale = Q[j, j] / T
    if penalty is None and n <= UNPENALIZED_MAX_DIM:
        penalty = 0.0
    if penalty == 0.0:
        g = np.linalg.lstsq(G, c, rcond=None)[0]
        lam = 0.0
    elif penalty is not None:
        g = _lasso_gram(G, c, float(penalty), free)
        lam = float(penalty)
    else:
        top = np.abs(c[~free] - G[~free][:, free] @ np.linalg.lstsq(
            G[np.ix_(free, free)], c[free], rcond=None)[0]).max() if (~free).any() else 0.0
        best = None
        for lam_ in np.geomspace(max(top, 1e-12), max(top, 1e-12) * 1e-2, n_grid):
            g_ = _lasso_gram(G, c, lam_, free)
            rss = max(scale - 2 * g_ @ c + g_ @ G @ g_, 1e-300)
            s = int(np.count_nonzero(g_[~free]))
            crit = T * math.log(rss) + s * math.log(T) + 2 * gamma_ebic * (
                gammaln(n - 1) - gammaln(s + 1) - gammaln(n - 1 - s))
            if best is None or crit < best[0]:
                best = (crit, g_, lam_)
        _, g, lam = best
    a = np.zeros(n)
    a[j] = 1.0
    a[rest] = -g
    ups = float(a @ Q @ a) / T
    degenerate = not ups > 1e-10 * max(scale, 1e-300)
    return Decorrelation(a, max(ups, 0.0), degenerate, lam)


def decorrelate(X, j, weights=None, penalty=None) -> Decorrelation:
    """Residual of column ``j`` of a design ``X`` (rows are grid points, column 0 the intercept).

    ``weights`` are quadrature weights; the horizon is their sum.
    """
    X = np.asarray(X, dtype=float)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    T = float(w.sum())
    Q = (X * w[:, None]).T @ X
    d = decorrelation_vector(Q, j, T, penalty)
    return Decorrelation(d.a, d.upsilon, d.degenerate, d.penalty, X @ d.a)


# ---------------------------------------------------------------------------
# Score statistics
# ---------------------------------------------------------------------------


def _exp_moments(c0, c1, u0, u1, r):
    """``int_{u0}^{u1} exp(-k r u) du`` for ``k = 0..3``, shape ``(4, n)``."""
    out = [u1 - u0]
    for k in (1, 2, 3):
        out.append((np.exp(-k * r * u0) - np.exp(-k * r * u1)) / (k * r))
    return np.array(out)


def _predictable_variation(exp, kernel, link, theta_i, A):
    """``int g(theta_i' z) (z' a_j)^2 dt`` for every column ``a_j`` of ``A``.

    Linear links are rectified at zero. Exact for exponential kernels with a
    linear link, trapezoidal otherwise.
    """
    if link is not Link.EXP and isinstance(kernel, ExponentialKernel):
        r = kernel.rate
        lengths, S = exp_segments(exp, kernel)
        c0 = np.full(lengths.size, theta_i[0])
        c1 = S @ theta_i[1:]
        # the intensity c0 + c1 exp(-r u) is monotone on a piece, so its
        # positive part is one subinterval [u0, u1]
        start, end = c0 + c1, c0 + c1 * np.exp(-r * lengths)
        u0 = np.zeros_like(lengths)
        u1 = lengths.copy()
        cross = (start > 0) != (end > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ustar = np.where(cross, np.log(-c1 / c0) / r, 0.0)
        u1 = np.where(cross & (start > 0), ustar, u1)
        u0 = np.where(cross & (start <= 0), ustar, u0)
        dead = (start <= 0) & (end <= 0)
        u1 = np.where(dead, u0, u1)
        E = _exp_moments(c0, c1, u0, u1, r)
        d0 = A[0][None, :]
        d1 = S @ A[1:]
        terms = (c0[:, None] * d0 ** 2 * E[0][:, None]
                 + (c1[:, None] * d0 ** 2 + 2 * c0[:, None] * d0 * d1) * E[1][:, None]
                 + (2 * c1[:, None] * d0 * d1 + c0[:, None] * d1 ** 2) * E[2][:, None]
                 + c1[:, None] * d1 ** 2 * E[3][:, None])
        return terms.sum(axis=0)
    X, w = quadrature_nodes(exp, kernel)
    Z = np.column_stack([np.ones(X.shape[0]), X])
    lam = link.apply(Z @ theta_i) if link is Link.EXP else np.maximum(Z @ theta_i, 0.0)
    return (w * lam) @ (Z @ A) ** 2


def _experiment_scores(exp: ExperimentData, theta, kernel, link, penalty):
    """``V`` (p x p), ``upsilon`` (p,) and degeneracy flags for one experiment.

    ``theta`` is the ``(p, p+1)`` plug-in fit. The score is evaluated with
    ``beta_ij`` set to zero; its scale is the predictable variation
    ``int lambda_hat x~_j^2 dt`` under the plug-in fit.
    """
    p = exp.p
    design = experiment_design(exp, kernel)
    Q, T = design.Q, design.horizon
    _, units, left = event_states(exp, kernel)
    Z = np.column_stack([np.ones(units.size), left]) if units.size else np.zeros((0, p + 1))
    dec = [decorrelation_vector(Q, j, T, penalty) for j in range(1, p + 1)]
    A = np.column_stack([d.a for d in dec])                 # (p+1, p)
    ups = np.array([d.upsilon for d in dec])
    degen = np.array([d.degenerate for d in dec])
    V = np.zeros((p, p))
    if link is Link.EXP:
        X, w = quadrature_nodes(exp, kernel)
        Xn = np.column_stack([np.ones(X.shape[0]), X])
    for i in range(p):
        ev = Z[units == i].sum(axis=0) @ A                  # sum of x~_j at events of i
        scale = _predictable_variation(exp, kernel, link, theta[i], A)
        for j in range(p):
            if degen[j] or not scale[j] > 0:
                continue
            th0 = theta[i].copy()
            th0[j + 1] = 0.0
            if link is Link.EXP:
                comp = ((w * np.exp(Xn @ th0)) @ Xn) @ A[:, j]
            else:
                comp = th0 @ Q @ A[:, j]
            V[i, j] = (ev[j] - comp) / math.sqrt(scale[j])
    return V, ups, degen


def _as_multi(data):
    return MultiExperimentData((data,)) if isinstance(data, ExperimentData) else data


def _theta_of(fit, m):
    th = getattr(fit, "theta", None)
    if callable(th):                     # MultiModel.theta(m)
        return np.asarray(th(m))
    return np.asarray(th)[m]


def score_statistics(data, fit, kernel=None, link=None, penalty=None) -> ScoreStats:
    """All ``V[i, j, m]``.

    ``fit`` is a :class:`~hawkesnet.estimate.FitResult` or
    :class:`~hawkesnet.core.MultiModel` supplying the plug-in intensity.
    """
    data = _as_multi(data)
    kernel = kernel or getattr(fit, "kernel", None) or ExponentialKernel()
    link = Link.parse(link or getattr(fit, "link", Link.LINEAR))
    M, p = data.M, data.p
    V = np.zeros((p, p, M))
    U = np.zeros((p, M))
    D = np.zeros((p, M), dtype=bool)
    for m, exp in enumerate(data):
        theta = _theta_of(fit, m)
        if theta.shape != (p, p + 1):
            raise ValueError(f"fit for experiment {m + 1} has shape {theta.shape}, "
                             f"expected {(p, p + 1)}")
        V[:, :, m], U[:, m], D[:, m] = _experiment_scores(exp, theta, kernel, link, penalty)
    return ScoreStats(V, U, D)


def score_statistic(data, fit, i, j, m, kernel=None, link=None) -> float:
    """Single ``V_ij^(m)``; raises if column ``j`` is degenerate."""
    data = _as_multi(data)
    kernel = kernel or getattr(fit, "kernel", None) or ExponentialKernel()
    link = Link.parse(link or getattr(fit, "link", Link.LINEAR))
    V, _, degen = _experiment_scores(data[m], _theta_of(fit, m), kernel, link, None)
    if degen[j]:
        raise ValueError(f"column {j} of experiment {m} is degenerate; statistic undefined")
    return float(V[i, j])


# ---------------------------------------------------------------------------
# Node tests
# ---------------------------------------------------------------------------


def node_pvalue_sum(values) -> float:
    """Chi-square p-value of ``sum V^2`` with ``|L|`` degrees of freedom."""
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.size < 1:
        raise ValueError("node set is empty")
    return float(chi2.sf(np.sum(v * v), v.size))


def node_pvalue_max(values, d=0.5, exact_below=10) -> float:
    """P-value of ``max V^2`` over the node.

    Up to ``exact_below`` members, the exact value for independent normals
    ``1 - (1 - p_max)^|L|`` is used, ``p_max`` being the two-sided normal
    p-value of the largest ``|V|``. Larger nodes use the Gumbel limit with
    ``a = 1/2`` and ``b = 2 (ln L + (d - 1) ln ln L - ln Gamma(d))``.
    """
    v = np.atleast_1d(np.asarray(values, dtype=float))
    L = v.size
    if L < 1:
        raise ValueError("node set is empty")
    u = float(np.max(v * v))
    if L <= exact_below:
        pm = float(chi2.sf(u, 1))
        return float(-np.expm1(L * np.log1p(-pm))) if pm < 1 else 1.0
    b = 2.0 * (math.log(L) + (d - 1.0) * math.log(math.log(L)) - gammaln(d))
    return float(-np.expm1(-math.exp(-0.5 * (u - b))))


def critical_levels(alpha, p, M, n_edges=None) -> np.ndarray:
    """``alpha_l = alpha / |J| * (M - l + 1) / M`` for ``l = 1..M``."""
    if not (alpha > 0 and p > 0 and M > 0):
        raise ValueError("alpha, p and M must be positive")
    J = p * p if n_edges is None else n_edges
    l = np.arange(1, M + 1)
    return alpha / J * (M - l + 1) / M


def _node_p(values, config: TestConfig):
    if config.node_test == "sum":
        return node_pvalue_sum(values)
    return node_pvalue_max(values, config.gumbel_d, config.exact_max_below)


def _tree_for(trees, k):
    if isinstance(trees, SimilarityTree):
        return trees
    return trees[k]


def hierarchical_test(trees, stats: ScoreStats, config=None) -> RejectionMatrix:
    """Top-down testing along a left-leaf tree for every edge.

    ``trees`` is one shared :class:`SimilarityTree` or a sequence/mapping
    giving the tree of edge ``k = i * p + j``.
    """
    config = config or TestConfig()
    if stats is None:
        raise ValueError("score statistics are missing")
    p, M = stats.p, stats.M
    edges = range(p * p) if config.edges is None else [int(k) for k in config.edges]
    alphas = critical_levels(config.alpha, p, M, len(edges))
    Z = np.zeros((p * p, M), dtype=np.int8)
    n_tests = np.zeros(p * p, dtype=int)
    records = []
    for k in edges:
        tree = _tree_for(trees, k)
        if tree.M != M:
            raise ValueError(f"tree for edge {k} covers {tree.M} experiments, not {M}")
        v = stats.edge(k)

        def test(node, level):
            pv = _node_p(v[[m - 1 for m in sorted(node)]], config)
            n_tests[k] += 1
            records.append((k, level, tuple(sorted(node)), pv))
            return pv <= alphas[level - 1]

        if not test(tree.order, 1):
            continue
        if M == 1:
            Z[k, 0] = 1
            continue
        for level in range(2, M + 1):
            left, right = node_sets(tree, level)
            if test(left, level):
                Z[k, next(iter(left)) - 1] = 1
            if not test(right, level):
                break
            if level == M:
                Z[k, tree.order[-1] - 1] = 1
    return RejectionMatrix(Z, records, n_tests, alphas)


def bonferroni_test(stats: ScoreStats, alpha=0.05) -> RejectionMatrix:
    """Two-sided normal test of every ``V`` at ``alpha / (p^2 M)``."""
    p, M = stats.p, stats.M
    pv = 2 * norm.sf(np.abs(stats.V))
    level = alpha / (p * p * M)
    Z = (pv <= level).reshape(p * p, M).astype(np.int8)
    return RejectionMatrix(Z, [], np.full(p * p, M), np.full(1, level))
