"""Joint penalized estimation of multi-experiment Hawkes networks.

The objective for unit ``i`` is

    h(theta) + ||Lambda theta||_1,
    h(theta) = loss(theta) / T + f_u(theta),

where ``theta`` stacks ``(mu_i^(m), beta_i^(m))`` over experiments, ``f_u``
is the smoothed weighted fusion penalty ``||C theta||_1`` and ``Lambda``
applies ``rho1`` to every connectivity coordinate. The linear link uses
``loss = (theta' Q theta - 2 theta' gamma + N) / 2`` per experiment, the
exponential link uses the negative log-likelihood. Units are independent and
are solved together as columns of one matrix, each column with its own
stopping rule, so results do not depend on which units share a batch.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from .core import (ExperimentData, ExperimentDesign, ExponentialKernel, Link,
                   MultiExperimentData, MultiModel, NonConvergenceError,
                   UnitParams, event_states, experiment_design,
                   quadrature_nodes)
from .crosscov import SimilarityWeights

logger = logging.getLogger(__name__)

__all__ = [
    "PrecomputedDesign",
    "FusionOperator",
    "SolverConfig",
    "FitResult",
    "TuneResult",
    "precompute_design",
    "build_fusion_operator",
    "smoothing_parameter",
    "smoothed_fusion",
    "max_eigenvalue",
    "lipschitz_constant",
    "smooth_objective",
    "spgd_fit_unit",
    "joint_fit",
    "fit_losses",
    "ebic",
    "default_grid",
    "tune",
    "threshold_edges",
]


# ---------------------------------------------------------------------------
# Design
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrecomputedDesign:
    designs: tuple
    kernel: object = field(default_factory=ExponentialKernel)
    # exponential-link extras: per experiment (X_nodes, weights, units, left)
    nodes: tuple = None

    def __post_init__(self):
        for d in self.designs:
            ev = np.linalg.eigvalsh(d.Q).min() if d.Q.size else 0.0
            if not np.allclose(d.Q, d.Q.T) or ev < -1e-8 * max(1.0, np.abs(d.Q).max()):
                raise ValueError("design Gram matrix must be symmetric PSD")

    @property
    def M(self) -> int:
        return len(self.designs)

    @property
    def p(self) -> int:
        return self.designs[0].p

    @property
    def horizons(self) -> np.ndarray:
        return np.array([d.horizon for d in self.designs])

    @property
    def total_horizon(self) -> float:
        return float(self.horizons.sum())

    @property
    def Q(self) -> np.ndarray:
        """``(M, p+1, p+1)`` stack of Gram matrices."""
        return np.stack([d.Q for d in self.designs])

    @property
    def gamma(self) -> np.ndarray:
        """``(M, p, p+1)`` stack of cross moments."""
        return np.stack([d.gamma for d in self.designs])

    @property
    def counts(self) -> np.ndarray:
        return np.stack([d.counts for d in self.designs])


def precompute_design(data, kernel=None, link=Link.LINEAR, grid_step=None) -> PrecomputedDesign:
    """Sufficient statistics of every experiment.

    For the exponential link the quadrature nodes and the event states are
    cached as well, since its gradient must be re-integrated at each step.
    """
    kernel = ExponentialKernel() if kernel is None else kernel
    if isinstance(data, ExperimentData):
        data = MultiExperimentData((data,))
    designs = tuple(experiment_design(e, kernel, grid_step) for e in data)
    nodes = None
    if Link.parse(link) is Link.EXP:
        nodes = []
        for e in data:
            X, w = quadrature_nodes(e, kernel, grid_step)
            _, units, left = event_states(e, kernel)
            nodes.append((X, w, units, left))
        nodes = tuple(nodes)
    return PrecomputedDesign(designs, kernel, nodes)


# ---------------------------------------------------------------------------
# Penalty operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FusionOperator:
    """``D`` stacks ``w_{m,m'} (e_m - e_m')^T (x) I_0`` over pairs ``m < m'``."""

    D: sparse.csr_matrix
    rho1: float
    rho2: float
    p: int
    M: int
    W: np.ndarray

    @property
    def C(self) -> sparse.csr_matrix:
        return (self.rho2 * self.D).tocsr()

    @property
    def CT(self) -> sparse.csr_matrix:
        return self.C.T.tocsr()

    @property
    def lam(self) -> np.ndarray:
        """Diagonal of ``Lambda``: ``rho1`` on connectivity, 0 on background."""
        d = np.full((self.M, self.p + 1), self.rho1)
        d[:, 0] = 0.0
        return d.ravel()

    @property
    def Lambda(self) -> sparse.dia_matrix:
        return sparse.diags(self.lam)

    def fusion_norm(self, theta) -> float:
        return float(np.abs(self.D @ theta).sum())

    def sparsity_norm(self, theta) -> float:
        return float(np.abs(self.lam * theta).sum())


def build_fusion_operator(W, rho1, rho2, p, M=None) -> FusionOperator:
    W = np.asarray(getattr(W, "W", W), dtype=float)
    M = W.shape[0] if M is None else M
    if rho1 < 0 or rho2 < 0:
        raise ValueError("tuning parameters must be nonnegative")
    if W.shape != (M, M):
        raise ValueError(f"weights must be {M} x {M}")
    n = p + 1
    rows, cols, vals = [], [], []
    for r, (m, k) in enumerate(itertools.combinations(range(M), 2)):
        w = W[m, k]
        idx = np.arange(1, n)
        rows += [r * n + idx, r * n + idx]
        cols += [m * n + idx, k * n + idx]
        vals += [np.full(p, w), np.full(p, -w)]
    n_pairs = M * (M - 1) // 2
    if n_pairs:
        D = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n_pairs * n, M * n))
    else:
        D = sparse.csr_matrix((0, M * n))
    return FusionOperator(D, float(rho1), float(rho2), p, M, W)


def smoothing_parameter(eps, M) -> float:
    """``u = 4 eps / (M (M - 1))``; any positive value when there is no fusion."""
    if M < 2:
        return 1.0
    return 4.0 * eps / (M * (M - 1))


def smoothed_fusion(theta, C, u):
    """Value and gradient of ``max_{|a|_inf <= 1} a'C theta - u/2 |a|^2``.

    Works column-wise when ``theta`` is a matrix.
    """
    if u <= 0:
        raise ValueError("smoothing parameter u must be positive")
    z = C @ theta
    az = np.abs(z)
    value = np.where(az <= u, z * z / (2 * u), az - u / 2).sum(axis=0)
    alpha = np.clip(z / u, -1.0, 1.0)
    return value, C.T @ alpha


def max_eigenvalue(A, method="dense", tol=1e-10, max_iter=10_000, seed=0) -> float:
    """Largest eigenvalue of a symmetric PSD matrix (dense or power iteration)."""
    if method == "dense":
        A = A.toarray() if sparse.issparse(A) else np.asarray(A)
        return float(np.linalg.eigvalsh(A)[-1]) if A.size else 0.0
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    n = A.shape[0]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        Av = A @ v
        new = float(v @ Av)
        nrm = np.linalg.norm(Av)
        if nrm == 0:
            return 0.0
        v = Av / nrm
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            return new
        lam = new
    return lam


def _fusion_eig(op: FusionOperator) -> float:
    # D'D = Laplacian(w^2) (x) I_0, so its spectrum is that of an M x M matrix
    if op.M < 2:
        return 0.0
    W2 = np.triu(op.W, 1) ** 2
    W2 = W2 + W2.T
    lap = np.diag(W2.sum(axis=1)) - W2
    return op.rho2 ** 2 * float(np.linalg.eigvalsh(lap)[-1])


def lipschitz_constant(design: PrecomputedDesign, op: FusionOperator, u, link=Link.LINEAR,
                       theta=None, method="sum") -> float:
    """Upper bound on the curvature of the smooth part ``h``.

    ``method="sum"`` returns ``max eig(Q/T) + max eig(C'C)/u``; ``"power"``
    and ``"dense"`` evaluate ``max eig(Q/T + C'C/u)`` directly.
    """
    link = Link.parse(link)
    T = design.total_horizon
    scale = 1.0
    if link is Link.EXP:
        scale = _max_intensity(design, theta)
    if method == "sum":
        lq = max(np.linalg.eigvalsh(Q)[-1] for Q in design.Q) / T
        return float(scale * lq + _fusion_eig(op) / u)
    H = sparse.block_diag([Q / T * scale for Q in design.Q]) + (op.C.T @ op.C) / u
    return max_eigenvalue(H, method=method)


def _max_intensity(design, theta):
    if theta is None or design.nodes is None:
        return 1.0
    theta = np.asarray(theta).reshape(design.M, design.p + 1, -1)
    peak = -np.inf
    for m, (X, _, _, _) in enumerate(design.nodes):
        eta = theta[m, 0] + X @ theta[m, 1:]
        peak = max(peak, float(eta.max()))
    return float(np.exp(min(peak, 700.0)))


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-3
    max_iter: int = 10_000
    tol: float = 1e-6
    backtracking: bool = False
    max_lipschitz: float = 1e15

    def __post_init__(self):
        if not (self.epsilon > 0 and self.max_iter > 0 and self.tol > 0):
            raise ValueError("solver settings must be positive")


@dataclass
class FitResult:
    theta: np.ndarray              # (M, p, p+1): row i of experiment m is (mu, beta)
    objective: list                # per unit: smoothed objective after each iteration
    iterations: np.ndarray
    converged: np.ndarray
    rho1: float
    rho2: float
    W: np.ndarray
    link: Link = Link.LINEAR

    @property
    def mu(self) -> np.ndarray:
        return self.theta[:, :, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.theta[:, :, 1:]

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def unit(self, m, i) -> UnitParams:
        return UnitParams(self.theta[m, i, 0], self.theta[m, i, 1:])

    def as_model(self, kernel=None) -> MultiModel:
        return MultiModel(self.mu.copy(), self.beta.copy(), kernel or ExponentialKernel(),
                          self.link)


class _LinearProblem:
    """Columns are units; ``theta`` has shape ``(M*(p+1), k)``."""

    def __init__(self, design, units):
        self.M, self.n = design.M, design.p + 1
        self.T = design.total_horizon
        self.Q = design.Q
        self.G = np.stack([design.gamma[:, i, :] for i in units], axis=-1)   # (M, n, k)
        self.N = np.array([design.counts[:, i].sum() for i in units], dtype=float)

    def _Qt(self, theta):
        th = theta.reshape(self.M, self.n, -1)
        # einsum keeps the per-column arithmetic independent of the batch
        return np.einsum("mab,mbk->mak", self.Q, th, optimize=False), th

    def value_grad(self, theta, cols):
        Qt, th = self._Qt(theta)
        G = self.G[..., cols]
        grad = (Qt - G) / self.T
        val = (np.einsum("mak,mak->k", th, 0.5 * Qt - G, optimize=False)
               + 0.5 * self.N[cols]) / self.T
        return val, grad.reshape(theta.shape)

    def value(self, theta, cols):
        return self.value_grad(theta, cols)[0]


class _ExpProblem:
    def __init__(self, design, units):
        if design.nodes is None:
            raise ValueError("exponential link needs a design built with link='exp'")
        self.M, self.n = design.M, design.p + 1
        self.T = design.total_horizon
        self.nodes = design.nodes
        self.units = list(units)
        # event-sum term: sum over events of unit i of (1, x(t-))
        self.E = np.zeros((self.M, self.n, len(self.units)))
        for m, (_, _, u, left) in enumerate(design.nodes):
            for c, i in enumerate(self.units):
                sel = u == i
                self.E[m, 0, c] = sel.sum()
                self.E[m, 1:, c] = left[sel].sum(axis=0)

    def value_grad(self, theta, cols):
        th = theta.reshape(self.M, self.n, -1)
        val = np.zeros(th.shape[2])
        grad = np.zeros_like(th)
        for c in range(th.shape[2]):
            col = cols[c] if cols is not None else c
            for m, (X, w, _, _) in enumerate(self.nodes):
                with np.errstate(over="ignore", invalid="ignore"):
                    lam = w * np.exp(th[m, 0, c] + X @ th[m, 1:, c])
                integral = lam.sum()
                val[c] += integral - th[m, :, c] @ self.E[m, :, col]
                grad[m, 0, c] = integral - self.E[m, 0, col]
                grad[m, 1:, c] = lam @ X - self.E[m, 1:, col]
        val /= self.T
        grad /= self.T
        return val, grad.reshape(theta.shape)

    def value(self, theta, cols):
        return self.value_grad(theta, cols)[0]


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _smooth_part(problem, op, u):
    C = op.C
    CT = C.T.tocsr()
    use_fusion = op.M > 1 and op.rho2 > 0

    def h(theta, cols):
        val, grad = problem.value_grad(theta, cols)
        if use_fusion:
            z = C @ theta
            az = np.abs(z)
            val = val + np.where(az <= u, z * z / (2 * u), az - u / 2).sum(axis=0)
            grad = grad + CT @ np.clip(z / u, -1.0, 1.0)
        return val, grad
    return h


def smooth_objective(design: PrecomputedDesign, op: FusionOperator, i: int, theta,
                     link=Link.LINEAR, epsilon=1e-3):
    """Value and gradient of the smooth part ``h`` for unit ``i``.

    ``theta`` is the stacked ``(M*(p+1),)`` vector of ``(mu, beta)`` blocks.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1, 1)
    h = _smooth_part(_problem(design, [i], link), op, smoothing_parameter(epsilon, op.M))
    val, grad = h(theta, np.arange(1))
    return float(val[0]), grad[:, 0]


def _solve(problem, op: FusionOperator, theta0, config: SolverConfig, L, backtracking):
    """Smoothing proximal gradient with FISTA momentum, one column per unit.

    A step that would increase a column's smoothed objective is rejected and
    that column's momentum is restarted, so objective traces are monotone.
    """
    u = smoothing_parameter(config.epsilon, op.M)
    lam = op.lam[:, None]
    h = _smooth_part(problem, op, u)

    def F(theta, cols):
        val, _ = h(theta, cols)
        return val + np.abs(lam * theta).sum(axis=0)

    n, k = theta0.shape
    theta = theta0.copy()
    w = theta.copy()
    t_mom = np.zeros(k)
    Lk = np.full(k, float(L))
    iters = np.zeros(k, dtype=int)
    converged = np.zeros(k, dtype=bool)
    cols_all = np.arange(k)
    fval = F(theta, cols_all)
    traces = [[float(v)] for v in fval]
    rejected = np.zeros(k, dtype=bool)

    for it in range(config.max_iter):
        act = np.flatnonzero(~converged)
        if act.size == 0:
            break
        th_a, w_a = theta[:, act], w[:, act]
        hw, gw = h(w_a, act)
        La = Lk[act]
        while True:
            z = _soft(w_a - gw / La, lam / La)
            if not backtracking:
                break
            hz, _ = h(z, act)
            diff = z - w_a
            quad = hw + (gw * diff).sum(axis=0) + 0.5 * La * (diff * diff).sum(axis=0)
            bad = ~(hz <= quad + 1e-12 * np.abs(quad))
            if not bad.any():
                break
            La = np.where(bad, 2.0 * La, La)
            if np.any(La > config.max_lipschitz):
                raise NonConvergenceError("backtracking failed: Lipschitz estimate exploded")
        Lk[act] = La
        fz = F(z, act)
        accept = fz <= fval[act] + 1e-14 * np.abs(fval[act])
        new = np.where(accept, z, th_a)
        tt = t_mom[act]
        coef = np.where(accept, tt / (tt + 3.0), 0.0)
        w[:, act] = new + coef * (new - th_a)
        t_mom[act] = np.where(accept, tt + 1.0, 0.0)
        step = np.linalg.norm(new - th_a, axis=0)
        scale = np.maximum(np.linalg.norm(new, axis=0), 1e-12)
        fval[act] = np.where(accept, fz, fval[act])
        for c, a in enumerate(act):
            traces[a].append(float(fval[a]))
        iters[act] += 1
        done = (accept & (step <= config.tol * scale)) | (~accept & rejected[act])
        rejected[act] = ~accept
        theta[:, act] = new
        converged[act] = done
    return theta, traces, iters, converged


def _as_design(data, kernel, link):
    if isinstance(data, PrecomputedDesign):
        if Link.parse(link) is Link.EXP and data.nodes is None:
            raise ValueError("exponential link needs a design built with link='exp'")
        return data
    return precompute_design(data, kernel, link)


def _problem(design, units, link):
    return (_ExpProblem if Link.parse(link) is Link.EXP else _LinearProblem)(design, units)


def _initial_theta(design, units, theta0):
    M, n = design.M, design.p + 1
    if theta0 is not None:
        theta0 = np.asarray(theta0, dtype=float)
        if theta0.shape == (M, design.p, n):
            return np.stack([theta0[:, i, :].ravel() for i in units], axis=1)
        return theta0.reshape(M * n, len(units)).copy()
    return np.zeros((M * n, len(units)))


def _fit_units(design, op, units, link, config, theta0=None):
    link = Link.parse(link)
    problem = _problem(design, units, link)
    start = _initial_theta(design, units, theta0)
    if link is Link.EXP:
        # start from the constant-rate solution when the caller gives nothing
        if theta0 is None:
            rate = np.array([[design.counts[m, i] / design.horizons[m] for i in units]
                             for m in range(design.M)])
            start.reshape(design.M, design.p + 1, -1)[:, 0, :] = np.log(np.maximum(rate, 1e-3))
        u = smoothing_parameter(config.epsilon, op.M)
        L = lipschitz_constant(design, op, u, link, theta=start)
        return _solve(problem, op, start, config, L, backtracking=True)
    u = smoothing_parameter(config.epsilon, op.M)
    L = lipschitz_constant(design, op, u, link)
    # a tiny u makes the fixed step uselessly short; let backtracking find a usable L
    small_u = u < 1e-6 and op.rho2 > 0
    if small_u:
        L = min(L, lipschitz_constant(design, op, 1e-6, link))
    return _solve(problem, op, start, config, L, backtracking=config.backtracking or small_u)


def spgd_fit_unit(design: PrecomputedDesign, i: int, op: FusionOperator, link=Link.LINEAR,
                  config=None, theta0=None):
    """Fit unit ``i`` in all experiments.

    Returns ``(params, converged, trace)`` where ``params[m]`` is a
    :class:`UnitParams`.
    """
    config = config or SolverConfig()
    theta, traces, _, conv = _fit_units(design, op, [i], link, config, theta0)
    th = theta[:, 0].reshape(design.M, design.p + 1)
    params = [UnitParams(th[m, 0], th[m, 1:]) for m in range(design.M)]
    return params, bool(conv[0]), np.asarray(traces[0])


def joint_fit(data, W, rho1, rho2, link=Link.LINEAR, config=None, kernel=None,
              theta0=None, units=None, strict=False) -> FitResult:
    """Solve the joint problem for every unit (they separate exactly)."""
    config = config or SolverConfig()
    link = Link.parse(link)
    design = _as_design(data, kernel, link)
    M, p = design.M, design.p
    if W is None:
        W = np.zeros((M, M))
    W = np.asarray(getattr(W, "W", W), dtype=float)
    op = build_fusion_operator(W, rho1, rho2, p, M)
    units = list(range(p)) if units is None else list(units)
    theta, traces, iters, conv = _fit_units(design, op, units, link, config, theta0)
    full = np.zeros((M, p, p + 1))
    for c, i in enumerate(units):
        full[:, i, :] = theta[:, c].reshape(M, p + 1)
    if strict and not conv.all():
        raise NonConvergenceError(f"units {np.asarray(units)[~conv].tolist()} did not converge")
    if not conv.all():
        logger.warning("%d of %d units hit max_iter", int((~conv).sum()), conv.size)
    return FitResult(full, [np.asarray(t) for t in traces], iters, conv,
                     float(rho1), float(rho2), W, link)


# ---------------------------------------------------------------------------
# Model selection
# ---------------------------------------------------------------------------


def fit_losses(fit: FitResult, design: PrecomputedDesign) -> np.ndarray:
    """Unscaled per-experiment, per-unit losses, shape ``(M, p)``."""
    M, p = design.M, design.p
    out = np.zeros((M, p))
    if fit.link is Link.EXP:
        for m, (X, w, units, left) in enumerate(design.nodes):
            for i in range(p):
                th = fit.theta[m, i]
                lam = w @ np.exp(th[0] + X @ th[1:])
                ev = left[units == i]
                out[m, i] = lam - (th[0] * ev.shape[0] + (ev @ th[1:]).sum())
        return out
    for m, d in enumerate(design.designs):
        th = fit.theta[m]
        out[m] = np.einsum("ia,ab,ib->i", th, d.Q, th) - 2 * np.einsum("ia,ia->i", th, d.gamma) \
            + d.counts
    return out


def _log_binom(p, s):
    return gammaln(p + 1) - gammaln(s + 1) - gammaln(p - s + 1)


def ebic(fit: FitResult, data, gamma_ebic=1.0, kernel=None, tol=0.0,
         dispersion="rate") -> float:
    """Extended BIC summed over experiments and units.

    The least-squares loss is not a log-likelihood: counts have variance equal
    to their rate, so with ``dispersion="rate"`` each unit's loss is divided by
    its empirical rate ``N / T_m`` (quasi-likelihood scaling). ``"none"`` uses
    the loss as is. The exponential link always uses its likelihood.
    """
    if dispersion not in ("rate", "none"):
        raise ValueError(f"unknown dispersion {dispersion!r}")
    if not 0 <= gamma_ebic:
        raise ValueError("eBIC gamma must be nonnegative")
    design = _as_design(data, kernel, fit.link)
    s = (np.abs(fit.beta) > tol).sum(axis=2)
    p = design.p
    loss = fit_losses(fit, design)
    if dispersion == "rate" and fit.link is not Link.EXP:
        rate = design.counts / design.horizons[:, None]
        loss = np.divide(loss, rate, out=np.zeros_like(loss), where=rate > 0)
    logT = np.log(design.horizons)[:, None]
    return float(np.sum(2 * loss + s * logT + 2 * gamma_ebic * _log_binom(p, s)))


def default_grid(design: PrecomputedDesign, n=10, span=(1e-3, 1.0), ratios=(1.0, 10.0)):
    """``rho1`` log-spaced over ``span * ||gamma / T||_inf``, ``rho2 = ratio * rho1``."""
    top = np.abs(design.gamma).max() / design.total_horizon
    rho1 = np.geomspace(span[1] * top, span[0] * top, n)
    return [(float(r), float(c * r)) for r in rho1 for c in ratios]


@dataclass
class TuneResult:
    best: tuple
    fit: FitResult
    table: list      # (rho1, rho2, ebic)


def tune(data, W, grid=None, link=Link.LINEAR, config=None, kernel=None,
         gamma_ebic=1.0, dispersion="rate") -> TuneResult:
    """eBIC over a grid of ``(rho1, rho2)``; ties go to larger ``rho1`` then ``rho2``.

    Fits run from the largest ``rho1`` down, each warm-started from the last.
    """
    link = Link.parse(link)
    design = _as_design(data, kernel, link)
    grid = default_grid(design) if grid is None else [tuple(map(float, g)) for g in grid]
    if not grid:
        raise ValueError("tuning grid is empty")
    order = sorted(range(len(grid)), key=lambda k: (-grid[k][0], -grid[k][1]))
    warm = {}
    results = {}
    for k in order:
        r1, r2 = grid[k]
        fit = joint_fit(design, W, r1, r2, link, config, theta0=warm.get(r2))
        warm[r2] = fit.theta
        results[k] = (fit, ebic(fit, design, gamma_ebic, dispersion=dispersion))
    ok = [k for k in order if results[k][0].all_converged]
    if not ok:
        raise NonConvergenceError("no fit on the tuning grid converged")
    best = min(ok, key=lambda k: (results[k][1], -grid[k][0], -grid[k][1]))
    table = [(grid[k][0], grid[k][1], results[k][1]) for k in range(len(grid))]
    return TuneResult(grid[best], results[best][0], table)


def threshold_edges(fit, tau) -> np.ndarray:
    """Hard-threshold the estimated connectivity at ``tau``; returns ``(M, p, p)``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    beta = fit.beta if isinstance(fit, FitResult) else np.asarray(fit)
    return np.where(np.abs(beta) > tau, beta, 0.0)
