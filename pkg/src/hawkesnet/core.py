"""Point-process data containers, Hawkes model types and the integrated process.

Everything here is immutable once built. The heavy lifting for exponential
kernels is exact: between two consecutive events every integrated process
decays as ``exp(-rate * s)``, so time integrals reduce to closed-form sums over
inter-event segments.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numba import njit

__all__ = [
    "StabilityError",
    "NonConvergenceError",
    "EventStream",
    "ExperimentData",
    "MultiExperimentData",
    "ExponentialKernel",
    "TabulatedKernel",
    "Link",
    "UnitParams",
    "MultiModel",
    "ExperimentDesign",
    "integrated_process",
    "integrated_path",
    "event_states",
    "experiment_design",
    "quadrature_nodes",
    "exp_segments",
    "intensity",
    "least_squares_loss",
    "negloglik_loss",
    "negloglik_grad",
]


class StabilityError(ValueError):
    """Raised when model parameters violate the stationarity surrogate."""


class NonConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to converge."""


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventStream:
    """Sorted event times of a single unit observed on ``[0, horizon]``."""

    times: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        horizon = float(self.horizon)
        if not horizon > 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise ValueError("event times must be finite")
            if np.any(np.diff(times) < 0):
                raise ValueError("event times must be sorted ascending")
            if times[0] < 0 or times[-1] > horizon:
                raise ValueError("event times must lie in [0, horizon]")
            # simple point process: drop exact duplicates
            times = np.unique(times)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "horizon", horizon)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class ExperimentData:
    """``p`` event streams recorded during one experiment."""

    streams: tuple
    experiment_id: int = 1

    def __post_init__(self):
        streams = tuple(self.streams)
        if len(streams) < 1:
            raise ValueError("an experiment needs at least one unit")
        horizons = {s.horizon for s in streams}
        if len(horizons) != 1:
            raise ValueError("all streams of an experiment must share one horizon")
        object.__setattr__(self, "streams", streams)

    @classmethod
    def from_times(cls, times: Sequence[Sequence[float]], horizon: float,
                   experiment_id: int = 1) -> "ExperimentData":
        return cls(tuple(EventStream(t, horizon) for t in times), experiment_id)

    @property
    def p(self) -> int:
        return len(self.streams)

    @property
    def horizon(self) -> float:
        return self.streams[0].horizon

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.streams])

    def merged(self):
        """All events sorted by time, as ``(times, units)`` arrays."""
        times = np.concatenate([s.times for s in self.streams])
        units = np.concatenate(
            [np.full(len(s), i, dtype=np.int64) for i, s in enumerate(self.streams)])
        order = np.argsort(times, kind="stable")
        return times[order], units[order]


@dataclass(frozen=True)
class MultiExperimentData:
    experiments: tuple

    def __post_init__(self):
        experiments = tuple(self.experiments)
        if len(experiments) < 1:
            raise ValueError("need at least one experiment")
        if len({e.p for e in experiments}) != 1:
            raise ValueError("every experiment must have the same number of units")
        object.__setattr__(self, "experiments", experiments)

    @property
    def M(self) -> int:
        return len(self.experiments)

    @property
    def p(self) -> int:
        return self.experiments[0].p

    @property
    def horizons(self) -> np.ndarray:
        return np.array([e.horizon for e in self.experiments])

    @property
    def total_horizon(self) -> float:
        return float(self.horizons.sum())

    def __getitem__(self, m):
        return self.experiments[m]

    def __iter__(self):
        return iter(self.experiments)

    def __len__(self):
        return len(self.experiments)


# ---------------------------------------------------------------------------
# Kernels, links, parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialKernel:
    """``kappa(t) = exp(-rate * t)`` for ``t > 0``."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential kernel rate must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    @property
    def integral(self) -> float:
        return 1.0 / self.rate

    @property
    def support(self) -> float:
        return np.inf

    def to_dict(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class TabulatedKernel:
    """Kernel given by values on a support grid, linearly interpolated.

    The kernel is zero outside ``(grid[0], grid[-1]]``.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ValueError("kernel grid must be strictly increasing and nonnegative")
        if not np.all(np.isfinite(values)):
            raise ValueError("kernel values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.grid, self.values, left=0.0, right=0.0)
        return np.where(t > 0, out, 0.0)

    @property
    def integral(self) -> float:
        return float(np.trapezoid(np.abs(self.values), self.grid))

    @property
    def support(self) -> float:
        return float(self.grid[-1])

    @property
    def max_value(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self):
        return {"kind": "tabulated", "grid": self.grid.tolist(),
                "values": self.values.tolist()}


Kernel = Union[ExponentialKernel, TabulatedKernel]


def kernel_from_dict(d) -> Kernel:
    kind = d.get("kind", "exponential")
    if kind == "exponential":
        return ExponentialKernel(float(d.get("rate", 1.0)))
    if kind == "tabulated":
        return TabulatedKernel(d["grid"], d["values"])
    raise ValueError(f"unknown kernel kind {kind!r}")


class Link(str, enum.Enum):
    LINEAR = "linear"
    RELU = "relu"
    EXP = "exp"

    @classmethod
    def parse(cls, value) -> "Link":
        if isinstance(value, cls):
            return value
        aliases = {"rectified-linear": "relu", "exponential": "exp"}
        return cls(aliases.get(str(value).lower(), str(value).lower()))

    def apply(self, eta):
        if self is Link.EXP:
            with np.errstate(over="ignore"):
                return np.exp(eta)
        return np.maximum(eta, 0.0)


@dataclass(frozen=True)
class UnitParams:
    mu: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([[self.mu], self.beta])


@dataclass(frozen=True)
class MultiModel:
    """Background rates ``mu[m, i]`` and connectivity ``beta[m, i, j]`` (j -> i)."""

    mu: np.ndarray
    beta: np.ndarray
    kernel: Kernel = field(default_factory=ExponentialKernel)
    link: Link = Link.LINEAR

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 2:
            beta = beta[None]
        M, p = mu.shape
        if beta.shape != (M, p, p):
            raise ValueError(f"beta must have shape {(M, p, p)}, got {beta.shape}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "link", Link.parse(self.link))

    @property
    def M(self) -> int:
        return self.mu.shape[0]

    @property
    def p(self) -> int:
        return self.mu.shape[1]

    def unit(self, m: int, i: int) -> UnitParams:
        return UnitParams(self.mu[m, i], self.beta[m, i])

    def theta(self, m: int) -> np.ndarray:
        """``(p, p+1)`` array whose row ``i`` is ``(mu_i, beta_i)``."""
        return np.column_stack([self.mu[m], self.beta[m]])

    def row_mass(self) -> np.ndarray:
        """``max_i sum_j |beta_ij| * int kappa`` for every experiment."""
        return np.abs(self.beta).sum(axis=2).max(axis=1) * self.kernel.integral

    def is_stable(self) -> bool:
        return bool(np.all(self.row_mass() < 1.0))

    def adjacency(self) -> np.ndarray:
        return self.beta != 0

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "link": self.link.value,
            "experiments": [{"mu": self.mu[m].tolist(), "beta": self.beta[m].tolist()}
                            for m in range(self.M)],
        }

    @classmethod
    def from_dict(cls, d) -> "MultiModel":
        exps = d["experiments"]
        mu = np.array([e["mu"] for e in exps], dtype=float)
        beta = np.array([e["beta"] for e in exps], dtype=float)
        p = mu.shape[1]
        beta = beta.reshape(len(exps), p, p)
        return cls(mu, beta, kernel_from_dict(d.get("kernel", {})),
                   Link.parse(d.get("link", "linear")))


# ---------------------------------------------------------------------------
# Integrated process
# ---------------------------------------------------------------------------


def integrated_process(events: EventStream, kernel: Kernel, t: float) -> float:
    """Kernel-weighted sum of the events strictly before ``t``."""
    t = float(t)
    if t < 0 or t > events.horizon:
        raise ValueError(f"t={t} outside [0, {events.horizon}]")
    past = events.times[events.times < t]
    return float(np.sum(kernel(t - past)))


@njit(cache=True)
def _exp_states(times, units, p, rate):
    # left and right limits of x at every event; ties share one left limit
    n = times.shape[0]
    left = np.zeros((n, p))
    right = np.zeros((n, p))
    x = np.zeros(p)
    last = 0.0
    k = 0
    while k < n:
        t = times[k]
        d = np.exp(-rate * (t - last))
        for j in range(p):
            x[j] *= d
        last = t
        k2 = k
        while k2 < n and times[k2] == t:
            left[k2, :] = x
            k2 += 1
        for q in range(k, k2):
            x[units[q]] += 1.0
        for q in range(k, k2):
            right[q, :] = x
        k = k2
    return left, right


def event_states(exp: ExperimentData, kernel: Kernel):
    """Merged events with the integrated process just before each of them.

    Returns ``(times, units, left)`` where ``left[k]`` is ``x(times[k]-)``.
    """
    times, units = exp.merged()
    if isinstance(kernel, ExponentialKernel):
        left, _ = _exp_states(times, units, exp.p, kernel.rate)
    else:
        left = _tabulated_path(exp, kernel, times)
    return times, units, left


def _tabulated_path(exp: ExperimentData, kernel: TabulatedKernel, grid):
    out = np.zeros((grid.size, exp.p))
    support = kernel.support
    for j, s in enumerate(exp.streams):
        if not len(s):
            continue
        lo = np.searchsorted(grid, s.times, side="right")
        hi = np.searchsorted(grid, s.times + support, side="right")
        for tk, a, b in zip(s.times, lo, hi):
            if b > a:
                out[a:b, j] += kernel(grid[a:b] - tk)
    return out


def integrated_path(exp: ExperimentData, kernel: Kernel, grid) -> np.ndarray:
    """``x(t)`` for all units at every grid point, as a ``p x len(grid)`` array.

    Left-limit convention: an event exactly at a grid point does not count.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size and (np.any(np.diff(grid) < 0) or grid[0] < 0 or grid[-1] > exp.horizon):
        raise ValueError("grid must be sorted within [0, horizon]")
    if not isinstance(kernel, ExponentialKernel):
        return _tabulated_path(exp, kernel, grid).T
    times, units = exp.merged()
    out = np.zeros((exp.p, grid.size))
    if times.size == 0:
        return out
    _, right = _exp_states(times, units, exp.p, kernel.rate)
    k = np.searchsorted(times, grid, side="left")
    has = k > 0
    idx = k[has] - 1
    out[:, has] = (right[idx] * np.exp(-kernel.rate * (grid[has] - times[idx]))[:, None]).T
    return out


# ---------------------------------------------------------------------------
# Design (sufficient statistics of the least-squares loss)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentDesign:
    """``Q = int (1, x)(1, x)^T dt``, ``gamma[i] = sum_{events of i} (1, x(t-))``."""

    Q: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray
    horizon: float

    @property
    def p(self) -> int:
        return self.gamma.shape[0]


def default_grid_step(exp: ExperimentData) -> float:
    n = max(int(exp.counts.sum()), 1)
    step = 0.01 * exp.horizon / n
    return max(step, exp.horizon / 1e6)


def experiment_design(exp: ExperimentData, kernel: Kernel, grid_step=None) -> ExperimentDesign:
    p, T = exp.p, exp.horizon
    times, units, left = event_states(exp, kernel)
    gamma = np.zeros((p, p + 1))
    gamma[:, 0] = exp.counts
    np.add.at(gamma[:, 1:], units, left)
    Q = np.zeros((p + 1, p + 1))
    if isinstance(kernel, ExponentialKernel):
        Q[0, 0] = T
        if times.size:
            r = kernel.rate
            _, right = _exp_states(times, units, p, r)
            seg = np.diff(np.append(times, T))
            w1 = -np.expm1(-r * seg) / r
            w2 = -np.expm1(-2 * r * seg) / (2 * r)
            Q[0, 1:] = Q[1:, 0] = w1 @ right
            Q[1:, 1:] = (right * w2[:, None]).T @ right
    else:
        X, w = quadrature_nodes(exp, kernel, grid_step)
        Z = np.column_stack([np.ones(len(w)), X])
        Q = (Z * w[:, None]).T @ Z
    return ExperimentDesign(Q, gamma, exp.counts.copy(), T)


def exp_segments(exp: ExperimentData, kernel: ExponentialKernel):
    """Inter-event pieces ``(lengths, start_states)`` covering ``[0, T]``.

    On a piece of length ``d`` starting in state ``s`` the process is
    ``x(t0 + u) = s * exp(-rate * u)`` for ``0 <= u < d``.
    """
    times, units = exp.merged()
    p, T = exp.p, exp.horizon
    right = _exp_states(times, units, p, kernel.rate)[1] if times.size else np.zeros((0, p))
    starts = np.concatenate([[0.0], times])
    lengths = np.concatenate([times, [T]]) - starts
    state = np.vstack([np.zeros((1, p)), right])
    keep = lengths > 0
    return lengths[keep], state[keep]


def quadrature_nodes(exp: ExperimentData, kernel: Kernel, grid_step=None):
    """Trapezoidal nodes ``(X, weights)`` for integrals of functions of ``x(t)``.

    For exponential kernels every inter-event segment is split into pieces of
    width at most ``grid_step`` and the trapezoid uses the right limit at the
    segment start and the left limit at its end, so the rule is exact for
    integrands affine in ``x``. Tabulated kernels use a plain uniform grid.
    """
    T = exp.horizon
    step = float(grid_step) if grid_step else default_grid_step(exp)
    if not isinstance(kernel, ExponentialKernel):
        n = int(min(max(np.ceil(T / step), 1), 1e6))
        grid = np.linspace(0.0, T, n + 1)
        w = np.full(n + 1, T / n)
        w[[0, -1]] *= 0.5
        return integrated_path(exp, kernel, grid).T, w
    r = kernel.rate
    seg, state = exp_segments(exp, kernel)
    pieces = np.maximum(np.ceil(seg / step), 1).astype(np.int64)
    if pieces.sum() > 1e6:
        pieces = np.maximum(np.ceil(pieces * (1e6 / pieces.sum())), 1).astype(np.int64)
    nodes_per = pieces + 1
    seg_id = np.repeat(np.arange(seg.size), nodes_per)
    offs = np.arange(nodes_per.sum()) - np.repeat(np.cumsum(nodes_per) - nodes_per, nodes_per)
    h = seg[seg_id] / pieces[seg_id]
    s = offs * h
    X = state[seg_id] * np.exp(-r * s)[:, None]
    w = h.copy()
    first = offs == 0
    last = offs == pieces[seg_id]
    w[first | last] *= 0.5
    return X, w


# ---------------------------------------------------------------------------
# Intensity and losses
# ---------------------------------------------------------------------------


def intensity(params: UnitParams, x, link=Link.LINEAR) -> float:
    """``g(mu + x . beta)``; linear links are rectified at zero."""
    link = Link.parse(link)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != params.beta.shape:
        raise ValueError("x and beta dimensions differ")
    eta = params.mu + float(x @ params.beta)
    if not np.isfinite(eta):
        raise OverflowError("non-finite linear predictor")
    lam = float(link.apply(eta))
    if not np.isfinite(lam):
        raise OverflowError("intensity overflow under exponential link")
    return lam


def _theta(params, p):
    theta = params.theta if isinstance(params, UnitParams) else np.asarray(params, float)
    if theta.shape != (p + 1,):
        raise ValueError(f"parameter vector must have length {p + 1}")
    return theta


def least_squares_loss(data, i: int, params, kernel: Kernel = None) -> float:
    """``int lambda^2 dt - 2 int lambda dN + N(T)`` for unit ``i``.

    ``data`` is either an :class:`ExperimentData` (the design is built from
    ``kernel``) or a precomputed :class:`ExperimentDesign`.
    """
    design = data if isinstance(data, ExperimentDesign) else experiment_design(data, kernel)
    theta = _theta(params, design.p)
    g = design.gamma[i]
    return float(theta @ design.Q @ theta - 2 * theta @ g + design.counts[i])


def _nll_parts(exp, i, kernel, grid_step, nodes=None, events=None):
    if nodes is None:
        nodes = quadrature_nodes(exp, kernel, grid_step)
    if events is None:
        _, units, left = event_states(exp, kernel)
        events = left[units == i]
    return nodes, events


def negloglik_loss(exp: ExperimentData, i: int, params, kernel: Kernel,
                   grid_step=None, nodes=None, events=None) -> float:
    """``-sum log lambda(t_k-) + int lambda dt`` under the exponential link."""
    theta = _theta(params, exp.p)
    (X, w), Xe = _nll_parts(exp, i, kernel, grid_step, nodes, events)
    eta_nodes = theta[0] + X @ theta[1:]
    with np.errstate(over="ignore"):
        integral = float(w @ np.exp(eta_nodes))
    if not np.isfinite(integral):
        raise OverflowError("intensity overflow under exponential link")
    return float(-np.sum(theta[0] + Xe @ theta[1:]) + integral)


def negloglik_grad(exp: ExperimentData, i: int, params, kernel: Kernel,
                   grid_step=None, nodes=None, events=None) -> np.ndarray:
    theta = _theta(params, exp.p)
    (X, w), Xe = _nll_parts(exp, i, kernel, grid_step, nodes, events)
    lam = w * np.exp(theta[0] + X @ theta[1:])
    grad = np.empty(exp.p + 1)
    grad[0] = lam.sum() - Xe.shape[0]
    grad[1:] = lam @ X - Xe.sum(axis=0)
    return grad
