"""Ogata thinning for multivariate Hawkes processes and benchmark networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (EventStream, ExperimentData, ExponentialKernel, Link,
                   MultiExperimentData, MultiModel, StabilityError,
                   TabulatedKernel)

__all__ = [
    "MotifSpec",
    "MAX_EVENTS",
    "simulate_hawkes",
    "simulate_multi",
    "experiment_seeds",
    "motif_adjacency",
    "make_benchmark_networks",
    "default_layouts",
]

MAX_EVENTS = 10_000_000

_LINK_CODES = {Link.LINEAR: 0, Link.RELU: 0, Link.EXP: 1}


@njit(cache=True)
def _link(eta, code):
    if code == 1:
        return np.exp(eta)
    return eta if eta > 0.0 else 0.0


@njit(cache=True)
def _thin_exponential(mu, beta, rate, code, t0, t1, seed, max_events):
    np.random.seed(seed)
    p = mu.shape[0]
    a = np.zeros(p)
    lam = np.zeros(p)
    cap = 1024
    out_t = np.empty(cap)
    out_u = np.empty(cap, dtype=np.int64)
    n = 0
    t = t0
    while True:
        # excitation decays monotonically towards 0 between events, so
        # g(mu + max(a, 0)) bounds every intensity until the next event
        bound = 0.0
        for i in range(p):
            ai = a[i] if a[i] > 0.0 else 0.0
            bound += _link(mu[i] + ai, code)
        if bound <= 0.0:
            # rectified linear with nonpositive drive stays silent
            break
        w = -np.log(1.0 - np.random.random()) / bound
        t += w
        if t > t1:
            break
        d = np.exp(-rate * w)
        total = 0.0
        for i in range(p):
            a[i] *= d
            lam[i] = _link(mu[i] + a[i], code)
            total += lam[i]
        u = np.random.random() * bound
        if u < total:
            k = 0
            acc = lam[0]
            while acc <= u and k < p - 1:
                k += 1
                acc += lam[k]
            if n == cap:
                cap *= 2
                nt = np.empty(cap)
                nu = np.empty(cap, dtype=np.int64)
                nt[:n] = out_t[:n]
                nu[:n] = out_u[:n]
                out_t = nt
                out_u = nu
            out_t[n] = t
            out_u[n] = k
            n += 1
            if n > max_events:
                return out_t[:n], out_u[:n], False
            for i in range(p):
                a[i] += beta[i, k]
    return out_t[:n], out_u[:n], True


def _thin_tabulated(mu, beta, kernel: TabulatedKernel, link: Link, t0, t1, rng,
                    max_events):
    p = mu.size
    support = kernel.support
    kmax = kernel.max_value
    bpos = np.maximum(beta, 0.0)
    look = support / 10.0
    hist_t, hist_u = [], []
    t = t0
    while t < t1:
        ht = np.asarray(hist_t)
        hu = np.asarray(hist_u, dtype=np.int64)
        recent = ht > t - support
        n_recent = np.bincount(hu[recent], minlength=p) if ht.size else np.zeros(p)
        bound = link.apply(mu + bpos @ n_recent * kmax).sum()
        if bound <= 0:
            t += look
            continue
        w = rng.exponential(1.0 / bound)
        if w > look:
            t += look
            continue
        t += w
        if t > t1:
            break
        x = np.zeros(p)
        if ht.size:
            live = recent & (ht < t)
            np.add.at(x, hu[live], kernel(t - ht[live]))
        lam = link.apply(mu + beta @ x)
        u = rng.random() * bound
        if u < lam.sum():
            k = int(np.searchsorted(np.cumsum(lam), u, side="right"))
            hist_t.append(t)
            hist_u.append(min(k, p - 1))
            if len(hist_t) > max_events:
                raise RuntimeError(f"runaway simulation: more than {max_events} events")
    return np.asarray(hist_t, dtype=float), np.asarray(hist_u, dtype=np.int64)


def _check_stability(mu, beta, kernel, link):
    if link is Link.EXP:
        return
    mass = np.abs(beta).sum(axis=1).max() * kernel.integral
    if not mass < 1.0:
        raise StabilityError(
            f"unstable parameters: max_i sum_j |beta_ij| * int kappa = {mass:.3f} >= 1")


def simulate_hawkes(mu, beta, kernel=None, link=Link.LINEAR, T=1.0, seed=0,
                    burn_in=None, experiment_id=1,
                    max_events=MAX_EVENTS) -> ExperimentData:
    """Simulate one experiment of a generalized Hawkes process by thinning.

    Parameters
    ----------
    mu : array of shape (p,)
        Background rates (on the linear-predictor scale).
    beta : array of shape (p, p)
        ``beta[i, j]`` is the effect of unit ``j`` events on unit ``i``.
    kernel : ExponentialKernel or TabulatedKernel
    link : Link
        Linear links are rectified at zero.
    T : float
        Observation horizon.
    seed : int
    burn_in : float, optional
        Length of the discarded warm-up period. Defaults to ``10 / rate`` for
        exponential kernels and ``10 * support`` for tabulated ones.

    Returns
    -------
    ExperimentData
    """
    kernel = ExponentialKernel() if kernel is None else kernel
    link = Link.parse(link)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    p = mu.size
    if beta.shape != (p, p):
        raise ValueError(f"beta must have shape {(p, p)}")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    _check_stability(mu, beta, kernel, link)
    if burn_in is None:
        burn_in = 10.0 / kernel.rate if isinstance(kernel, ExponentialKernel) \
            else 10.0 * kernel.support
    seed = int(seed) % (2**32)
    if isinstance(kernel, ExponentialKernel):
        times, units, ok = _thin_exponential(mu, beta, kernel.rate, _LINK_CODES[link],
                                             -float(burn_in), float(T), seed, max_events)
        if not ok:
            raise RuntimeError(f"runaway simulation: more than {max_events} events")
    else:
        times, units = _thin_tabulated(mu, beta, kernel, link, -float(burn_in), float(T),
                                       np.random.default_rng(seed), max_events)
    keep = times >= 0
    times, units = times[keep], units[keep]
    streams = tuple(EventStream(times[units == i], T) for i in range(p))
    return ExperimentData(streams, experiment_id)


def experiment_seeds(seed, M):
    """Independent per-experiment seeds derived from one master seed."""
    children = np.random.SeedSequence(int(seed)).spawn(M)
    return [int(c.generate_state(1)[0]) for c in children]


def simulate_multi(model: MultiModel, horizons, seed=0, burn_in=None) -> MultiExperimentData:
    """Independent simulations of every experiment in ``model``."""
    horizons = np.broadcast_to(np.asarray(horizons, dtype=float), (model.M,))
    for m in range(model.M):
        _check_stability(model.mu[m], model.beta[m], model.kernel, model.link)
    seeds = experiment_seeds(seed, model.M)
    return MultiExperimentData(tuple(
        simulate_hawkes(model.mu[m], model.beta[m], model.kernel, model.link,
                        horizons[m], seeds[m], burn_in, experiment_id=m + 1)
        for m in range(model.M)))


# ---------------------------------------------------------------------------
# Benchmark networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MotifSpec:
    motif: str = "circle"
    motif_size: int = 5
    coefficient: float = 0.3

    def __post_init__(self):
        if self.motif not in ("circle", "star"):
            raise ValueError(f"unknown motif {self.motif!r}")
        if self.motif_size < 3:
            raise ValueError("motif_size must be at least 3")


def motif_adjacency(spec: MotifSpec) -> np.ndarray:
    """Coefficient block of one motif; ``block[i, j]`` is the edge j -> i.

    Circles are the directed cycle 0 -> 1 -> ... -> k-1 -> 0; stars point from
    the hub (node 0) to every leaf.
    """
    k = spec.motif_size
    block = np.zeros((k, k))
    if spec.motif == "circle":
        block[(np.arange(k) + 1) % k, np.arange(k)] = spec.coefficient
    else:
        block[1:, 0] = spec.coefficient
    return block


def default_layouts(p, motif_size=5, circle=0.3, star=0.6, n_experiments=3):
    """Motif layouts of the three benchmark networks.

    Network 1 is all circles, network 3 all stars and network 2 replaces the
    last tenth of network 1's circles, rounded to the nearest motif, by the
    stars of network 3. With fewer than five motifs that rounds to none and
    network 2 equals network 1. Extra experiments beyond three repeat network 1.
    """
    if p % motif_size:
        raise ValueError(f"p={p} is not divisible by motif_size={motif_size}")
    n = p // motif_size
    c = MotifSpec("circle", motif_size, circle)
    s = MotifSpec("star", motif_size, star)
    n_star = int(round(0.1 * n))
    net1 = [c] * n
    net2 = [c] * (n - n_star) + [s] * n_star
    net3 = [s] * n
    layouts = [net1, net2, net3]
    layouts += [net1] * max(0, n_experiments - 3)
    return layouts[:n_experiments]


def make_benchmark_networks(p=100, layouts=None, mu=0.2, kernel=None,
                            link=Link.LINEAR) -> MultiModel:
    """Block-diagonal motif networks, one layout (list of motifs) per experiment."""
    if layouts is None:
        layouts = default_layouts(p)
    M = len(layouts)
    beta = np.zeros((M, p, p))
    for m, layout in enumerate(layouts):
        start = 0
        for spec in layout:
            if p % spec.motif_size:
                raise ValueError(f"p={p} is not divisible by motif_size={spec.motif_size}")
            stop = start + spec.motif_size
            beta[m, start:stop, start:stop] = motif_adjacency(spec)
            start = stop
        if start != p:
            raise ValueError(f"layout of experiment {m + 1} covers {start} units, not p={p}")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (M, p)).copy()
    return MultiModel(mu, beta, kernel or ExponentialKernel(1.0), link)
