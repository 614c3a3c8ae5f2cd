"""Binned lagged cross-correlations, thresholding and network similarity weights."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.stats import norm

from .core import ExperimentData

__all__ = [
    "CrossCovMatrix",
    "ThresholdedCov",
    "SimilarityWeights",
    "AbsoluteRule",
    "PValueRule",
    "parse_rule",
    "bin_counts",
    "cross_covariance",
    "threshold_covariance",
    "fisher_pvalues",
    "matrix_similarity",
    "empirical_similarity",
    "similarity_matrix",
    "similarity_weights",
    "weights_from_counts",
    "uniform_weights",
    "oracle_weights",
    "connected_component_similarity",
]


@dataclass(frozen=True)
class CrossCovMatrix:
    """Signed max-|lag| correlations; ``values[i, j]`` is unit ``j`` leading unit ``i``."""

    values: np.ndarray
    n_bins: int
    bin_width: float
    max_lag: int
    lags: np.ndarray = None
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_bins < 4:
            raise ValueError("need at least 4 bins")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cross-covariance entries must be finite")


@dataclass(frozen=True)
class AbsoluteRule:
    kappa: float


@dataclass(frozen=True)
class PValueRule:
    """Keep entries whose Fisher-z p-value is below ``cutoff``.

    With ``adjust_lags`` the single-lag p-value is Sidak-corrected for the
    maximum taken over ``max_lag`` lags.
    """

    cutoff: float = 0.1
    adjust_lags: bool = True

    def __post_init__(self):
        if not 0 < self.cutoff < 1:
            raise ValueError("p-value cutoff must lie in (0, 1)")


def parse_rule(text: str):
    """Parse ``"pvalue:0.1"`` or ``"abs:0.2"``."""
    kind, _, value = text.partition(":")
    if kind == "pvalue":
        return PValueRule(float(value) if value else 0.1)
    if kind == "abs":
        return AbsoluteRule(float(value))
    raise ValueError(f"unknown threshold rule {text!r}; use pvalue:<c> or abs:<kappa>")


@dataclass(frozen=True)
class ThresholdedCov:
    values: np.ndarray
    rule: object


@dataclass(frozen=True)
class SimilarityWeights:
    """Symmetric ``M x M`` fusion weights; off-diagonal entries sum to one."""

    W: np.ndarray
    counts: np.ndarray = None

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("W must be square")
        if not np.allclose(W, W.T) or np.any(W < 0) or np.any(np.diag(W) != 0):
            raise ValueError("W must be symmetric, nonnegative, with zero diagonal")
        object.__setattr__(self, "W", W)

    @property
    def M(self) -> int:
        return self.W.shape[0]


def bin_counts(exp: ExperimentData, bin_width: float) -> np.ndarray:
    """``p x n_bins`` matrix of event counts."""
    n_bins = int(np.floor(exp.horizon / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    return np.vstack([np.histogram(s.times, edges)[0] for s in exp.streams]).astype(float)


def cross_covariance(exp: ExperimentData, bin_width: float = 1.0,
                     max_lag: int = 5) -> CrossCovMatrix:
    """Lagged Pearson correlation of binned counts, maximised in ``|.|`` over lags.

    Entry ``(i, j)`` is ``corr(c_i[t], c_j[t - h])`` at the lag ``h`` in
    ``1..max_lag`` with the largest magnitude, keeping its sign. The diagonal is
    zero. Units without events get zero rows/columns and a warning.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if exp.horizon / bin_width < 8:
        raise ValueError("horizon / bin_width must be at least 8")
    C = bin_counts(exp, bin_width)
    p, n = C.shape
    if n <= max_lag + 2:
        raise ValueError("too few bins for the requested max_lag")
    best = np.zeros((p, p))
    best_lag = np.zeros((p, p), dtype=int)
    sd_all = C.std(axis=1)
    degenerate = sd_all == 0
    if degenerate.any():
        warnings.warn(f"units {np.flatnonzero(degenerate).tolist()} have zero variance; "
                      "their cross-covariances are set to 0", RuntimeWarning)
    for h in range(1, max_lag + 1):
        lead = C[:, : n - h]
        lag = C[:, h:]
        a = lag - lag.mean(axis=1, keepdims=True)
        b = lead - lead.mean(axis=1, keepdims=True)
        sa = np.sqrt((a * a).sum(axis=1))
        sb = np.sqrt((b * b).sum(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = (a @ b.T) / np.outer(sa, sb)
        r = np.nan_to_num(r, nan=0.0, posinf=0.0, neginf=0.0)
        better = np.abs(r) > np.abs(best)
        best = np.where(better, r, best)
        best_lag = np.where(better, h, best_lag)
    np.fill_diagonal(best, 0.0)
    best[degenerate, :] = 0.0
    best[:, degenerate] = 0.0
    best = np.clip(best, -1.0, 1.0)
    return CrossCovMatrix(best, n, float(bin_width), int(max_lag), best_lag, degenerate)


def fisher_pvalues(V: CrossCovMatrix, adjust_lags=False) -> np.ndarray:
    """Two-sided p-values of ``atanh(r) * sqrt(n_bins - 3)``."""
    r = np.clip(V.values, -1 + 1e-15, 1 - 1e-15)
    z = np.arctanh(r) * np.sqrt(V.n_bins - 3)
    pv = 2 * norm.sf(np.abs(z))
    if adjust_lags and V.max_lag > 1:
        with np.errstate(divide="ignore"):
            pv = -np.expm1(V.max_lag * np.log1p(-pv))
    return pv


def threshold_covariance(V: CrossCovMatrix, rule=None) -> ThresholdedCov:
    rule = PValueRule() if rule is None else rule
    if isinstance(rule, str):
        rule = parse_rule(rule)
    if isinstance(rule, AbsoluteRule):
        keep = np.abs(V.values) > rule.kappa
    elif isinstance(rule, PValueRule):
        keep = (fisher_pvalues(V, rule.adjust_lags) < rule.cutoff) & (V.values != 0)
    else:
        raise TypeError(f"unsupported rule {rule!r}")
    return ThresholdedCov(np.where(keep, V.values, 0.0), rule)


def matrix_similarity(A, B) -> int:
    """Number of positions where ``A`` and ``B`` are nonzero with the same sign."""
    A = np.asarray(getattr(A, "values", A))
    B = np.asarray(getattr(B, "values", B))
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return int(np.count_nonzero(A * B > 0))


def empirical_similarity(Vm: ThresholdedCov, Vn: ThresholdedCov) -> int:
    return matrix_similarity(Vm.values, Vn.values)


def similarity_matrix(mats) -> np.ndarray:
    """Pairwise similarity counts; the diagonal holds each matrix's nonzero count."""
    mats = [np.asarray(getattr(A, "values", A)) for A in mats]
    M = len(mats)
    S = np.zeros((M, M), dtype=int)
    for m in range(M):
        for n in range(m, M):
            S[m, n] = S[n, m] = matrix_similarity(mats[m], mats[n])
    return S


def weights_from_counts(counts) -> SimilarityWeights:
    """Normalise off-diagonal similarity counts over ordered pairs."""
    counts = np.array(counts, dtype=float)
    M = counts.shape[0]
    if M < 2:
        raise ValueError("similarity weights need at least two experiments")
    np.fill_diagonal(counts, 0.0)
    total = counts.sum()
    if total > 0:
        W = counts / total
    else:
        W = np.full((M, M), 1.0 / (M * (M - 1)))
        np.fill_diagonal(W, 0.0)
    return SimilarityWeights(W, counts)


def similarity_weights(thresholded) -> SimilarityWeights:
    """Fusion weights from a list of thresholded cross-covariance matrices."""
    thresholded = list(thresholded)
    if len(thresholded) < 2:
        raise ValueError("similarity weights need at least two experiments")
    return weights_from_counts(similarity_matrix(thresholded))


def uniform_weights(M) -> SimilarityWeights:
    return weights_from_counts(np.zeros((M, M)))


def oracle_weights(beta) -> SimilarityWeights:
    """Weights from the true adjacency (shared nonzero pattern) of ``beta[m]``."""
    beta = np.asarray(beta)
    return weights_from_counts(similarity_matrix([(b != 0).astype(float) for b in beta]))


def _components(adj, p):
    A = sparse.csr_matrix(np.asarray(adj) != 0)
    _, labels = connected_components(A, directed=False)
    return labels


def connected_component_similarity(G, H, p=None) -> float:
    """Negative variation of information between connected-component partitions.

    ``G`` and ``H`` are ``p x p`` (weighted) adjacency matrices or edge lists
    when ``p`` is given; edges are treated as undirected.
    """
    def as_adj(E):
        E = np.asarray(E)
        if E.ndim == 2 and E.shape[0] == E.shape[1] and (p is None or E.shape[0] == p):
            return E
        A = np.zeros((p, p))
        for i, j in E:
            A[i, j] = 1
        return A

    if p is None:
        p = np.asarray(G).shape[0]
    a = _components(as_adj(G), p)
    b = _components(as_adj(H), p)
    r = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(r, (a, b), 1.0)
    r /= p
    pa = r.sum(axis=1, keepdims=True)
    qb = r.sum(axis=0, keepdims=True)
    nz = r > 0
    terms = r * (np.log(r / pa, where=nz, out=np.zeros_like(r))
                 + np.log(r / qb, where=nz, out=np.zeros_like(r)))
    # fsum is order independent, so swapping G and H gives the identical value
    return math.fsum(terms[nz].ravel())
