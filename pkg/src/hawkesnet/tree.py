"""Left-leaf binary hierarchies over experiments.

A tree is stored as ``order``: ``order[0]`` is the left leaf hanging off the
root, ``order[-1]`` the bottom-right leaf. Level ``l >= 2`` splits the set
``order[l-2:]`` into the singleton ``{order[l-2]}`` and the rest. Experiments
are numbered from 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimilarityTree",
    "build_tree",
    "node_sets",
    "oracle_tree",
    "tree_from_node_sets",
    "save_tree",
    "load_tree",
]


@dataclass(frozen=True)
class SimilarityTree:
    order: tuple
    source: str = "empirical"

    def __post_init__(self):
        order = tuple(int(k) for k in self.order)
        if sorted(order) != list(range(1, len(order) + 1)):
            raise ValueError(f"order {order} is not a permutation of 1..{len(order)}")
        object.__setattr__(self, "order", order)

    @property
    def M(self) -> int:
        return len(self.order)

    def levels(self):
        return [node_sets(self, l) for l in range(1, self.M + 1)]

    def to_dict(self):
        return {"order": list(self.order), "source": self.source}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["order"]), d.get("source", "custom"))


def _pick(scores, candidates):
    # ties go to the highest index: the tree is built bottom-up, so the
    # lower-indexed experiment ends up nearer the root
    best = max(scores[c] for c in candidates)
    return max(c for c in candidates if scores[c] == best)


def build_tree(similarity, edge_counts, source="empirical") -> SimilarityTree:
    """Bottom-up single-linkage construction.

    The bottom-right leaf is the experiment with the fewest edges; each step
    then moves the remaining experiment most similar to any member of the
    current right set into the next left leaf above it.
    """
    S = np.asarray(similarity, dtype=float)
    counts = np.asarray(edge_counts)
    M = counts.size
    if M < 1:
        raise ValueError("need at least one experiment")
    if S.shape != (M, M):
        raise ValueError(f"similarity must be {M} x {M}")
    if not np.allclose(S, S.T):
        raise ValueError("similarity must be symmetric")
    S = S.copy()
    np.fill_diagonal(S, 0.0)
    # fewest edges; on ties the highest index, mirroring _pick
    bottom = _pick(-counts, range(M))
    right = [bottom]
    remaining = [m for m in range(M) if m != bottom]
    while remaining:
        linkage = {c: S[c, right].max() for c in remaining}
        nxt = _pick(linkage, remaining)
        right.append(nxt)
        remaining.remove(nxt)
    return SimilarityTree(tuple(m + 1 for m in reversed(right)), source)


def node_sets(tree: SimilarityTree, level: int):
    """``(left, right)`` experiment sets at ``level`` (1-based)."""
    M = tree.M
    if not 1 <= level <= M:
        raise ValueError(f"level must lie in 1..{M}")
    if level == 1:
        return frozenset(tree.order), frozenset()
    return frozenset({tree.order[level - 2]}), frozenset(tree.order[level - 1:])


def tree_from_node_sets(levels, source="custom") -> SimilarityTree:
    """Inverse of :meth:`SimilarityTree.levels`."""
    M = len(levels)
    order = [next(iter(levels[l][0])) for l in range(1, M)]
    last = set(levels[0][0]) - set(order)
    return SimilarityTree(tuple(order) + tuple(last), source)


def oracle_tree(beta_k) -> SimilarityTree:
    """Edge-specific tree from the true coefficients of one edge across experiments.

    Similarity is ``-|beta^(s) - beta^(t)|`` and the zeros count as the
    sparsest networks, so every zero lands in the bottom-right suffix.
    """
    b = np.asarray(beta_k, dtype=float).ravel()
    S = -np.abs(b[:, None] - b[None, :])
    # shift to nonnegative so the diagonal (zeroed) never wins
    S = S - S.min() + 1.0
    counts = (b != 0).astype(int)
    return build_tree(S, counts, source="oracle")


def save_tree(tree: SimilarityTree, path):
    with open(path, "w") as fh:
        json.dump(tree.to_dict(), fh)


def load_tree(path) -> SimilarityTree:
    with open(path) as fh:
        return SimilarityTree.from_dict(json.load(fh))
