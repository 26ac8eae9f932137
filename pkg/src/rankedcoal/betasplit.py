"""Beta-splitting tree sampler (Blum-Francois) for the power studies.

Shapes are built by recursive (i, k-i) splits with weights
Gamma(b+1+i)Gamma(b+1+k-i) / (Gamma(i+1)Gamma(k-i+1)); ranks follow a
uniform random linear extension of the node poset, realized forward in
time by picking the next block to split with probability proportional
to size - 1. At b = 0 this reproduces the Kingman ranked-shape law.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import lgamma

import numpy as np

from ._common import ValidationError
from ._kernels import beta_sample_stats
from .fmatrix import FMatrix, nonfixed_index_table


@dataclass(frozen=True)
class BetaConfig:
    beta: float
    n: int
    seed: int

    def __post_init__(self):
        if not self.beta > -2:
            raise ValidationError(f"beta must exceed -2, got {self.beta}")
        if self.n < 3:
            raise ValidationError(f"n must be >= 3, got {self.n}")


@lru_cache(maxsize=4096)
def split_weights(beta, k):
    """P(left part = i), i = 1..k-1, for a block of k leaves."""
    if not beta > -2:
        raise ValidationError(f"beta must exceed -2, got {beta}")
    if k < 2:
        raise ValidationError(f"split requires a block of size >= 2, got {k}")
    logs = np.array([
        lgamma(beta + 1 + i) + lgamma(beta + 1 + k - i)
        - lgamma(i + 1) - lgamma(k - i + 1)
        for i in range(1, k)
    ])
    w = np.exp(logs - logs.max())
    return w / w.sum()


def _cumulative_table(beta, n):
    """cumw[k, i] = P(left part <= i) rows for every block size k <= n."""
    cumw = np.zeros((n + 1, max(n, 2)))
    for k in range(2, n + 1):
        cumw[k, 1:k] = np.cumsum(split_weights(beta, k))
        cumw[k, k - 1] = 1.0
    return cumw


def _sample_edges(n, beta, rng):
    """One ranked shape as (parent rank, child rank) edges; leaves rank n+1."""
    sizes = [n]
    parents = [0]
    edges = []
    for ev in range(2, n + 1):
        remaining = n - ev + 1
        target = rng.random() * remaining
        pick = -1
        acc = 0.0
        for b, size in enumerate(sizes):
            w = size - 1
            if w > 0:
                if acc + w > target:
                    pick = b
                    break
                acc += w
        if pick < 0:
            pick = max(b for b, size in enumerate(sizes) if size > 1)
        k = sizes[pick]
        if parents[pick] > 0:
            edges.append((parents[pick], ev))
        # Always consume the split uniform so every event costs exactly two
        # draws, keeping this stream aligned with the batch kernel's.
        u_split = rng.random()
        if k == 2:
            left = 1
        else:
            cum = np.cumsum(split_weights(beta, k))
            left = 1 + int(np.searchsorted(cum, u_split, side="right"))
            left = min(left, k - 1)
        sizes[pick] = left
        parents[pick] = ev
        sizes.append(k - left)
        parents.append(ev)
    for b in range(len(sizes)):
        edges.append((parents[b], n + 1))
    return edges


def _edges_to_fmatrix(n, edges):
    """F_ij = #edges with parent rank <= j+1 and child rank >= i+2."""
    grid = np.zeros((n + 3, n + 3), dtype=np.int64)
    for p, c in edges:
        grid[p, c] += 1
    grid = grid[:, ::-1].cumsum(axis=1)[:, ::-1]
    grid = grid.cumsum(axis=0)
    entries = np.zeros((n - 1, n - 1), dtype=np.int64)
    for i in range(1, n):
        for j in range(1, i + 1):
            entries[i - 1, j - 1] = grid[j + 1, i + 2]
    return FMatrix(n=n, entries=entries)


def sample_beta_tree(config, rng=None):
    """One F-matrix drawn from the model; deterministic given the seed."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    edges = _sample_edges(config.n, config.beta, rng)
    return _edges_to_fmatrix(config.n, edges)


def sample_beta_fmatrices(config, count):
    """A list of ``count`` F-matrices from one seeded stream."""
    rng = np.random.default_rng(config.seed)
    return [sample_beta_tree(config, rng=rng) for _ in range(count)]


def sample_beta_stats(config, count, rng=None):
    """(S, E, non-fixed entries) per tree via the batch kernel.

    Orders of magnitude faster than materializing F-matrices; the power
    harness runs on this path.
    """
    n = config.n
    if rng is None:
        rng = np.random.default_rng(config.seed)
    cumw = _cumulative_table(config.beta, n)
    uniforms = rng.random((count, 2 * (n - 1)))
    pos = nonfixed_index_table(n)
    return beta_sample_stats(n, cumw, uniforms, pos)
