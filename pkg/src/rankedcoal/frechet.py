"""ViTreebi: cost recursion, exhaustive backtracking, Frechet means.

The forward pass is exact rational whenever the mean matrix is rational
and n is small enough for big-denominator arithmetic; otherwise float64
with a tie window wide enough to keep exact ties and tight enough to
exclude genuinely distinct costs.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._common import CapacityError, ValidationError
from ._kernels import argmin_edges, vitreebi_forward
from .fmatrix import nonfixed_positions

EXACT_MAX_N = 16
DEFAULT_PATH_CAP = 10 ** 6
DEFAULT_TIE_TOL = 1e-9


@dataclass
class MeanMatrix:
    """Lower-triangular mean of F-matrices; entries rational or float."""

    n: int
    M: np.ndarray

    def __post_init__(self):
        if self.M.shape != (self.n - 1, self.n - 1):
            raise ValidationError(f"mean matrix must be {self.n - 1}x{self.n - 1}")

    @property
    def mode(self):
        return "rational" if self.M.dtype == object else "float"

    def entry(self, i, j):
        """M_ij with 1-based indices."""
        return self.M[i - 1, j - 1]

    def nonfixed(self):
        return [self.M[i - 1, j - 1] for i, j in nonfixed_positions(self.n)]


@dataclass
class CostMatrix:
    """Cumulative DP costs C_{i,t} (column t spans tier t-1) plus the
    optimal antecedent set of every state."""

    n: int
    C: np.ndarray
    antecedents: list


def mean_matrix_exact(space, blocks=None, mode=None):
    """Kingman mean matrix: fixed entries forced, non-fixed from moments."""
    from .feedforward import nonfixed_means

    n = space.n
    if mode is None:
        mode = "rational" if n <= 12 else "float"
    if mode == "rational":
        m_arr = np.empty((n - 1, n - 1), dtype=object)
        m_arr[...] = Fraction(0)
    else:
        m_arr = np.zeros((n - 1, n - 1))
    for j in range(1, n):
        m_arr[j - 1, j - 1] = Fraction(j + 1) if mode == "rational" else float(j + 1)
        if j + 1 <= n - 1:
            m_arr[j, j - 1] = Fraction(j) if mode == "rational" else float(j)
    if n >= 4:
        positions, mean = nonfixed_means(space, blocks=blocks, mode=mode)
        for a, (i, j) in enumerate(positions):
            m_arr[i - 1, j - 1] = mean[a]
    return MeanMatrix(n=n, M=m_arr)


def mean_matrix_sample(matrices, weights=None):
    """Entrywise (weighted) average of F-matrices of a common n.

    Unweighted and Fraction-weighted averages stay exact.
    """
    if not matrices:
        raise ValidationError("mean of an empty sample")
    n = matrices[0].n
    if any(f.n != n for f in matrices):
        raise ValidationError("mixed n in sample")
    if weights is None:
        total = np.zeros((n - 1, n - 1), dtype=np.int64)
        for f in matrices:
            total += f.entries
        m = len(matrices)
        m_arr = np.empty((n - 1, n - 1), dtype=object)
        for idx, val in np.ndenumerate(total):
            m_arr[idx] = Fraction(int(val), m)
        return MeanMatrix(n=n, M=m_arr)
    if len(weights) != len(matrices):
        raise ValidationError("one weight per matrix required")
    wsum = sum(weights)
    if wsum == 0:
        raise ValidationError("weights sum to zero")
    exact = all(isinstance(w, (int, Fraction)) for w in weights)
    if exact:
        m_arr = np.empty((n - 1, n - 1), dtype=object)
        m_arr[...] = Fraction(0)
        for f, w in zip(matrices, weights):
            for idx, val in np.ndenumerate(f.entries):
                m_arr[idx] += Fraction(w) * int(val)
        m_arr = m_arr / Fraction(wsum)
    else:
        m_arr = np.zeros((n - 1, n - 1))
        for f, w in zip(matrices, weights):
            m_arr += float(w) * f.entries
        m_arr /= float(wsum)
    return MeanMatrix(n=n, M=m_arr)


def state_costs(space, mean):
    """Per-state cost c(x) = sum_k (x_k - M_{k, n-1-t(x)})^2.

    Only non-fixed positions can contribute: every state agrees with the
    forced diagonal and subdiagonal of its column.
    """
    n = space.n
    if mean.n != n:
        raise ValidationError(f"mean matrix is for n = {mean.n}, space for n = {n}")
    exact = mean.mode == "rational"
    if exact:
        costs = np.empty(space.num_states, dtype=object)
        costs[...] = Fraction(0)
    else:
        costs = np.zeros(space.num_states)
    for t in range(2, space.num_tiers):
        j = n - 1 - t
        rows = list(range(j + 2, n))
        sl = space.tier_slice(t)
        block = space.states[sl][:, [i - 1 for i in rows]].astype(np.int64)
        if exact:
            mcol = [mean.M[i - 1, j - 1] for i in rows]
            for local in range(block.shape[0]):
                acc = Fraction(0)
                for c, mv in enumerate(mcol):
                    diff = int(block[local, c]) - mv
                    acc += diff * diff
                costs[sl.start + local] = acc
        else:
            mcol = np.array([mean.M[i - 1, j - 1] for i in rows], dtype=np.float64)
            diff = block.astype(np.float64) - mcol[None, :]
            costs[sl] = (diff * diff).sum(axis=1)
    return costs


def _forward_exact(table, costs):
    num = len(costs)
    c_arr = [None] * num
    c_arr[0] = costs[0]
    for s in range(num):
        cs = c_arr[s]
        for e in range(table.indptr[s], table.indptr[s + 1]):
            d = int(table.cols[e])
            cand = cs + costs[d]
            if c_arr[d] is None or cand < c_arr[d]:
                c_arr[d] = cand
    return c_arr


def _optimal_edges(table, costs, c_arr, exact, tie_tol):
    if exact:
        mask = np.zeros(len(table.cols), dtype=bool)
        for s in range(len(c_arr)):
            for e in range(table.indptr[s], table.indptr[s + 1]):
                d = int(table.cols[e])
                if c_arr[s] + costs[d] == c_arr[d]:
                    mask[e] = True
        return mask
    return argmin_edges(table.indptr, table.cols, costs, c_arr, tie_tol)


def _analyze(space, costs, table, tie_tol):
    """Forward pass plus the optimal-edge mask and final argmin states."""
    from .kingman import edge_table

    if table is None:
        table = edge_table(space)
    exact = costs.dtype == object
    if exact:
        c_arr = _forward_exact(table, costs)
    else:
        c_arr = vitreebi_forward(table.indptr, table.cols, costs, space.num_states)
    mask = _optimal_edges(table, costs, c_arr, exact, tie_tol)
    sl = space.tier_slice(space.num_tiers - 1)
    final = range(sl.start, sl.stop)
    if exact:
        best = min(c_arr[f] for f in final)
        finals = [f for f in final if c_arr[f] == best]
    else:
        best = min(c_arr[f] for f in final)
        finals = [f for f in final if c_arr[f] <= best + tie_tol]
    return table, c_arr, mask, best, finals


def _predecessors(space, table, mask):
    """0-based predecessor lists along optimal edges, ascending."""
    src = np.repeat(np.arange(space.num_states), np.diff(table.indptr))
    keep = mask.astype(bool)
    dst = table.cols[keep]
    srck = src[keep]
    order = np.argsort(dst, kind="stable")
    dst = dst[order]
    srck = srck[order]
    preds = [[] for _ in range(space.num_states)]
    for s, d in zip(srck, dst):
        preds[int(d)].append(int(s))
    return preds


def vitreebi(space, mean, path_cap=DEFAULT_PATH_CAP, tie_tol=DEFAULT_TIE_TOL,
             costs=None, table=None):
    """All cheapest chain paths under the squared deviation from ``mean``.

    Returns (min_cost, paths); paths are 1-based index tuples sorted
    lexicographically. Exceeding ``path_cap`` optimal paths raises
    CapacityError before any path is materialized.
    """
    if costs is None:
        if mean.n != space.n:
            raise ValidationError(f"mean matrix is for n = {mean.n}, space for n = {space.n}")
        costs = state_costs(space, mean)
        if costs.dtype == object and space.n > EXACT_MAX_N:
            costs = costs.astype(np.float64)
    table, c_arr, mask, best, finals = _analyze(space, costs, table, tie_tol)
    preds = _predecessors(space, table, mask)

    counts = [0] * space.num_states
    counts[0] = 1
    for d in range(1, space.num_states):
        counts[d] = sum(counts[s] for s in preds[d])
    total = sum(counts[f] for f in finals)
    if total > path_cap:
        raise CapacityError(f"{total} optimal paths exceed cap {path_cap}")

    paths = []
    for f in finals:
        stack = [(f, (f,))]
        while stack:
            node, suffix = stack.pop()
            if node == 0:
                paths.append(tuple(s + 1 for s in suffix))
                continue
            for p in preds[node]:
                stack.append((p, (p,) + suffix))
    paths.sort()
    return best, paths


def cost_matrix(space, mean, tie_tol=DEFAULT_TIE_TOL, costs=None, table=None):
    """The dense DP table with off-tier sentinels and antecedent sets."""
    if costs is None:
        costs = state_costs(space, mean)
        if costs.dtype == object and space.n > EXACT_MAX_N:
            costs = costs.astype(np.float64)
    table, c_arr, mask, _, _ = _analyze(space, costs, table, tie_tol)
    preds = _predecessors(space, table, mask)
    n = space.n
    dense = np.full((space.num_states, n - 1), np.inf)
    for i in range(space.num_states):
        dense[i, space.tier_of[i]] = float(c_arr[i])
    ante = [tuple(p + 1 for p in preds[i]) for i in range(space.num_states)]
    return CostMatrix(n=n, C=dense, antecedents=ante)


def frechet_variance(space, blocks=None, mean=None, engine=None):
    """E ||F - M||^2 under Kingman: the dispersion around ``mean``.

    Enumeration below n = 13 gives the exact rational value; above, the
    moment identity tr(Sigma) + ||mean_vec - M_vec||^2 is used.
    """
    from .feedforward import nonfixed_moments
    from .kingman import enumerate_paths, tier_blocks

    n = space.n
    if blocks is None:
        blocks = tier_blocks(space)
    if mean is None:
        mean = mean_matrix_exact(space, blocks=blocks)
    if engine is None:
        engine = "enumeration" if n <= 12 else "moments"
    positions = nonfixed_positions(n)
    if engine == "enumeration":
        from .fmatrix import path_to_fmatrix

        exact = mean.mode == "rational"
        total = Fraction(0) if exact else 0.0
        for path, prob in enumerate_paths(space, blocks):
            fmat = path_to_fmatrix(space, path)
            dev = Fraction(0) if exact else 0.0
            for i, j in positions:
                diff = int(fmat.entries[i - 1, j - 1]) - mean.M[i - 1, j - 1]
                dev += diff * diff
            total += (prob if exact else float(prob)) * dev
        return total
    if engine != "moments":
        raise ValidationError(f"unknown engine {engine!r}")
    summary = nonfixed_moments(space, blocks=blocks)
    exact = summary.mode == "rational" and mean.mode == "rational"
    acc = Fraction(0) if exact else 0.0
    for a, (i, j) in enumerate(positions):
        acc += summary.cov[a, a] if exact else float(summary.cov[a, a])
        diff = summary.mean[a] - mean.M[i - 1, j - 1]
        if not exact:
            diff = float(diff)
        acc += diff * diff
    return acc
