"""Kingman transition kernel of the ranked coalescent.

Tier blocks are stored row-compressed with integer numerators and one
integer denominator C(n-t, 2) per tier, so rational and float views are
both exact materializations of the same data.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse

from ._common import CapacityError, ValidationError, binom2
from ._kernels import expand_tier, sample_paths as _sample_paths_kernel
from .statespace import RankedState, diff_encoding

PATH_ENUM_MAX_N = 12


@dataclass
class TierBlock:
    """Sparse rectangular transition block from tier k to tier k+1."""

    from_tier: int
    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    numer: np.ndarray
    denom: int

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def csr(self):
        """Float CSR matrix of the transition probabilities."""
        data = self.numer.astype(np.float64) / self.denom
        return scipy.sparse.csr_matrix(
            (data, self.indices.copy(), self.indptr.copy()), shape=(self.n_rows, self.n_cols)
        )

    def dense(self, mode="rational"):
        """Dense block; object array of Fractions in rational mode."""
        if mode == "rational":
            out = np.full((self.n_rows, self.n_cols), Fraction(0), dtype=object)
        else:
            out = np.zeros((self.n_rows, self.n_cols))
        for r in range(self.n_rows):
            for e in range(self.indptr[r], self.indptr[r + 1]):
                c = int(self.indices[e])
                p = int(self.numer[e])
                out[r, c] = Fraction(p, self.denom) if mode == "rational" else p / self.denom
        return out

    def row_sums(self):
        """Exact row sums as Fractions (all 1 for a valid kernel)."""
        sums = np.add.reduceat(self.numer, self.indptr[:-1]) if self.nnz else np.array([])
        return [Fraction(int(s), self.denom) for s in sums]


def feasible(x, y):
    """The unique coalescence pair (i, k) turning state x into state y.

    Accepts RankedState objects or raw vectors. Returns None when no pair
    satisfies d(x) - d(y) + e_{n-2-t} = e_i + e_k.
    """
    xv = x.x if isinstance(x, RankedState) else tuple(int(v) for v in x)
    yv = y.x if isinstance(y, RankedState) else tuple(int(v) for v in y)
    if len(xv) != len(yv):
        raise ValidationError("states of different n")
    n = len(xv) + 1
    tx = n - max(xv)
    ty = n - max(yv)
    if ty != tx + 1:
        raise ValidationError(f"tier mismatch: tier(x) = {tx}, tier(y) = {ty}")
    px, cx = diff_encoding(xv)
    py, cy = diff_encoding(yv)
    diff = [a - b for a, b in zip(px + (cx,), py + (cy,))]
    nu = n - 2 - tx
    diff[nu - 1] += 1
    if sum(diff) != 2 or any(v < 0 for v in diff):
        return None
    hits = [pos + 1 for pos, v in enumerate(diff) if v > 0]
    if len(hits) == 1:
        if hits[0] == n - 1 and diff[n - 2] == 2:
            return (n - 1, n - 1)
        return None
    if len(hits) == 2 and all(diff[h - 1] == 1 for h in hits):
        return (hits[0], hits[1])
    return None


def transition_prob(x, y, mode="rational"):
    """Kingman transition probability x -> y (0 when infeasible)."""
    xv = x.x if isinstance(x, RankedState) else tuple(int(v) for v in x)
    pair = feasible(x, y)
    denom = binom2(max(xv))
    if pair is None:
        return Fraction(0) if mode == "rational" else 0.0
    i, k = pair
    n = len(xv) + 1
    c = xv[-1]
    if k < n - 1:
        numer = 1
    elif i < n - 1:
        numer = c
    else:
        numer = binom2(c)
    return Fraction(numer, denom) if mode == "rational" else numer / denom


def tier_blocks(space):
    """All blocks T_{0,1}, ..., T_{n-3,n-2} of the Kingman kernel."""
    n = space.n
    blocks = []
    for t in range(n - 2):
        keys = space._tier_keys_canon[t]
        src, dst, numer = expand_tier(keys, n, t)
        nxt_sorted = space._tier_keys[t + 1]
        nxt_canon = space._tier_canonical[t + 1]
        pos = np.searchsorted(nxt_sorted, dst)
        cols = nxt_canon[pos]
        order = np.lexsort((cols, src))
        src, cols, numer = src[order], cols[order], numer[order]
        indptr = np.zeros(len(keys) + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=len(keys)), out=indptr[1:])
        blocks.append(
            TierBlock(
                from_tier=t,
                n_rows=len(keys),
                n_cols=len(nxt_sorted),
                indptr=indptr,
                indices=cols,
                numer=numer.astype(np.int64),
                denom=binom2(n - t),
            )
        )
    return blocks


@dataclass
class EdgeTable:
    """Global CSR over all transient states, for samplers and ViTreebi."""

    n: int
    num_states: int
    indptr: np.ndarray       # (num_states + 1,)
    cols: np.ndarray         # global 0-based targets
    numer: np.ndarray
    denom_state: np.ndarray  # float64 per-row denominator
    denom_tier: np.ndarray   # int64 per-tier denominator

    def edge_prob(self, s, d, mode="rational"):
        """Probability of the edge s -> d (0-based globals), 0 if absent."""
        lo, hi = int(self.indptr[s]), int(self.indptr[s + 1])
        pos = lo + int(np.searchsorted(self.cols[lo:hi], d))
        if pos == hi or self.cols[pos] != d:
            return Fraction(0) if mode == "rational" else 0.0
        denom = int(self.denom_state[s])
        if mode == "rational":
            return Fraction(int(self.numer[pos]), denom)
        return int(self.numer[pos]) / denom


def edge_table(space, blocks=None):
    """Assemble the global edge CSR from tier blocks."""
    if blocks is None:
        blocks = tier_blocks(space)
    n = space.n
    num = space.num_states
    indptr = np.zeros(num + 1, dtype=np.int64)
    cols_parts = []
    numer_parts = []
    denom_tier = np.zeros(n - 1, dtype=np.int64)
    for blk in blocks:
        t = blk.from_tier
        denom_tier[t] = blk.denom
        row0 = int(space.tier_offsets[t])
        col0 = int(space.tier_offsets[t + 1])
        indptr[row0 + 1:row0 + blk.n_rows + 1] = np.diff(blk.indptr)
        cols_parts.append(blk.indices.astype(np.int64) + col0)
        numer_parts.append(blk.numer)
    denom_tier[n - 2] = 1
    np.cumsum(indptr, out=indptr)
    cols = np.concatenate(cols_parts) if cols_parts else np.zeros(0, dtype=np.int64)
    numer = np.concatenate(numer_parts) if numer_parts else np.zeros(0, dtype=np.int64)
    denom_state = denom_tier[space.tier_of.astype(np.int64)].astype(np.float64)
    return EdgeTable(
        n=n,
        num_states=num,
        indptr=indptr,
        cols=cols,
        numer=numer,
        denom_state=denom_state,
        denom_tier=denom_tier,
    )


def validate_path(space, path):
    """Check a 1-based index path: length, forced start, tier-consecutive feasibility."""
    path = tuple(int(i) for i in path)
    n = space.n
    if len(path) != n - 1:
        raise ValidationError(f"path length {len(path)} != n - 1 = {n - 1}")
    if path[0] != 1:
        raise ValidationError("path must start at state 1")
    for t, idx in enumerate(path):
        st = space.state(idx)
        if st.tier != t:
            raise ValidationError(f"state {idx} at step {t} has tier {st.tier}")
    for t in range(len(path) - 1):
        if feasible(space.state(path[t]), space.state(path[t + 1])) is None:
            raise ValidationError(
                f"infeasible transition {path[t]} -> {path[t + 1]} at step {t}"
            )
    return path


def path_probability(space, path, blocks=None, mode="rational"):
    """Product of Kingman transition probabilities along a feasible path."""
    path = validate_path(space, path)
    table = edge_table(space, blocks)
    prob = Fraction(1) if mode == "rational" else 1.0
    for t in range(len(path) - 1):
        p = table.edge_prob(path[t] - 1, path[t + 1] - 1, mode=mode)
        if (mode == "rational" and p == 0) or (mode != "rational" and p == 0.0):
            raise ValidationError(f"infeasible transition {path[t]} -> {path[t + 1]}")
        prob *= p
    return prob


def enumerate_paths(space, blocks=None):
    """All chain paths with exact probabilities, in lexicographic index order.

    Guarded at n <= 12; the path count is the Euler (up/down) number E_{n-1}.
    """
    n = space.n
    if n > PATH_ENUM_MAX_N:
        raise CapacityError(f"path enumeration capped at n = {PATH_ENUM_MAX_N}, got {n}")
    table = edge_table(space, blocks)
    results = []
    stack = [(0, (1,), Fraction(1))]
    while stack:
        state, path, prob = stack.pop()
        if len(path) == n - 1:
            results.append((path, prob))
            continue
        lo, hi = int(table.indptr[state]), int(table.indptr[state + 1])
        denom = int(table.denom_state[state])
        for e in range(hi - 1, lo - 1, -1):
            nxt = int(table.cols[e])
            p = Fraction(int(table.numer[e]), denom)
            stack.append((nxt, path + (nxt + 1,), prob * p))
    return results


def sample_paths(space, count, seed, blocks=None, table=None):
    """Draw ``count`` paths with the Kingman kernel; deterministic given seed."""
    if seed is None:
        raise ValidationError("an explicit seed is required")
    if table is None:
        table = edge_table(space, blocks)
    rng = np.random.default_rng(seed)
    uniforms = rng.random((count, space.n - 2))
    out = _sample_paths_kernel(
        table.indptr, table.cols, table.numer, table.denom_state, space.n, uniforms
    )
    return out + 1


def sample_path(space, seed, blocks=None, table=None):
    """One sampled path as a 1-based index tuple."""
    return tuple(int(v) for v in sample_paths(space, 1, seed, blocks, table)[0])
