"""Hot loops shared by the state-space builder, samplers, and ViTreebi.

Every function here is a pure function of numpy arrays so the jitted and
plain-Python paths produce identical output for identical input. Randomness
enters only through pre-drawn uniforms.

State keys pack the binary decremental code into an int64: the decremental
index set D as a bitmask (bits 1..n-2) shifted left by 6, plus the external
count in the low 6 bits.
"""

import numpy as np

from ._accel import maybe_jit


@maybe_jit
def expand_tier(keys, n, t):
    """All coalescence successors of the tier-t states given by ``keys``.

    Returns (src, dst_keys, numer): one entry per transition, where src is
    the local row in tier t, dst_keys the packed successor code in tier t+1,
    and numer the Kingman numerator (the common denominator is C(n-t, 2)).
    """
    num = keys.shape[0]
    nu = n - 2 - t
    counts = np.empty(num, np.int64)
    for s in range(num):
        mask = keys[s] >> 6
        c = keys[s] & 63
        d = 0
        mm = mask
        while mm != 0:
            mm &= mm - 1
            d += 1
        cnt = d * (d - 1) // 2
        if c >= 1:
            cnt += d
        if c >= 2:
            cnt += 1
        counts[s] = cnt
    total = 0
    for s in range(num):
        total += counts[s]
    src = np.empty(total, np.int64)
    dst = np.empty(total, np.int64)
    numer = np.empty(total, np.int64)
    idx = np.empty(n, np.int64)
    pos = 0
    one = np.int64(1)
    nubit = one << nu
    for s in range(num):
        mask = keys[s] >> 6
        c = keys[s] & 63
        d = 0
        for b in range(1, n - 1):
            if (mask >> b) & 1:
                idx[d] = b
                d += 1
        for a in range(d):
            abit = one << idx[a]
            for b in range(a + 1, d):
                newmask = (mask & ~(abit | (one << idx[b]))) | nubit
                src[pos] = s
                dst[pos] = (newmask << 6) | c
                numer[pos] = 1
                pos += 1
        if c >= 1:
            for a in range(d):
                newmask = (mask & ~(one << idx[a])) | nubit
                src[pos] = s
                dst[pos] = (newmask << 6) | (c - 1)
                numer[pos] = c
                pos += 1
        if c >= 2:
            src[pos] = s
            dst[pos] = ((mask | nubit) << 6) | (c - 2)
            numer[pos] = c * (c - 1) // 2
            pos += 1
    return src, dst, numer


@maybe_jit
def keys_to_states(keys, n, t, out):
    """Decode packed keys of tier t into state vectors (rows of ``out``)."""
    top = n - 1 - t
    for s in range(keys.shape[0]):
        mask = keys[s] >> 6
        c = keys[s] & 63
        for k in range(n - 1):
            out[s, k] = 0
        run = 0
        for k in range(n - 2, 0, -1):
            if (mask >> k) & 1:
                run += 1
            if k >= top:
                out[s, k - 1] = run + c
        out[s, n - 2] = c


@maybe_jit
def sample_paths(indptr, cols, numer, denom, n, uniforms):
    """Draw chain paths; one row of ``uniforms`` (length n-2) per path.

    The graph is the global CSR over transient states (0-based); every path
    starts at state 0. Returns (count, n-1) state indices.
    """
    count = uniforms.shape[0]
    out = np.empty((count, n - 1), np.int64)
    for r in range(count):
        cur = 0
        out[r, 0] = 0
        for t in range(n - 2):
            target = uniforms[r, t] * denom[cur]
            acc = 0.0
            e = indptr[cur]
            last = indptr[cur + 1] - 1
            while e < last:
                acc += numer[e]
                if acc > target:
                    break
                e += 1
            cur = cols[e]
            out[r, t + 1] = cur
    return out


@maybe_jit
def path_stats(paths, states, r_s, r_e, pos_table, n):
    """Balance summaries per sampled path: S, E, and the non-fixed vector."""
    m = paths.shape[0]
    q = (n - 2) * (n - 3) // 2
    s_out = np.zeros(m, np.int64)
    e_out = np.zeros(m, np.int64)
    nf = np.zeros((m, q), np.int32)
    for r in range(m):
        for t in range(n - 1):
            s = paths[r, t]
            s_out[r] += r_s[s]
            e_out[r] += r_e[s]
            j = n - 1 - t
            if 1 <= j <= n - 3:
                for i in range(j + 2, n):
                    nf[r, pos_table[i, j]] += states[s, i - 1]
    return s_out, e_out, nf


@maybe_jit
def vitreebi_forward(indptr, cols, cost, num_states):
    """Cheapest-cost forward pass over the tier DAG in topological order."""
    c_arr = np.full(num_states, np.inf)
    c_arr[0] = cost[0]
    for s in range(num_states):
        cs = c_arr[s]
        if cs == np.inf:
            continue
        for e in range(indptr[s], indptr[s + 1]):
            d = cols[e]
            v = cs + cost[d]
            if v < c_arr[d]:
                c_arr[d] = v
    return c_arr


@maybe_jit
def argmin_edges(indptr, cols, cost, c_arr, tol):
    """Mark edges lying on some forward path that is optimal within ``tol``."""
    mask = np.zeros(cols.shape[0], np.bool_)
    for s in range(indptr.shape[0] - 1):
        cs = c_arr[s]
        if cs == np.inf:
            continue
        for e in range(indptr[s], indptr[s + 1]):
            d = cols[e]
            if cs + cost[d] <= c_arr[d] + tol:
                mask[e] = True
    return mask


@maybe_jit
def beta_sample_stats(n, cumw, uniforms, pos_table):
    """Sample beta-splitting ranked shapes and their balance summaries.

    cumw[k, i] is the cumulative split law for a block of k leaves
    (cumw[k, k-1] = 1). Each tree consumes one row of ``uniforms``
    (2(n-1) values: a block pick and a split pick per event). Returns
    per-tree S, E, and non-fixed entry vectors.
    """
    m = uniforms.shape[0]
    q = (n - 2) * (n - 3) // 2
    s_out = np.zeros(m, np.int64)
    e_out = np.zeros(m, np.int64)
    nf = np.zeros((m, q), np.int32)
    sizes = np.empty(n + 1, np.int64)
    parents = np.empty(n + 1, np.int64)
    grid = np.zeros((n + 3, n + 3), np.int64)
    for r in range(m):
        for a in range(n + 3):
            for b in range(n + 3):
                grid[a, b] = 0
        nb = 1
        sizes[0] = n
        parents[0] = 0
        for ev in range(2, n + 1):
            remaining = n - ev + 1
            target = uniforms[r, 2 * (ev - 2)] * remaining
            pick = -1
            acc = 0.0
            for b in range(nb):
                w = sizes[b] - 1
                if w > 0:
                    if acc + w > target:
                        pick = b
                        break
                    acc += w
            if pick < 0:
                for b in range(nb - 1, -1, -1):
                    if sizes[b] > 1:
                        pick = b
                        break
            k = sizes[pick]
            if parents[pick] > 0:
                grid[parents[pick], ev] += 1
            u2 = uniforms[r, 2 * (ev - 2) + 1]
            i = 1
            while i < k - 1 and u2 >= cumw[k, i]:
                i += 1
            sizes[pick] = i
            parents[pick] = ev
            sizes[nb] = k - i
            parents[nb] = ev
            nb += 1
        for b in range(nb):
            grid[parents[b], n + 1] += 1
        for a in range(2, n + 1):
            for b in range(n, 1, -1):
                grid[a, b] += grid[a, b + 1]
        for a in range(3, n + 1):
            for b in range(2, n + 2):
                grid[a, b] += grid[a - 1, b]
        for j in range(1, n):
            e_out[r] += grid[j + 1, n + 1]
        for i in range(3, n):
            for j in range(1, i - 1):
                v = grid[j + 1, i + 2]
                s_out[r] += v
                nf[r, pos_table[i, j]] += v
    return s_out, e_out, nf
