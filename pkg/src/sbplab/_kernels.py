"""Hot loops for hypercube enumeration, compiled with numba.

Everything here walks the half cube {sigma : sigma_1 = +1} in Gray-code
order: step i flips the single free coordinate ctz(i) + 1, so each row
sum updates in O(1).  Index i corresponds to the sign vector whose free
coordinates are the bits of gray(i) = i ^ (i >> 1) (bit b set means
coordinate b + 1 is -1).
"""

import numpy as np
from numba import njit, uint64

_M1 = uint64(0x5555555555555555)
_M2 = uint64(0x3333333333333333)
_M4 = uint64(0x0F0F0F0F0F0F0F0F)
_H01 = uint64(0x0101010101010101)
_ONE = uint64(1)


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> _ONE) & _M1)
    x = (x & _M2) + ((x >> uint64(2)) & _M2)
    x = (x + (x >> uint64(4))) & _M4
    return (x * _H01) >> uint64(56)


@njit(cache=True)
def gray_scan(at, thresholds, counts, amb):
    """Exact scan of the half cube: min-max objective plus threshold counts.

    at: (n, m) C-contiguous, at[j] = column j of the row matrix (so the
    per-flip update touches one contiguous slice).  thresholds must be
    ascending; counts[k] receives the number of visited sigma whose
    objective is definitely <= thresholds[k].  A sigma whose incremental
    objective lands within a tiny band of some threshold is not counted;
    its Gray index goes into amb for the caller to settle with exactly
    rounded row sums (the incremental value can drift an ulp past the
    true one).  Returns (best objective, Gray index of one argmin,
    number of ambiguous sigma); only the first amb.shape[0] indices are
    stored.
    """
    n, m = at.shape
    nthr = thresholds.shape[0]
    sums = np.zeros(m)
    for j in range(n):
        for r in range(m):
            sums[r] += at[j, r]
    sign = np.ones(n, dtype=np.int8)

    thr_lo = np.empty(nthr)
    thr_hi = np.empty(nthr)
    for k in range(nthr):
        band = 1e-9 * thresholds[k] + 1e-12
        thr_lo[k] = thresholds[k] - band
        thr_hi[k] = thresholds[k] + band
    kmax = thr_hi[nthr - 1] if nthr > 0 else -1.0
    best = np.inf
    bestidx = np.int64(0)
    namb = np.int64(0)
    cap = amb.shape[0]
    steps = np.int64(1) << (n - 1)

    for i in range(steps):
        if i > 0:
            t = 0
            x = i
            while x & 1 == 0:
                t += 1
                x >>= 1
            j = t + 1
            sign[j] = -sign[j]
            delta = 2.0 * sign[j]
            for r in range(m):
                sums[r] += delta * at[j, r]
        bound = best if best > kmax else kmax
        mx = 0.0
        ok = True
        for r in range(m):
            v = abs(sums[r])
            if v > mx:
                mx = v
                if mx > bound:
                    ok = False
                    break
        if ok:
            if mx < best:
                best = mx
                bestidx = i
            unsettled = False
            for k in range(nthr):
                if mx <= thr_lo[k]:
                    counts[k] += 1
                elif mx <= thr_hi[k]:
                    unsettled = True
            if unsettled:
                if namb < cap:
                    amb[namb] = i
                namb += 1
    return best, bestidx, namb


@njit(cache=True)
def row_pass_dense(row, k, words, steps):
    """AND one row's feasibility into the packed half-cube bitset.

    words is the alive bitset (bit i of word i//64 = Gray index i);
    steps = 2^(n-1).  Returns the surviving population count.
    """
    n = row.shape[0]
    sign = np.ones(n, dtype=np.int8)
    dot = 0.0
    for j in range(n):
        dot += row[j]

    w = uint64(0)
    cnt = np.int64(0)
    for i in range(steps):
        if i > 0:
            t = 0
            x = i
            while x & 1 == 0:
                t += 1
                x >>= 1
            j = t + 1
            sign[j] = -sign[j]
            dot += 2.0 * sign[j] * row[j]
        if dot >= -k and dot <= k:
            w |= _ONE << uint64(i & 63)
        if i & 63 == 63:
            widx = i >> 6
            merged = words[widx] & w
            words[widx] = merged
            cnt += np.int64(_popcount64(merged))
            w = uint64(0)
    if steps & 63:
        merged = words[steps >> 6] & w
        words[steps >> 6] = merged
        cnt += np.int64(_popcount64(merged))
    return cnt


@njit(cache=True)
def row_pass_sparse(row, k, idx):
    """Filter an explicit list of alive Gray indices by one row.

    Each index decodes to its sign vector (gray bits over the free
    coordinates) and the dot product is formed directly.
    """
    n = row.shape[0]
    out = np.empty(idx.shape[0], dtype=np.int64)
    kept = 0
    for ii in range(idx.shape[0]):
        i = idx[ii]
        g = i ^ (i >> 1)
        dot = row[0]
        for j in range(1, n):
            if (g >> (j - 1)) & 1:
                dot -= row[j]
            else:
                dot += row[j]
        if dot >= -k and dot <= k:
            out[kept] = i
            kept += 1
    return out[:kept]
