"""Pure-Python/numpy fallback for the hot kernels.

Same contract as the compiled `_fastkernels` module: every unordered triple
i < j < k is inspected in lexicographic order and the first violation is
returned, so witnesses are reproducible across backends.
"""

import numpy as np


def _row_records(masks):
    # view (n, W) uint64 rows as one structured record each, for lexicographic
    # sorting and searchsorted membership queries
    n, w = masks.shape
    dt = np.dtype([(f"w{i}", np.uint64) for i in range(w)])
    return np.ascontiguousarray(masks).view(dt).reshape(n)


def triple_median_violation(masks):
    """First triple (i, j, k), i < j < k, whose majority mask is not a row of
    `masks`, or None. `masks` is (n, W) uint64, rows pairwise distinct."""
    n, w = masks.shape
    if n < 3:
        return None
    recs = _row_records(masks)
    sorted_recs = np.sort(recs)
    for i in range(n - 2):
        mi = masks[i]
        for j in range(i + 1, n - 1):
            mj = masks[j]
            both = mi & mj
            either = mi | mj
            maj = both | (masks[j + 1 :] & either)
            mrec = _row_records(np.ascontiguousarray(maj))
            pos = np.searchsorted(sorted_recs, mrec)
            pos[pos == n] = n - 1
            hit = sorted_recs[pos] == mrec
            if not hit.all():
                k = j + 1 + int(np.argmax(~hit))
                return (i, j, k)
    return None
