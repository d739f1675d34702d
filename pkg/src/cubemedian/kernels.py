"""Kernel dispatch: compiled extension when available, pure Python otherwise.

`BACKEND` reports which implementation of the triple check is live. The
numpy-only helpers below are shared by both backends.
"""

import numpy as np

try:
    from . import _fastkernels as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    from . import _pykernels as _impl

    BACKEND = "python"

triple_median_violation = _impl.triple_median_violation


def pack_masks(int_masks, n_bits):
    """Pack per-vertex Python-int wall masks into an (n, W) uint64 array."""
    n_words = max(1, (n_bits + 63) // 64)
    out = np.zeros((len(int_masks), n_words), dtype=np.uint64)
    for row, mask in enumerate(int_masks):
        for word in range(n_words):
            out[row, word] = (mask >> (64 * word)) & 0xFFFFFFFFFFFFFFFF
    return out


def dist_wallcount_mismatch(dist, masks):
    """First pair (i, j) with graph distance != number of separating walls,
    or None. `dist` is the (n, n) distance matrix, `masks` packed walls."""
    n = dist.shape[0]
    chunk = max(1, 4_000_000 // max(1, n * masks.shape[1]))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        xor = masks[start:stop, None, :] ^ masks[None, :, :]
        pops = np.bitwise_count(xor).sum(axis=2, dtype=np.int64)
        bad = pops != dist[start:stop]
        if bad.any():
            i_loc, j = np.argwhere(bad)[0]
            return (start + int(i_loc), int(j))
    return None


def interval_triple_violation(dist):
    """Brute-force fallback witness search over intervals: first triple
    (i, j, k) whose three-interval intersection has size != 1, or None.

    O(n^4) worst case; only used on hosts that already failed the
    partial-cube preconditions, where a witness tends to appear early.
    """
    n = dist.shape[0]
    d = dist.astype(np.int32)

    def betw(i):
        # betw(i)[a, v] == True iff v lies on a geodesic from i to a
        return (d[i][None, :] + d) == d[i][:, None]

    for i in range(n - 2):
        bi = betw(i)
        for j in range(i + 1, n - 1):
            iij = bi[j].astype(np.uint32)
            counts = ((bi & betw(j)).astype(np.uint32) @ iij)[j + 1 :]
            bad = counts != 1
            if bad.any():
                return (i, j, j + 1 + int(np.argmax(bad)))
    return None
