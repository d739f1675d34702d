# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: exhaustive majority-mask check over vertex triples.

Masks are (n, W) uint64 rows, one row per vertex, bit b of word b // 64 giving
the halfspace side for wall b. Membership of a majority mask among the rows is
decided by binary search in a lexicographically sorted copy.
"""

from libc.stdint cimport uint64_t

import numpy as np

DEF MAXWORDS = 16


cdef inline int _cmp(const uint64_t* a, const uint64_t* b, Py_ssize_t w) nogil:
    cdef Py_ssize_t t
    for t in range(w):
        if a[t] < b[t]:
            return -1
        if a[t] > b[t]:
            return 1
    return 0


cdef inline bint _contains(const uint64_t* sorted_rows, Py_ssize_t n,
                           Py_ssize_t w, const uint64_t* key) nogil:
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    cdef int c
    while lo <= hi:
        mid = (lo + hi) >> 1
        c = _cmp(sorted_rows + mid * w, key, w)
        if c == 0:
            return True
        if c < 0:
            lo = mid + 1
        else:
            hi = mid - 1
    return False


def triple_median_violation(masks):
    """First triple (i, j, k), i < j < k, whose majority mask is not a row of
    `masks`, or None. `masks` is (n, W) uint64, rows pairwise distinct."""
    cdef uint64_t[:, ::1] m = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t w = m.shape[1]
    if n < 3:
        return None
    if w > MAXWORDS:
        from . import _pykernels
        return _pykernels.triple_median_violation(np.asarray(masks))

    srt = np.asarray(m)[np.lexsort(np.asarray(m).T[::-1])]
    cdef uint64_t[:, ::1] s = np.ascontiguousarray(srt, dtype=np.uint64)

    cdef uint64_t maj[MAXWORDS]
    cdef uint64_t both[MAXWORDS]
    cdef uint64_t either[MAXWORDS]
    cdef Py_ssize_t i, j, k, t
    cdef const uint64_t* base_s = &s[0, 0]
    cdef const uint64_t* base_m = &m[0, 0]
    cdef Py_ssize_t out_i = -1, out_j = -1, out_k = -1

    with nogil:
        for i in range(n - 2):
            if out_i >= 0:
                break
            for j in range(i + 1, n - 1):
                if out_i >= 0:
                    break
                for t in range(w):
                    both[t] = base_m[i * w + t] & base_m[j * w + t]
                    either[t] = base_m[i * w + t] | base_m[j * w + t]
                for k in range(j + 1, n):
                    for t in range(w):
                        maj[t] = both[t] | (base_m[k * w + t] & either[t])
                    if not _contains(base_s, n, w, maj):
                        out_i = i
                        out_j = j
                        out_k = k
                        break
    if out_i >= 0:
        return (out_i, out_j, out_k)
    return None
