# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled leftmost-longest trie scan over the CSR view of a TokenTrie."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _find_child(const cnp.int64_t[:] ptr, const cnp.int64_t[:] keys,
                                   Py_ssize_t node, cnp.int64_t sym) noexcept nogil:
    cdef Py_ssize_t lo = ptr[node]
    cdef Py_ssize_t hi = ptr[node + 1]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < sym:
            lo = mid + 1
        else:
            hi = mid
    if lo < ptr[node + 1] and keys[lo] == sym:
        return lo
    return -1


def scan_longest(trie, seq):
    """Same contract as ``deepcorpus._scan_py.scan_longest``."""
    cdef const cnp.int64_t[:] s = np.ascontiguousarray(seq, dtype=np.int64)
    cdef const cnp.int64_t[:] ptr = trie.ptr
    cdef const cnp.int64_t[:] keys = trie.keys
    cdef const cnp.int64_t[:] child = trie.child
    cdef const cnp.int64_t[:] out = trie.out
    cdef Py_ssize_t n = s.shape[0]
    starts_arr = np.empty(n, dtype=np.int64)
    ends_arr = np.empty(n, dtype=np.int64)
    outs_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] starts = starts_arr
    cdef cnp.int64_t[:] ends = ends_arr
    cdef cnp.int64_t[:] outs = outs_arr
    cdef Py_ssize_t i = 0, j, k, node, m = 0
    cdef Py_ssize_t best_end
    cdef cnp.int64_t best_out
    with nogil:
        while i < n:
            node = 0
            best_end = -1
            best_out = -1
            j = i
            while j < n:
                if s[j] < 0:
                    break
                k = _find_child(ptr, keys, node, s[j])
                if k < 0:
                    break
                node = child[k]
                j += 1
                if out[node] >= 0:
                    best_end = j
                    best_out = out[node]
            if best_end > 0:
                starts[m] = i
                ends[m] = best_end
                outs[m] = best_out
                m += 1
                i = best_end
            else:
                i += 1
    return starts_arr[:m].copy(), ends_arr[:m].copy(), outs_arr[:m].copy()
