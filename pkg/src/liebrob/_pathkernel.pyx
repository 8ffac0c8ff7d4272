# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Counting kernel for backward self-avoiding path enumeration.

Term supports are 64-bit site masks; see paths.py for the semantics.
"""

ctypedef unsigned long long u64


cdef struct Ctx:
    const u64* masks
    const int* indptr
    const int* indices
    const double* w
    u64 src
    int L_max
    long long* counts
    double* weights
    int truncated


cdef void _walk(Ctx* c, int last, u64 forb, int depth, double wprod) noexcept nogil:
    cdef int q, j
    cdef u64 nf
    if c.masks[last] & c.src:
        c.counts[depth] += 1
        c.weights[depth] += wprod
        return
    if depth == c.L_max:
        if not c.truncated:
            for q in range(c.indptr[last], c.indptr[last + 1]):
                if (c.masks[c.indices[q]] & forb) == 0:
                    c.truncated = 1
                    break
        return
    nf = forb | c.masks[last]
    for q in range(c.indptr[last], c.indptr[last + 1]):
        j = c.indices[q]
        if (c.masks[j] & forb) == 0:
            _walk(c, j, nf, depth + 1, wprod * c.w[j])


def count_paths(const u64[::1] masks, const int[::1] indptr, const int[::1] indices,
                const double[::1] w, u64 src, u64 tgt, int L_max,
                long long[::1] counts, double[::1] weights):
    """Fill counts[l], weights[l] for l = 1..L_max; return the truncation flag."""
    cdef Ctx c
    cdef int t, n = masks.shape[0]
    if n == 0:
        return False
    c.masks = &masks[0]
    c.indptr = &indptr[0]
    c.indices = &indices[0] if indices.shape[0] > 0 else NULL
    c.w = &w[0]
    c.src = src
    c.L_max = L_max
    c.counts = &counts[0]
    c.weights = &weights[0]
    c.truncated = 0
    with nogil:
        for t in range(n):
            if c.masks[t] & tgt:
                _walk(&c, t, tgt, 1, c.w[t])
    return bool(c.truncated)
