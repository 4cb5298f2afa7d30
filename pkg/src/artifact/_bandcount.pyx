# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled band-placement counter; same contract as kernels_py."""

from libc.stdlib cimport malloc, free


cdef long long _rec(int idx, int c, int n, int rho, int* parent, int* nb_start,
                    int* nb_list, int* fixed, char* occ, char* res, int* pos) nogil:
    cdef int lo, hi, p, k, d, f
    cdef long long total = 0
    cdef bint ok
    f = fixed[idx]
    if f >= 0:
        lo = f
        hi = f
    elif parent[idx] >= 0:
        lo = pos[parent[idx]] - rho
        hi = pos[parent[idx]] + rho
        if lo < 0:
            lo = 0
        if hi > n - 1:
            hi = n - 1
    else:
        lo = 0
        hi = n - 1
    for p in range(lo, hi + 1):
        if occ[p] or (f < 0 and res[p]):
            continue
        ok = True
        for k in range(nb_start[idx], nb_start[idx + 1]):
            d = p - pos[nb_list[k]]
            if d > rho or d < -rho:
                ok = False
                break
        if not ok:
            continue
        if idx == c - 1:
            total += 1
        else:
            occ[p] = 1
            pos[idx] = p
            total += _rec(idx + 1, c, n, rho, parent, nb_start, nb_list, fixed, occ, res, pos)
            occ[p] = 0
    return total


def count_band_placements(int n, int rho, parent, nb_start, nb_list, fixed, reserved):
    cdef int c = len(parent)
    cdef int i
    cdef long long total
    if c == 0:
        return 1
    cdef int* c_parent = <int*> malloc(c * sizeof(int))
    cdef int* c_start = <int*> malloc((c + 1) * sizeof(int))
    cdef int* c_list = <int*> malloc((len(nb_list) + 1) * sizeof(int))
    cdef int* c_fixed = <int*> malloc(c * sizeof(int))
    cdef int* c_pos = <int*> malloc(c * sizeof(int))
    cdef char* c_occ = <char*> malloc(n * sizeof(char))
    cdef char* c_res = <char*> malloc(n * sizeof(char))
    try:
        for i in range(c):
            c_parent[i] = parent[i]
            c_fixed[i] = fixed[i]
            c_pos[i] = 0
        for i in range(c + 1):
            c_start[i] = nb_start[i]
        for i in range(len(nb_list)):
            c_list[i] = nb_list[i]
        for i in range(n):
            c_occ[i] = 0
            c_res[i] = 0
        for p in reserved:
            c_res[<int> p] = 1
        with nogil:
            total = _rec(0, c, n, rho, c_parent, c_start, c_list, c_fixed, c_occ, c_res, c_pos)
        return int(total)
    finally:
        free(c_parent)
        free(c_start)
        free(c_list)
        free(c_fixed)
        free(c_pos)
        free(c_occ)
        free(c_res)
