# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror :mod:`choice_rank._pykernels` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def binomial_table(Py_ssize_t n, Py_ssize_t m):
    cdef cnp.ndarray[i64, ndim=2] table = np.zeros((n + 1, m + 1), dtype=np.int64)
    cdef Py_ssize_t a, b
    for a in range(n + 1):
        table[a, 0] = 1
        for b in range(1, min(a, m) + 1):
            table[a, b] = table[a - 1, b - 1] + (table[a - 1, b] if b <= a - 1 else 0)
    return table


def count_choices(const i64[::1] choices, Py_ssize_t n):
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef double[::1] acc = out
    cdef Py_ssize_t k, N = choices.shape[0]
    cdef i64 y
    for k in range(N):
        y = choices[k]
        if y < 1 or y > n:
            raise ValueError(f"choice {y} outside [1, {n}]")
        acc[y - 1] += 1.0
    return out


def unrank_combinations(const i64[::1] ranks, Py_ssize_t n, Py_ssize_t m):
    cdef i64[:, ::1] binom = binomial_table(n, m)
    cdef Py_ssize_t K = ranks.shape[0]
    cdef cnp.ndarray[i64, ndim=2] out_arr = np.empty((K, m), dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef Py_ssize_t k, t
    cdef i64 r, v, b
    for k in range(K):
        r = ranks[k]
        v = 0
        for t in range(m):
            while True:
                b = binom[n - 1 - v, m - 1 - t]
                if r < b:
                    break
                r -= b
                v += 1
            out[k, t] = v + 1
            v += 1
    return out_arr


def rank_combinations(const i64[:, ::1] menus, Py_ssize_t n):
    cdef Py_ssize_t K = menus.shape[0], m = menus.shape[1]
    cdef i64[:, ::1] binom = binomial_table(n, m)
    # prefix[t, x] = sum_{v < x} C(n-1-v, m-1-t)
    cdef i64[:, ::1] prefix = np.zeros((m, n + 1), dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] out_arr = np.empty(K, dtype=np.int64)
    cdef i64[::1] out = out_arr
    cdef Py_ssize_t k, t, x
    cdef i64 r, start, c
    for t in range(m):
        for x in range(n):
            prefix[t, x + 1] = prefix[t, x] + binom[n - 1 - x, m - 1 - t]
    for k in range(K):
        r = 0
        start = 0
        for t in range(m):
            c = menus[k, t] - 1
            r += prefix[t, c] - prefix[t, start]
            start = c + 1
        out[k] = r
    return out_arr


cdef inline bint _next_combination(Py_ssize_t* idx, Py_ssize_t n, Py_ssize_t m) nogil:
    cdef Py_ssize_t t = m - 1
    while t >= 0 and idx[t] == n - m + t:
        t -= 1
    if t < 0:
        return False
    idx[t] += 1
    t += 1
    while t < m:
        idx[t] = idx[t - 1] + 1
        t += 1
    return True


def mnl_borda_sums(const double[::1] weights, Py_ssize_t m):
    cdef Py_ssize_t n = weights.shape[0]
    cdef cnp.ndarray[double, ndim=1] out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef cnp.ndarray[Py_ssize_t, ndim=1] idx_arr = np.arange(m, dtype=np.intp)
    cdef Py_ssize_t* idx = <Py_ssize_t*> idx_arr.data
    cdef Py_ssize_t t
    cdef double total
    with nogil:
        while True:
            total = 0.0
            for t in range(m):
                total = total + weights[idx[t]]
            for t in range(m):
                out[idx[t]] += weights[idx[t]] / total
            if not _next_combination(idx, n, m):
                break
    return out_arr


def accumulate_chain(const i64[:, ::1] menus, const double[:, ::1] probs, Py_ssize_t n):
    cdef Py_ssize_t M = menus.shape[0], m = menus.shape[1]
    cdef cnp.ndarray[double, ndim=2] out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t s, a, b
    with nogil:
        for s in range(M):
            for a in range(m):
                for b in range(m):
                    if a != b:
                        out[menus[s, a] - 1, menus[s, b] - 1] += probs[s, b]
    return out_arr


def menu_win_mass(const i64[:, ::1] tiers, const i64[::1] multiplicity, Py_ssize_t m, i64 scale):
    """Integer win mass (times ``scale``) of every menu member, menus in lex order."""
    cdef Py_ssize_t R = tiers.shape[0], n = tiers.shape[1]
    cdef i64[:, ::1] binom = binomial_table(n, m)
    cdef Py_ssize_t C = binom[n, m]
    cdef cnp.ndarray[i64, ndim=2] out_arr = np.zeros((C, m), dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef cnp.ndarray[Py_ssize_t, ndim=1] idx_arr = np.arange(m, dtype=np.intp)
    cdef Py_ssize_t* idx = <Py_ssize_t*> idx_arr.data
    cdef Py_ssize_t s = 0, r, t, ties
    cdef i64 best, tier, share
    with nogil:
        while True:
            for r in range(R):
                best = tiers[r, idx[0]]
                ties = 1
                for t in range(1, m):
                    tier = tiers[r, idx[t]]
                    if tier < best:
                        best = tier
                        ties = 1
                    elif tier == best:
                        ties += 1
                share = multiplicity[r] * (scale // ties)
                for t in range(m):
                    if tiers[r, idx[t]] == best:
                        out[s, t] += share
            s += 1
            if not _next_combination(idx, n, m):
                break
    return out_arr
