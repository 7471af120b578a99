# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Pauli expectations, parity estimates, Slater-Condon."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef long long i64


cdef inline int popcount(unsigned long long x) nogil:
    return __builtin_popcountll(x)


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


def pauli_expectations(bra, ket, xs, zs):
    """<bra|P(x_t, z_t)|ket> for every term t."""
    cdef const double complex[::1] b = np.ascontiguousarray(bra, dtype=np.complex128)
    cdef const double complex[::1] k = np.ascontiguousarray(ket, dtype=np.complex128)
    cdef const i64[::1] xv = np.ascontiguousarray(xs, dtype=np.int64)
    cdef const i64[::1] zv = np.ascontiguousarray(zs, dtype=np.int64)
    cdef Py_ssize_t nt = xv.shape[0], dim = k.shape[0], t, j
    out = np.empty(nt, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex acc, amp
    cdef double complex ipow[4]
    ipow[0] = 1.0
    ipow[1] = 1j
    ipow[2] = -1.0
    ipow[3] = -1j
    cdef i64 x, z
    with nogil:
        for t in range(nt):
            x = xv[t]
            z = zv[t]
            acc = 0.0
            for j in range(dim):
                amp = b[j ^ x].conjugate() * k[j]
                if popcount(j & z) & 1:
                    acc = acc - amp
                else:
                    acc = acc + amp
            o[t] = ipow[popcount(x & z) & 3] * acc
    return out


def parity_expectations(weights, masks):
    """sum_b w_b (-1)^{|b & m|} for every mask m."""
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const i64[::1] mv = np.ascontiguousarray(masks, dtype=np.int64)
    cdef Py_ssize_t nm = mv.shape[0], dim = w.shape[0], t, j
    out = np.empty(nm, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    cdef i64 m
    with nogil:
        for t in range(nm):
            m = mv[t]
            acc = 0.0
            for j in range(dim):
                if popcount(j & m) & 1:
                    acc -= w[j]
                else:
                    acc += w[j]
            o[t] = acc
    return out


cdef inline double ladder_sign(i64 state, int mode) nogil:
    return -1.0 if popcount(state & ((<i64>1 << mode) - 1)) & 1 else 1.0


cdef inline double gget(const double[::1] g, int n, int p, int q, int r, int s) nogil:
    return g[((p * n + q) * n + r) * n + s]


cdef double element(i64 di, i64 dj, const double[::1] h, const double[::1] g, int n) nogil:
    cdef i64 diff = di ^ dj, s, rem, add, occ
    cdef int degree = popcount(diff)
    cdef int i, j, a, b, m, k, pm, sm, pk, sk, pa, sa, pi, si, pb, sb, pj, sj
    cdef double val, sign
    if degree == 0:
        val = 0.0
        occ = di
        while occ:
            m = __builtin_ctzll(occ)
            occ &= occ - 1
            pm = m % n
            sm = m // n
            val += h[pm * n + pm]
            s = occ
            while s:
                k = __builtin_ctzll(s)
                s &= s - 1
                pk = k % n
                sk = k // n
                val += gget(g, n, pm, pm, pk, pk)
                if sm == sk:
                    val -= gget(g, n, pm, pk, pk, pm)
        return val
    rem = diff & di
    add = diff & dj
    if degree == 2:
        i = __builtin_ctzll(rem)
        a = __builtin_ctzll(add)
        pa = a % n
        sa = a // n
        pi = i % n
        si = i // n
        if sa != si:
            return 0.0
        sign = ladder_sign(di, i) * ladder_sign(di ^ (<i64>1 << i), a)
        val = h[pa * n + pi]
        occ = di
        while occ:
            m = __builtin_ctzll(occ)
            occ &= occ - 1
            if m == i:
                continue
            pm = m % n
            sm = m // n
            val += gget(g, n, pa, pi, pm, pm)
            if sm == sa:
                val -= gget(g, n, pa, pm, pm, pi)
        return sign * val
    if degree == 4:
        i = __builtin_ctzll(rem)
        rem &= rem - 1
        j = __builtin_ctzll(rem)
        a = __builtin_ctzll(add)
        add &= add - 1
        b = __builtin_ctzll(add)
        s = di
        sign = ladder_sign(s, i)
        s ^= <i64>1 << i
        sign *= ladder_sign(s, j)
        s ^= <i64>1 << j
        sign *= ladder_sign(s, b)
        s ^= <i64>1 << b
        sign *= ladder_sign(s, a)
        pa = a % n
        sa = a // n
        pb = b % n
        sb = b // n
        pi = i % n
        si = i // n
        pj = j % n
        sj = j // n
        val = 0.0
        if sa == si and sb == sj:
            val += gget(g, n, pa, pi, pb, pj)
        if sa == sj and sb == si:
            val -= gget(g, n, pa, pj, pb, pi)
        return sign * val
    return 0.0


def slater_condon(det_i, det_j, h, g, int n):
    """<det_j|H|det_i> for combined bitstrings (alpha low bits, beta high bits)."""
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64).ravel()
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64).ravel()
    return element(det_i, det_j, hv, gv, n)


def casci_elements(dets, h, g, int n):
    """Nonzero Hamiltonian elements (rows, cols, values) over a determinant list.

    Electronic part only; the core energy is added by the caller.
    """
    cdef const i64[::1] d = np.ascontiguousarray(dets, dtype=np.int64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64).ravel()
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef Py_ssize_t nd = d.shape[0], r, c, count = 0, pos = 0
    cdef double v
    with nogil:
        for c in range(nd):
            for r in range(c, nd):
                if popcount(d[c] ^ d[r]) <= 4:
                    count += 1 if r == c else 2
    rows = np.empty(count, dtype=np.int64)
    cols = np.empty(count, dtype=np.int64)
    vals = np.empty(count, dtype=np.float64)
    cdef i64[::1] rv = rows
    cdef i64[::1] cv = cols
    cdef double[::1] vv = vals
    with nogil:
        for c in range(nd):
            for r in range(c, nd):
                if popcount(d[c] ^ d[r]) > 4:
                    continue
                v = element(d[c], d[r], hv, gv, n)
                if v == 0.0:
                    continue
                rv[pos] = r
                cv[pos] = c
                vv[pos] = v
                pos += 1
                if r != c:
                    rv[pos] = c
                    cv[pos] = r
                    vv[pos] = v
                    pos += 1
    return rows[:pos], cols[:pos], vals[:pos]
