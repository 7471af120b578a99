"""Pure-Python/numpy implementations of the hot kernels.

Same signatures as the compiled ``_kernels`` extension; selected by
:mod:`forgeqse.kernels` when the extension is not built.
"""

import numpy as np

_IPOW = np.array([1, 1j, -1, -1j])


def _parity(a):
    return 1 - 2 * (np.bitwise_count(a).astype(np.int64) & 1)


def pauli_expectations(bra, ket, xs, zs):
    """<bra|P(x_t, z_t)|ket> for every term t."""
    bra = np.asarray(bra, dtype=complex)
    ket = np.asarray(ket, dtype=complex)
    j = np.arange(ket.shape[0], dtype=np.int64)
    out = np.empty(len(xs), dtype=complex)
    for t, (x, z) in enumerate(zip(xs, zs)):
        x = int(x)
        z = int(z)
        phase = _IPOW[bin(x & z).count("1") % 4]
        out[t] = phase * np.dot(bra[j ^ x].conj(), _parity(j & z) * ket)
    return out


def parity_expectations(weights, masks):
    """sum_b w_b (-1)^{|b & m|} for every mask m."""
    weights = np.asarray(weights, dtype=float)
    b = np.arange(weights.shape[0], dtype=np.int64)
    return np.array([np.dot(weights, _parity(b & int(m))) for m in masks])


def _sign(state, mode):
    return -1.0 if bin(state & ((1 << mode) - 1)).count("1") & 1 else 1.0


def _spatial(mode, n):
    return mode % n, mode // n


def _one_body(h, g, n, occ, a, i):
    pa, sa = _spatial(a, n)
    pi, si = _spatial(i, n)
    if sa != si:
        return 0.0
    val = h[pa, pi]
    for m in occ:
        if m == i:
            continue
        pm, sm = _spatial(m, n)
        val += g[pa, pi, pm, pm]
        if sm == sa:
            val -= g[pa, pm, pm, pi]
    return val


def _antisym(g, n, a, b, i, j):
    pa, sa = _spatial(a, n)
    pb, sb = _spatial(b, n)
    pi, si = _spatial(i, n)
    pj, sj = _spatial(j, n)
    val = 0.0
    if sa == si and sb == sj:
        val += g[pa, pi, pb, pj]
    if sa == sj and sb == si:
        val -= g[pa, pj, pb, pi]
    return val


def _diagonal(h, g, n, occ):
    e = 0.0
    for m in occ:
        pm, sm = _spatial(m, n)
        e += h[pm, pm]
    for x, m in enumerate(occ):
        pm, sm = _spatial(m, n)
        for k in occ[x + 1 :]:
            pk, sk = _spatial(k, n)
            e += g[pm, pm, pk, pk]
            if sm == sk:
                e -= g[pm, pk, pk, pm]
    return e


def _modes(state):
    out = []
    m = 0
    while state:
        if state & 1:
            out.append(m)
        state >>= 1
        m += 1
    return out


def slater_condon(det_i, det_j, h, g, n):
    """<det_j|H|det_i> for combined bitstrings (alpha low bits, beta high bits)."""
    diff = det_i ^ det_j
    degree = bin(diff).count("1")
    if degree == 0:
        return _diagonal(h, g, n, _modes(det_i))
    removed = _modes(diff & det_i)
    added = _modes(diff & det_j)
    if degree == 2:
        i, a = removed[0], added[0]
        sign = _sign(det_i, i)
        sign *= _sign(det_i ^ (1 << i), a)
        return sign * _one_body(h, g, n, _modes(det_i), a, i)
    if degree == 4:
        i, j = removed
        a, b = added
        # <J| a+_a a+_b a_j a_i |I>
        s = det_i
        sign = _sign(s, i)
        s ^= 1 << i
        sign *= _sign(s, j)
        s ^= 1 << j
        sign *= _sign(s, b)
        s ^= 1 << b
        sign *= _sign(s, a)
        return sign * _antisym(g, n, a, b, i, j)
    return 0.0


def casci_elements(dets, h, g, n):
    """Nonzero Hamiltonian elements (rows, cols, values) over a determinant list.

    Electronic part only; the core energy is added by the caller.
    """
    dets = np.asarray(dets, dtype=np.int64)
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    nd = dets.shape[0]
    rows, cols, vals = [], [], []
    for col in range(nd):
        deg = np.bitwise_count(dets[col] ^ dets[col:])
        for off in np.nonzero(deg <= 4)[0]:
            row = col + int(off)
            v = slater_condon(int(dets[col]), int(dets[row]), h, g, n)
            if v != 0.0:
                rows.append(row)
                cols.append(col)
                vals.append(v)
                if row != col:
                    rows.append(col)
                    cols.append(row)
                    vals.append(v)
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)
