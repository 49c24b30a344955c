"""Numba kernels for matrix-element evaluation, row enumeration and spawning.

Determinants are uint64 bitmasks here, which limits the fast path to 64
spin orbitals.  All kernels are single-threaded and deterministic given
their inputs; randomness enters only through pre-generated uniform
arrays, so the calling code owns the random stream.
"""

import numpy as np
from numba import njit, uint64

U1 = uint64(1)

_M1 = uint64(0x5555555555555555)
_M2 = uint64(0x3333333333333333)
_M4 = uint64(0x0F0F0F0F0F0F0F0F)
_H01 = uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> U1) & _M1)
    x = (x & _M2) + ((x >> uint64(2)) & _M2)
    x = (x + (x >> uint64(4))) & _M4
    return int((x * _H01) >> uint64(56))


@njit(cache=True, inline="always")
def _occupied(d, p):
    return (d >> uint64(p)) & U1 != uint64(0)


@njit(cache=True, inline="always")
def _parity_between(d, i, j):
    lo, hi = (i, j) if i < j else (j, i)
    mask = ((U1 << uint64(hi)) - U1) ^ ((U1 << uint64(lo + 1)) - U1)
    if _popcount(d & mask) & 1:
        return -1.0
    return 1.0


@njit(cache=True, inline="always")
def _apply_sign(d, p):
    """Parity of operators below bit p in d."""
    if _popcount(d & ((U1 << uint64(p)) - U1)) & 1:
        return -1.0
    return 1.0


@njit(cache=True)
def _fill_occ(d, n_so, out):
    n = 0
    for p in range(n_so):
        if _occupied(d, p):
            out[n] = p
            n += 1
    return n


@njit(cache=True)
def _double_sign(d, i, k, j, l):
    """Sign of <D'| a+_j a+_l a_k a_i |D> for valid i,k occupied, j,l vacant."""
    sign = _apply_sign(d, i)
    d ^= U1 << uint64(i)
    sign *= _apply_sign(d, k)
    d ^= U1 << uint64(k)
    sign *= _apply_sign(d, l)
    d |= U1 << uint64(l)
    sign *= _apply_sign(d, j)
    return sign


# ---------------------------------------------------------------------------
# [[V,T],V] closed form: couples single excitations only, zero diagonal.
# ---------------------------------------------------------------------------


@njit(cache=True)
def vtv_element(d, i, j, T, V, occ, n_occ):
    """Signed <D_i^j| [[V,T],V] |D> for i occupied, j vacant."""
    tij = T[i, j]
    if tij == 0.0:
        return 0.0
    acc = 0.0
    for a in range(n_occ):
        k = occ[a]
        if k != i:
            acc += V[i, k] - V[j, k]
    return -tij * _parity_between(d, i, j) * acc * acc


@njit(cache=True)
def vtv_row(d, T, V, n_so, out_dets, out_vals):
    """All nonzero off-diagonal elements <D'|[[V,T],V]|D>; returns count."""
    occ = np.empty(n_so, dtype=np.int64)
    n_occ = _fill_occ(d, n_so, occ)
    n = 0
    for a in range(n_occ):
        i = occ[a]
        for j in range(i & 1, n_so, 2):
            if _occupied(d, j) or T[i, j] == 0.0:
                continue
            el = vtv_element(d, i, j, T, V, occ, n_occ)
            if el != 0.0:
                out_dets[n] = (d ^ (U1 << uint64(i))) | (U1 << uint64(j))
                out_vals[n] = el
                n += 1
    return n


# ---------------------------------------------------------------------------
# [[V,T],T] via Slater-Condon rules on (scalar, h1, antisymmetrized h2).
# ---------------------------------------------------------------------------


@njit(cache=True)
def vtt_diag(d, scalar, h1, A, occ, n_occ):
    acc = scalar
    for a in range(n_occ):
        p = occ[a]
        acc += h1[p, p]
        for b in range(n_occ):
            if b != a:
                q = occ[b]
                acc += 0.5 * A[q, p, p, q]
    return acc


@njit(cache=True)
def vtt_single(d, i, j, h1, A, occ, n_occ):
    """Signed element for the single excitation i (occ) -> j (vac)."""
    acc = h1[j, i]
    for a in range(n_occ):
        k = occ[a]
        if k != i:
            acc += A[j, k, k, i]
    if acc == 0.0:
        return 0.0
    return _parity_between(d, i, j) * acc


@njit(cache=True)
def vtt_double(d, i, k, j, l, A):
    """Signed element for the double excitation i,k (occ) -> j,l (vac)."""
    coeff = A[j, l, k, i]
    if coeff == 0.0:
        return 0.0
    return _double_sign(d, i, k, j, l) * coeff


@njit(cache=True)
def vtt_row(d, h1, A, n_so, out_dets, out_vals):
    """All nonzero off-diagonal elements <D'|[[V,T],T]|D>; returns count."""
    occ = np.empty(n_so, dtype=np.int64)
    vac = np.empty(n_so, dtype=np.int64)
    n_occ = _fill_occ(d, n_so, occ)
    n_vac = 0
    for p in range(n_so):
        if not _occupied(d, p):
            vac[n_vac] = p
            n_vac += 1
    n = 0
    # singles (same spin)
    for a in range(n_occ):
        i = occ[a]
        for b in range(n_vac):
            j = vac[b]
            if (i ^ j) & 1:
                continue
            el = vtt_single(d, i, j, h1, A, occ, n_occ)
            if el != 0.0:
                out_dets[n] = (d ^ (U1 << uint64(i))) | (U1 << uint64(j))
                out_vals[n] = el
                n += 1
    # doubles (spin conserved per component)
    for a in range(n_occ):
        i = occ[a]
        for b in range(a + 1, n_occ):
            k = occ[b]
            for c in range(n_vac):
                j = vac[c]
                if (j ^ i) & 1:
                    continue
                for e in range(n_vac):
                    l = vac[e]
                    if (l ^ k) & 1:
                        continue
                    if ((i ^ k) & 1) == 0 and l <= j:
                        continue  # same-spin pair: enumerate unordered once
                    el = vtt_double(d, i, k, j, l, A)
                    if el != 0.0:
                        d2 = d ^ (U1 << uint64(i)) ^ (U1 << uint64(k))
                        d2 |= (U1 << uint64(j)) | (U1 << uint64(l))
                        out_dets[n] = d2
                        out_vals[n] = el
                        n += 1
    return n


@njit(cache=True)
def vtt_diag_all(dets, scalar, h1, A, n_so):
    out = np.empty(dets.shape[0])
    occ = np.empty(n_so, dtype=np.int64)
    for a in range(dets.shape[0]):
        n_occ = _fill_occ(dets[a], n_so, occ)
        out[a] = vtt_diag(dets[a], scalar, h1, A, occ, n_occ)
    return out


# ---------------------------------------------------------------------------
# Sparse sector-matrix assembly (COO chunks).
# ---------------------------------------------------------------------------


@njit(cache=True)
def build_rows_vtv(chunk, chunk_offset, all_dets, T, V, n_so, max_row, absolute):
    rows = np.empty(chunk.shape[0] * max_row, dtype=np.int64)
    cols = np.empty(chunk.shape[0] * max_row, dtype=np.int64)
    vals = np.empty(chunk.shape[0] * max_row)
    tmp_d = np.empty(max_row, dtype=np.uint64)
    tmp_v = np.empty(max_row)
    n = 0
    for a in range(chunk.shape[0]):
        cnt = vtv_row(chunk[a], T, V, n_so, tmp_d, tmp_v)
        for b in range(cnt):
            rows[n] = np.searchsorted(all_dets, tmp_d[b])
            cols[n] = chunk_offset + a
            vals[n] = abs(tmp_v[b]) if absolute else tmp_v[b]
            n += 1
    return rows[:n], cols[:n], vals[:n]


@njit(cache=True)
def build_rows_vtt(
    chunk, chunk_offset, all_dets, scalar, h1, A, n_so, max_row, absolute
):
    rows = np.empty(chunk.shape[0] * max_row, dtype=np.int64)
    cols = np.empty(chunk.shape[0] * max_row, dtype=np.int64)
    vals = np.empty(chunk.shape[0] * max_row)
    tmp_d = np.empty(max_row, dtype=np.uint64)
    tmp_v = np.empty(max_row)
    occ = np.empty(n_so, dtype=np.int64)
    n = 0
    for a in range(chunk.shape[0]):
        d = chunk[a]
        n_occ = _fill_occ(d, n_so, occ)
        diag = vtt_diag(d, scalar, h1, A, occ, n_occ)
        if diag != 0.0:
            rows[n] = chunk_offset + a
            cols[n] = chunk_offset + a
            vals[n] = abs(diag) if absolute else diag
            n += 1
        cnt = vtt_row(d, h1, A, n_so, tmp_d, tmp_v)
        for b in range(cnt):
            rows[n] = np.searchsorted(all_dets, tmp_d[b])
            cols[n] = chunk_offset + a
            vals[n] = abs(tmp_v[b]) if absolute else tmp_v[b]
            n += 1
    return rows[:n], cols[:n], vals[:n]


# ---------------------------------------------------------------------------
# Spawning kernels.  Uniform variates are pre-generated by the caller.
# ---------------------------------------------------------------------------


@njit(cache=True)
def vtv_spawn(
    dets,
    coeffs,
    n_spawn,
    T,
    V,
    n_so,
    dtau,
    sign_free,
    u,
    out_dets,
    out_amps,
):
    """One spawning sweep on the propagated operator -[[V,T],V] (or -abs).

    ``u`` holds 2 uniforms per attempt.  Returns the number of spawned
    walkers written to the output buffers.
    """
    occ = np.empty(n_so, dtype=np.int64)
    n_out = 0
    attempt = 0
    for a in range(dets.shape[0]):
        d = dets[a]
        ci = coeffs[a]
        ns = n_spawn[a]
        n_occ = _fill_occ(d, n_so, occ)
        n_vac_up = 0
        n_vac_dn = 0
        for p in range(0, n_so, 2):
            if not _occupied(d, p):
                n_vac_up += 1
        for p in range(1, n_so, 2):
            if not _occupied(d, p):
                n_vac_dn += 1
        for _ in range(ns):
            u1 = u[2 * attempt]
            u2 = u[2 * attempt + 1]
            attempt += 1
            i = occ[min(int(u1 * n_occ), n_occ - 1)]
            spin = i & 1
            n_vac = n_vac_up if spin == 0 else n_vac_dn
            if n_vac == 0:
                continue
            pick = min(int(u2 * n_vac), n_vac - 1)
            j = -1
            seen = 0
            for p in range(spin, n_so, 2):
                if not _occupied(d, p):
                    if seen == pick:
                        j = p
                        break
                    seen += 1
            el = vtv_element(d, i, j, T, V, occ, n_occ)
            if el == 0.0:
                continue
            prop = -abs(el) if sign_free else -el
            p_gen = 1.0 / (n_occ * n_vac)
            out_dets[n_out] = (d ^ (U1 << uint64(i))) | (U1 << uint64(j))
            out_amps[n_out] = -dtau * prop * ci / (ns * p_gen)
            n_out += 1
    return n_out


@njit(cache=True)
def vtt_spawn(
    dets,
    coeffs,
    n_spawn,
    h1,
    A,
    n_so,
    dtau,
    sign_free,
    p_single,
    u,
    out_dets,
    out_amps,
):
    """One spawning sweep on the propagated operator -[[V,T],T] (or -abs).

    ``u`` holds 4 uniforms per attempt (branch, occ pick, two vacant picks).
    """
    occ = np.empty(n_so, dtype=np.int64)
    vac_up = np.empty(n_so, dtype=np.int64)
    vac_dn = np.empty(n_so, dtype=np.int64)
    n_out = 0
    attempt = 0
    for a in range(dets.shape[0]):
        d = dets[a]
        ci = coeffs[a]
        ns = n_spawn[a]
        n_occ = _fill_occ(d, n_so, occ)
        nv_up = 0
        nv_dn = 0
        for p in range(0, n_so, 2):
            if not _occupied(d, p):
                vac_up[nv_up] = p
                nv_up += 1
        for p in range(1, n_so, 2):
            if not _occupied(d, p):
                vac_dn[nv_dn] = p
                nv_dn += 1
        n_pairs = n_occ * (n_occ - 1) // 2
        for _ in range(ns):
            u0 = u[4 * attempt]
            u1 = u[4 * attempt + 1]
            u2 = u[4 * attempt + 2]
            u3 = u[4 * attempt + 3]
            attempt += 1
            if u0 < p_single:
                i = occ[min(int(u1 * n_occ), n_occ - 1)]
                if i & 1 == 0:
                    n_vac, vac = nv_up, vac_up
                else:
                    n_vac, vac = nv_dn, vac_dn
                if n_vac == 0:
                    continue
                j = vac[min(int(u2 * n_vac), n_vac - 1)]
                el = vtt_single(d, i, j, h1, A, occ, n_occ)
                if el == 0.0:
                    continue
                p_gen = p_single / (n_occ * n_vac)
                d2 = (d ^ (U1 << uint64(i))) | (U1 << uint64(j))
            else:
                if n_pairs == 0:
                    continue
                pair = min(int(u1 * n_pairs), n_pairs - 1)
                # unrank an unordered pair (a_idx < b_idx)
                a_idx = 0
                rem = pair
                span = n_occ - 1
                while rem >= span:
                    rem -= span
                    a_idx += 1
                    span -= 1
                b_idx = a_idx + 1 + rem
                i = occ[a_idx]
                k = occ[b_idx]
                if (i & 1) == (k & 1):
                    if i & 1 == 0:
                        n_vac, vac = nv_up, vac_up
                    else:
                        n_vac, vac = nv_dn, vac_dn
                    nvp = n_vac * (n_vac - 1) // 2
                    if nvp == 0:
                        continue
                    vp = min(int(u2 * nvp), nvp - 1)
                    c_idx = 0
                    rem2 = vp
                    span2 = n_vac - 1
                    while rem2 >= span2:
                        rem2 -= span2
                        c_idx += 1
                        span2 -= 1
                    e_idx = c_idx + 1 + rem2
                    j = vac[c_idx]
                    l = vac[e_idx]
                    p2 = 1.0 / nvp
                else:
                    iu, kd = (i, k) if i & 1 == 0 else (k, i)
                    if nv_up == 0 or nv_dn == 0:
                        continue
                    j = vac_up[min(int(u2 * nv_up), nv_up - 1)]
                    l = vac_dn[min(int(u3 * nv_dn), nv_dn - 1)]
                    i, k = iu, kd
                    p2 = 1.0 / (nv_up * nv_dn)
                el = vtt_double(d, i, k, j, l, A)
                if el == 0.0:
                    continue
                p_gen = (1.0 - p_single) * p2 / n_pairs
                d2 = d ^ (U1 << uint64(i)) ^ (U1 << uint64(k))
                d2 |= (U1 << uint64(j)) | (U1 << uint64(l))
            prop = -abs(el) if sign_free else -el
            out_dets[n_out] = d2
            out_amps[n_out] = -dtau * prop * ci / (ns * p_gen)
            n_out += 1
    return n_out
