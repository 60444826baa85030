"""Compiled inner loops for shell sums over lattice boxes.

For a function f on a box and query points x, every routine here works with
the shell histogram H_x(m) = sum_y f(y) [|x - y|^2 = m], m <= m_max, and
reduces it per point over a window lo(x) <= m <= hi(x) of allowed radii:

* mode 0: max of w[m] H_x(m), argmax (smallest m on ties),
* mode 1: sum of w[m] H_x(m).

Two exact routes compute H_x: a direct loop over the support of f (cheap when
f is sparse), and a split route that factors |x - y|^2 into the contribution of
the first h coordinates and of the remaining ones (cheap when f is dense).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MODE_MAX = 0
MODE_SUM = 1


@njit(cache=True)
def _reduce_sparse(hist, touched, nt, w, allowed, nxt, lo, hi, mode):
    # hist is zero outside touched[:nt]
    if mode == MODE_SUM:
        s = 0.0
        for t in range(nt):
            m = touched[t]
            if m >= lo and m <= hi and allowed[m]:
                s += w[m] * hist[m]
        return s, -1
    best = -np.inf
    arg = -1
    for t in range(nt):
        m = touched[t]
        if m >= lo and m <= hi and allowed[m]:
            v = w[m] * hist[m]
            if v > best or (v == best and m < arg):
                best = v
                arg = m
    # untouched allowed radii contribute the value 0
    m = nxt[lo] if lo < nxt.shape[0] else -1
    while m != -1 and m <= hi:
        hit = False
        for t in range(nt):
            if touched[t] == m:
                hit = True
                break
        if not hit:
            if 0.0 > best or (0.0 == best and m < arg):
                best = 0.0
                arg = m
            break
        m = nxt[m + 1] if m + 1 < nxt.shape[0] else -1
    if arg == -1:
        best = 0.0
    return best, arg


@njit(cache=True)
def _reduce_dense(hist, w, allowed, lo, hi, mode):
    if mode == MODE_SUM:
        s = 0.0
        for m in range(lo, hi + 1):
            if allowed[m]:
                s += w[m] * hist[m]
        return s, -1
    best = -np.inf
    arg = -1
    for m in range(lo, hi + 1):
        if allowed[m]:
            v = w[m] * hist[m]
            if v > best:
                best = v
                arg = m
    if arg == -1:
        best = 0.0
    return best, arg


@njit(cache=True)
def pair_reduce(xs, ys, yv, m_max, w, allowed, nxt, lo, hi, mode):
    n, d = xs.shape
    p = ys.shape[0]
    out = np.zeros(n)
    arg = np.full(n, -1, dtype=np.int64)
    hist = np.zeros(m_max + 1)
    stamp = np.zeros(m_max + 1, dtype=np.int64)
    touched = np.empty(m_max + 1, dtype=np.int64)
    for i in range(n):
        nt = 0
        for k in range(p):
            m = 0
            for j in range(d):
                t = xs[i, j] - ys[k, j]
                m += t * t
                if m > m_max:
                    break
            if m > m_max:
                continue
            if stamp[m] != i + 1:
                stamp[m] = i + 1
                touched[nt] = m
                nt += 1
            hist[m] += yv[k]
        v, a = _reduce_sparse(hist, touched, nt, w, allowed, nxt, lo[i], hi[i], mode)
        out[i] = v
        arg[i] = a
        for t in range(nt):
            hist[touched[t]] = 0.0
    return out, arg


@njit(cache=True, fastmath=True)
def split_reduce(ucoords, vcoords, indptr, vidx, vval, xu, group_ptr, group_v,
                 m_max, w, allowed, lo, hi, mode):
    """Dense route.

    ucoords (U, h) / vcoords (V, d-h): coordinates of the two factor grids of the
    f box; row u of f is stored CSR-style (indptr, vidx, vval).  Query points are
    grouped by their last d-h coordinates (group_v); xu holds their first h
    coordinates in group order.
    """
    U = ucoords.shape[0]
    h = ucoords.shape[1]
    dv = vcoords.shape[1]
    n = xu.shape[0]
    out = np.zeros(n)
    arg = np.full(n, -1, dtype=np.int64)
    K = np.zeros((U, m_max + 1))
    kmax = np.full(U, -1, dtype=np.int64)
    hist = np.zeros(m_max + 1)
    for g in range(group_v.shape[0]):
        for u in range(U):
            if kmax[u] >= 0:
                for b in range(kmax[u] + 1):
                    K[u, b] = 0.0
                kmax[u] = -1
            for q in range(indptr[u], indptr[u + 1]):
                iv = vidx[q]
                b = 0
                for j in range(dv):
                    t = group_v[g, j] - vcoords[iv, j]
                    b += t * t
                if b <= m_max:
                    K[u, b] += vval[q]
                    if b > kmax[u]:
                        kmax[u] = b
        for i in range(group_ptr[g], group_ptr[g + 1]):
            for m in range(m_max + 1):
                hist[m] = 0.0
            for u in range(U):
                if kmax[u] < 0:
                    continue
                a = 0
                for j in range(h):
                    t = xu[i, j] - ucoords[u, j]
                    a += t * t
                if a > m_max:
                    continue
                top = min(m_max - a, kmax[u])
                row = K[u]
                seg = hist[a : a + top + 1]
                for b in range(top + 1):
                    seg[b] += row[b]
            v, ai = _reduce_dense(hist, w, allowed, lo[i], hi[i], mode)
            out[i] = v
            arg[i] = ai
    return out, arg


@njit(cache=True)
def offset_sum(fvals, fcorner, fside, xs, offs, wk):
    """sum_k wk[k] f(x - offs[k]) for every x, with f zero outside its box."""
    n, d = xs.shape
    K = offs.shape[0]
    strides = np.empty(d, dtype=np.int64)
    s = 1
    for j in range(d - 1, -1, -1):
        strides[j] = s
        s *= fside
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k in range(K):
            idx = 0
            ok = True
            for j in range(d):
                c = xs[i, j] - offs[k, j] - fcorner[j]
                if c < 0 or c >= fside:
                    ok = False
                    break
                idx += c * strides[j]
            if ok:
                acc += wk[k] * fvals[idx]
        out[i] = acc
    return out


def _next_allowed(allowed: np.ndarray) -> np.ndarray:
    nxt = np.full(len(allowed) + 1, -1, dtype=np.int64)
    cur = -1
    for m in range(len(allowed) - 1, -1, -1):
        if allowed[m]:
            cur = m
        nxt[m] = cur
    return nxt


def shell_reduce(values, corner, xs, m_max, w, allowed, lo, hi, mode, route=None):
    """Python entry: pick the cheaper exact route and run it.

    ``values`` is the dense array of f on the cube with lower corner ``corner``.
    Returns (value, argmax m) per query point in the original order.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    d = values.ndim
    n = len(xs)
    w = np.ascontiguousarray(w, dtype=np.float64)
    allowed = np.ascontiguousarray(allowed, dtype=np.bool_)
    lo = np.ascontiguousarray(np.broadcast_to(lo, (n,)), dtype=np.int64)
    hi = np.ascontiguousarray(np.minimum(np.broadcast_to(hi, (n,)), m_max), dtype=np.int64)
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)

    # crop f to the region any query point can reach
    reach = math.isqrt(m_max)
    corner = np.asarray(corner, dtype=np.int64)
    lo_box = np.maximum(xs.min(axis=0) - reach, corner)
    hi_box = np.minimum(xs.max(axis=0) + reach + 1, corner + np.array(values.shape))
    if np.any(hi_box <= lo_box):
        return np.zeros(n), _argmin_allowed(allowed, lo, hi)
    sl = tuple(slice(int(a - c), int(b - c)) for a, b, c in zip(lo_box, hi_box, corner))
    sub = values[sl]
    nz = np.nonzero(sub)
    nnz = len(nz[0])
    if nnz == 0:
        return np.zeros(n), _argmin_allowed(allowed, lo, hi)

    h = d // 2
    U = int(np.prod(sub.shape[:h])) if h else 1
    xv_unique = np.unique(xs[:, h:], axis=0)
    pair_cost = n * nnz
    split_cost = len(xv_unique) * (nnz + U * 4) + n * U * (m_max + 1) / 4
    if route is None:
        route = "pair" if pair_cost <= split_cost else "split"

    if route == "pair":
        ys = (np.stack(nz, axis=1) + lo_box).astype(np.int64)
        yv = sub[nz].astype(np.float64)
        return pair_reduce(xs, ys, yv, m_max, w, allowed, _next_allowed(allowed), lo, hi, mode)

    ushape = sub.shape[:h]
    vshape = sub.shape[h:]
    if h:
        ucoords = (np.indices(ushape).reshape(h, -1).T + lo_box[:h]).astype(np.int64)
    else:
        ucoords = np.zeros((1, 0), dtype=np.int64)
    vcoords = (np.indices(vshape).reshape(d - h, -1).T + lo_box[h:]).astype(np.int64)
    flat = sub.reshape(U, -1)
    rows, cols = np.nonzero(flat)
    indptr = np.zeros(U + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    vidx = cols.astype(np.int64)
    vval = flat[rows, cols].astype(np.float64)

    order = np.lexsort(xs[:, h:].T[::-1]) if d - h > 0 else np.arange(n)
    xs_sorted = xs[order]
    keys = xs_sorted[:, h:]
    change = np.ones(n, dtype=bool)
    change[1:] = np.any(keys[1:] != keys[:-1], axis=1)
    starts = np.flatnonzero(change)
    group_ptr = np.append(starts, n).astype(np.int64)
    group_v = np.ascontiguousarray(keys[starts])
    xu = np.ascontiguousarray(xs_sorted[:, :h]) if h else np.zeros((n, 0), dtype=np.int64)
    val, arg = split_reduce(ucoords, vcoords, indptr, vidx, vval, xu, group_ptr, group_v,
                            m_max, w, allowed, lo[order], hi[order], mode)
    out_v = np.empty(n)
    out_a = np.empty(n, dtype=np.int64)
    out_v[order] = val
    out_a[order] = arg
    return out_v, out_a


def _argmin_allowed(allowed, lo, hi):
    nxt = _next_allowed(allowed)
    a = np.where(lo < len(nxt), nxt[np.minimum(lo, len(nxt) - 1)], -1)
    return np.where((a >= 0) & (a <= hi), a, -1).astype(np.int64)
