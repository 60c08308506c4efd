"""Compiled event loop for the loss-network simulator.

The loop consumes uniforms from per-stream buffers and hands control back to
Python when a buffer runs low (status 1) or the batch horizon is reached
(status 0). All state lives in arrays so a replication can be resumed.
"""
import numba
import numpy as np

from .stochastics import coxian_transform, exp_transform

DEP, ARR, SW = 0, 1, 2
SRC_POISSON, SRC_RENEWAL, SRC_MMPP = 0, 1, 2
RULE_FRACTIONAL, RULE_INTEGER = 0, 1
MIN_BUFFER = 8


@numba.njit(cache=True)
def _less(ht, hk, hs, a, b):
    if ht[a] != ht[b]:
        return ht[a] < ht[b]
    if hk[a] != hk[b]:
        return hk[a] < hk[b]
    return hs[a] < hs[b]


@numba.njit(cache=True)
def _swap(ht, hk, ho, hs, a, b):
    ht[a], ht[b] = ht[b], ht[a]
    hk[a], hk[b] = hk[b], hk[a]
    ho[a], ho[b] = ho[b], ho[a]
    hs[a], hs[b] = hs[b], hs[a]


@numba.njit(cache=True)
def heap_push(ht, hk, ho, hs, meta, t, k, o):
    # meta: [size, next sequence number]
    n = meta[0]
    if n >= ht.shape[0]:
        return False
    ht[n] = t
    hk[n] = k
    ho[n] = o
    hs[n] = meta[1]
    meta[1] += 1
    meta[0] = n + 1
    while n > 0:
        parent = (n - 1) // 2
        if _less(ht, hk, hs, n, parent):
            _swap(ht, hk, ho, hs, n, parent)
            n = parent
        else:
            break
    return True


@numba.njit(cache=True)
def heap_pop(ht, hk, ho, hs, meta):
    n = meta[0] - 1
    _swap(ht, hk, ho, hs, 0, n)
    meta[0] = n
    i = 0
    while True:
        left = 2 * i + 1
        if left >= n:
            break
        best = left
        right = left + 1
        if right < n and _less(ht, hk, hs, right, left):
            best = right
        if _less(ht, hk, hs, best, i):
            _swap(ht, hk, ho, hs, best, i)
            i = best
        else:
            break
    return ht[n], hk[n], ho[n]


@numba.njit(cache=True)
def _draw(buf, ptr, s):
    u = buf[s, ptr[s]]
    ptr[s] += 1
    return u


@numba.njit(cache=True)
def _sample(kind, a, b, buf, ptr, s):
    if kind == 0:
        return exp_transform(a, _draw(buf, ptr, s))
    u1 = _draw(buf, ptr, s)
    u2 = _draw(buf, ptr, s)
    u3 = _draw(buf, ptr, s)
    return coxian_transform(a, b, u1, u2, u3)


@numba.njit(cache=True)
def _interarrival(s, src_kind, src_par, src_state, buf, ptr):
    # src_par columns: [rate or dist a, dist b, dist kind, r0, r1, r2, switch, peak]
    if src_kind[s] == SRC_POISSON:
        return exp_transform(src_par[s, 0], _draw(buf, ptr, s))
    if src_kind[s] == SRC_RENEWAL:
        return _sample(int(src_par[s, 2]), src_par[s, 0], src_par[s, 1], buf, ptr, s)
    return exp_transform(src_par[s, 7], _draw(buf, ptr, s))


@numba.njit(cache=True)
def _admit(r, i, t, route, pair_off, svc, cap_floor, cap_frac, rule, occ,
           arr_p, blk_p, arr_l, blk_l, slot_r, slot_i, free, fmeta,
           ht, hk, ho, hs, hmeta, buf, ptr, n_src):
    l = route[r, i]
    p = pair_off[r] + i
    arr_p[p] += 1
    arr_l[l] += 1
    n = occ[l]
    s = n_src + l
    ok = False
    if rule == RULE_INTEGER:
        ok = n < cap_floor[l]
    elif n < cap_floor[l]:
        ok = True
    elif n == cap_floor[l] and cap_frac[l] > 0.0:
        ok = _draw(buf, ptr, s) < cap_frac[l]
    if not ok:
        blk_p[p] += 1
        blk_l[l] += 1
        return True
    occ[l] += 1
    dur = _sample(int(svc[p, 0]), svc[p, 1], svc[p, 2], buf, ptr, s)
    fmeta[0] -= 1
    slot = free[fmeta[0]]
    slot_r[slot] = r
    slot_i[slot] = i
    return heap_push(ht, hk, ho, hs, hmeta, t + dur, DEP, slot)


@numba.njit(cache=True)
def advance(t_end, clock, occ, area, route, route_len, pair_off, svc, cap_floor, cap_frac, rule,
            src_kind, src_par, src_cls, src_cum, src_ncls, src_state,
            slot_r, slot_i, free, fmeta, ht, hk, ho, hs, hmeta, buf, ptr,
            arr_p, blk_p, arr_l, blk_l):
    """Run events up to ``t_end``. Returns 0 at the horizon, 1 to request a refill, 2 on overflow."""
    n_src = src_kind.shape[0]
    n_streams = buf.shape[0]
    width = buf.shape[1]
    L = occ.shape[0]
    while True:
        if hmeta[0] == 0 or ht[0] > t_end:
            for l in range(L):
                area[l] += occ[l] * (t_end - clock[0])
            clock[0] = t_end
            return 0
        for s in range(n_streams):
            if width - ptr[s] < MIN_BUFFER:
                return 1
        te, kind, obj = heap_pop(ht, hk, ho, hs, hmeta)
        for l in range(L):
            area[l] += occ[l] * (te - clock[0])
        clock[0] = te
        ok = True
        if kind == DEP:
            r = slot_r[obj]
            i = slot_i[obj]
            occ[route[r, i]] -= 1
            free[fmeta[0]] = obj
            fmeta[0] += 1
            if i + 1 < route_len[r]:
                ok = _admit(r, i + 1, te, route, pair_off, svc, cap_floor, cap_frac, rule, occ,
                            arr_p, blk_p, arr_l, blk_l, slot_r, slot_i, free, fmeta,
                            ht, hk, ho, hs, hmeta, buf, ptr, n_src)
        elif kind == ARR:
            s = obj
            accept = True
            if src_kind[s] == SRC_MMPP:
                rate = src_par[s, 3 + src_state[s]]
                accept = _draw(buf, ptr, s) * src_par[s, 7] < rate
            if accept:
                c = 0
                if src_ncls[s] > 1:
                    u = _draw(buf, ptr, s)
                    while c < src_ncls[s] - 1 and u >= src_cum[s, c]:
                        c += 1
                ok = _admit(src_cls[s, c], 0, te, route, pair_off, svc, cap_floor, cap_frac, rule, occ,
                            arr_p, blk_p, arr_l, blk_l, slot_r, slot_i, free, fmeta,
                            ht, hk, ho, hs, hmeta, buf, ptr, n_src)
            dt = _interarrival(s, src_kind, src_par, src_state, buf, ptr)
            ok = heap_push(ht, hk, ho, hs, hmeta, te + dt, ARR, s) and ok
        else:
            s = obj
            step = 1 if _draw(buf, ptr, s) < 0.5 else 2
            src_state[s] = (src_state[s] + step) % 3
            dt = exp_transform(src_par[s, 6], _draw(buf, ptr, s))
            ok = heap_push(ht, hk, ho, hs, hmeta, te + dt, SW, s)
        if not ok:
            return 2
