# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels mirroring ``_pycore`` statement by statement."""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, atanh, exp, log1p, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset
from libc.stdint cimport uint8_t, uint64_t, int64_t

cnp.import_array()

DEF TANH_CLAMP = 1.0 - 1e-15

cdef enum:
    MODE_SCS = 0
    MODE_SEQ = 1
    OUTCOME_DECODED = 0
    OUTCOME_CRC_PASS = 1
    OUTCOME_CRC_FAIL = 2
    OUTCOME_EXHAUSTED = 3


def sphere_search(double[:, ::1] R, double[::1] z, double[::1] levels):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t nl = levels.shape[0]
    cdef Py_ssize_t i, j, a, b, q
    cdef double acc, c, diff, dist, best = INFINITY
    cdef int64_t[::1] s = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] best_s = np.zeros(n, dtype=np.int64)
    cdef double[::1] pd = np.zeros(n + 1)
    cdef double[::1] center = np.zeros(n)
    cdef int64_t[:, ::1] order = np.zeros((n, nl), dtype=np.int64)
    cdef int64_t[::1] pos = np.zeros(n, dtype=np.int64)
    cdef double[::1] dd = np.zeros(nl)

    i = n - 1
    _setup(i, n, nl, R, z, levels, s, center, order, pos, dd)
    while True:
        if pos[i] < nl:
            q = order[i, pos[i]]
            pos[i] += 1
            diff = R[i, i] * (center[i] - levels[q])
            dist = pd[i + 1] + diff * diff
            if dist < best:
                s[i] = q
                if i == 0:
                    best = dist
                    best_s[:] = s
                    i += 1
                    if i == n:
                        break
                else:
                    pd[i] = dist
                    i -= 1
                    _setup(i, n, nl, R, z, levels, s, center, order, pos, dd)
                continue
        i += 1
        if i == n:
            break
    return np.asarray(best_s)


cdef inline void _setup(Py_ssize_t i, Py_ssize_t n, Py_ssize_t nl, double[:, ::1] R,
                        double[::1] z, double[::1] lev, int64_t[::1] s, double[::1] center,
                        int64_t[:, ::1] order, int64_t[::1] pos, double[::1] dist) noexcept:
    cdef double acc = z[i]
    cdef double c
    cdef Py_ssize_t j, a, b, q
    for j in range(i + 1, n):
        acc -= R[i, j] * lev[s[j]]
    c = acc / R[i, i]
    center[i] = c
    for q in range(nl):
        dist[q] = c - lev[q] if c >= lev[q] else lev[q] - c
        order[i, q] = q
    for a in range(1, nl):
        q = order[i, a]
        b = a - 1
        while b >= 0 and dist[order[i, b]] > dist[q]:
            order[i, b + 1] = order[i, b]
            b -= 1
        order[i, b + 1] = q
    pos[i] = 0


# ---------------------------------------------------------------------------
# polar decoding

cdef struct Flops:
    int64_t add
    int64_t cmp
    int64_t mul


cdef inline int _ctz(int i) noexcept:
    cdef int c = 0
    while (i & 1) == 0:
        i >>= 1
        c += 1
    return c


cdef inline double _f_exact(double a, double b, Flops* fl) noexcept:
    cdef double t = tanh(a * 0.5) * tanh(b * 0.5)
    fl.mul += 3
    fl.cmp += 2
    if t > TANH_CLAMP:
        t = TANH_CLAMP
    elif t < -TANH_CLAMP:
        t = -TANH_CLAMP
    fl.mul += 1
    return 2.0 * atanh(t)


cdef inline double _f_minsum(double a, double b, Flops* fl) noexcept:
    cdef double aa, bb, m
    fl.cmp += 3
    aa = a if a >= 0.0 else -a
    bb = b if b >= 0.0 else -b
    m = aa if aa <= bb else bb
    if (a < 0.0) != (b < 0.0):
        return -m
    return m


cdef inline double _g(double a, double b, uint8_t u, Flops* fl) noexcept:
    fl.add += 1
    if u:
        return b - a
    return b + a


cdef double _update_alpha(double* alpha, uint8_t* betal, const double* llr, int i, int n,
                          bint exact, Flops* fl) noexcept:
    cdef int top, gl, s, half, o, j
    cdef const double* par
    if i == 0:
        top = n - 1
        gl = -1
    else:
        top = _ctz(i)
        gl = top
    s = top
    while s >= 0:
        half = 1 << s
        if s + 1 == n:
            par = llr
        else:
            par = alpha + (1 << (s + 1))
        o = half
        if s == gl:
            for j in range(half):
                alpha[o + j] = _g(par[j], par[j + half], betal[o + j], fl)
        elif exact:
            for j in range(half):
                alpha[o + j] = _f_exact(par[j], par[j + half], fl)
        else:
            for j in range(half):
                alpha[o + j] = _f_minsum(par[j], par[j + half], fl)
        s -= 1
    return alpha[1]


cdef void _update_beta(uint8_t* betal, int i, uint8_t ui, int n, uint8_t* cur,
                       uint8_t* tmp) noexcept:
    cdef int s = 0, half, j
    cur[0] = ui
    while s < n and ((i >> s) & 1):
        half = 1 << s
        for j in range(half):
            tmp[j] = betal[half + j] ^ cur[j]
        for j in range(half):
            tmp[half + j] = cur[j]
        memcpy(cur, tmp, 2 * half)
        s += 1
    if s < n:
        half = 1 << s
        memcpy(betal + half, cur, half)


cdef inline double _softplus_penalty(double x, Flops* fl) noexcept:
    fl.cmp += 1
    if x >= 0.0:
        fl.add += 1
        return log1p(exp(-x))
    fl.add += 2
    return -x + log1p(exp(x))


def sc_decode(double[::1] llr, const uint8_t[::1] frozen):
    cdef int eta = llr.shape[0]
    cdef int n = 0
    while (1 << n) < eta:
        n += 1
    cdef double[::1] alpha = np.zeros(eta)
    cdef uint8_t[::1] betal = np.zeros(eta, dtype=np.uint8)
    cdef uint8_t[::1] u = np.zeros(eta, dtype=np.uint8)
    cdef uint8_t[::1] cur = np.zeros(eta, dtype=np.uint8)
    cdef uint8_t[::1] tmp = np.zeros(eta, dtype=np.uint8)
    cdef Flops fl
    fl.add = 0
    fl.cmp = 0
    fl.mul = 0
    cdef int i
    cdef uint8_t ui
    cdef double lam
    for i in range(eta):
        lam = _update_alpha(&alpha[0], &betal[0], &llr[0], i, n, True, &fl)
        if frozen[i]:
            ui = 0
        else:
            fl.cmp += 1
            ui = 1 if lam < 0.0 else 0
        u[i] = ui
        _update_beta(&betal[0], i, ui, n, &cur[0], &tmp[0])
    return np.asarray(u), [fl.add, fl.cmp, fl.mul]


cdef uint64_t _crc_remainder(const uint8_t* u, const int64_t* pos, int npos,
                             uint64_t poly_low, int width) noexcept:
    cdef uint64_t reg = 0, top
    cdef uint64_t mask = ((<uint64_t>1) << width) - 1
    cdef int j
    for j in range(npos):
        top = (reg >> (width - 1)) & 1
        reg = ((reg << 1) & mask) | u[pos[j]]
        if top:
            reg ^= poly_low
    return reg


def crc_remainder(bits, poly_low, width):
    cdef uint8_t[::1] b = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef int64_t[::1] p = np.arange(b.shape[0], dtype=np.int64)
    if b.shape[0] == 0:
        return 0
    return int(_crc_remainder(&b[0], &p[0], b.shape[0], poly_low, width))


cdef struct Pool:
    int eta
    double* alpha
    uint8_t* betal
    uint8_t* u
    int* length
    double* score
    double* metric
    int* free_slots
    int nfree


cdef inline bint _better(Pool* P, int a, int b) noexcept:
    cdef int j
    cdef uint8_t* ua
    cdef uint8_t* ub
    if P.score[a] != P.score[b]:
        return P.score[a] > P.score[b]
    if P.length[a] != P.length[b]:
        return P.length[a] > P.length[b]
    ua = P.u + <Py_ssize_t>a * P.eta
    ub = P.u + <Py_ssize_t>b * P.eta
    for j in range(P.length[a]):
        if ua[j] != ub[j]:
            return ua[j] < ub[j]
    return False


cdef inline void _swap(int* h, int i, int j) noexcept:
    cdef int t = h[i]
    h[i] = h[j]
    h[j] = t


cdef void _up(Pool* P, int* h, int k) noexcept:
    cdef int p
    while k > 0:
        p = (k - 1) >> 1
        if _better(P, h[k], h[p]):
            _swap(h, k, p)
            k = p
        else:
            break


cdef void _down(Pool* P, int* h, int n, int k) noexcept:
    cdef int lft, r, best
    while True:
        lft = 2 * k + 1
        best = k
        if lft < n and _better(P, h[lft], h[best]):
            best = lft
        r = lft + 1
        if r < n and _better(P, h[r], h[best]):
            best = r
        if best == k:
            break
        _swap(h, k, best)
        k = best


cdef inline int _alloc(Pool* P) noexcept:
    P.nfree -= 1
    return P.free_slots[P.nfree]


cdef inline void _release(Pool* P, int slot) noexcept:
    P.free_slots[P.nfree] = slot
    P.nfree += 1


cdef void _copy_slot(Pool* P, int dst, int src) noexcept:
    cdef Py_ssize_t e = P.eta
    memcpy(P.alpha + dst * e, P.alpha + src * e, e * sizeof(double))
    memcpy(P.betal + dst * e, P.betal + src * e, e)
    memcpy(P.u + dst * e, P.u + src * e, e)
    P.length[dst] = P.length[src]
    P.metric[dst] = P.metric[src]
    P.score[dst] = P.score[src]


def stack_decode(double[::1] llr, const uint8_t[::1] frozen, double[::1] log_bias,
                 int list_size, int mode, uint64_t crc_poly_low=0, int crc_width=0,
                 info_positions=None):
    cdef int eta = llr.shape[0]
    cdef int n = 0
    while (1 << n) < eta:
        n += 1
    cdef bint exact = mode == MODE_SCS
    cdef int capacity = list_size * eta
    cdef int nslots = capacity + 2
    cdef Pool P
    cdef Flops fl
    fl.add = 0
    fl.cmp = 0
    fl.mul = 0
    cdef int64_t[::1] info
    if info_positions is None:
        info = np.zeros(1, dtype=np.int64)
    else:
        info = np.ascontiguousarray(info_positions, dtype=np.int64)
        if info.shape[0] == 0:
            info = np.zeros(1, dtype=np.int64)
    cdef int ninfo = 0 if info_positions is None else len(info_positions)

    P.eta = eta
    P.alpha = <double*>malloc(<size_t>nslots * eta * sizeof(double))
    P.betal = <uint8_t*>malloc(<size_t>nslots * eta)
    P.u = <uint8_t*>malloc(<size_t>nslots * eta)
    P.length = <int*>malloc(nslots * sizeof(int))
    P.score = <double*>malloc(nslots * sizeof(double))
    P.metric = <double*>malloc(nslots * sizeof(double))
    P.free_slots = <int*>malloc(nslots * sizeof(int))
    cdef int* heap = <int*>malloc(nslots * sizeof(int))
    cdef int* counts = <int*>malloc((eta + 1) * sizeof(int))
    cdef uint8_t* cur = <uint8_t*>malloc(eta)
    cdef uint8_t* tmp = <uint8_t*>malloc(eta)
    cdef int hn = 0
    cdef int k, j, w, slot, twin, i, c, nchild, L, kept
    cdef int children[2]
    cdef uint8_t uis[2]
    cdef int64_t pops = 0
    cdef int failed = -1
    cdef int outcome = OUTCOME_EXHAUSTED
    cdef double lam, x, pm
    cdef uint8_t ui
    cdef bint drop
    result = None

    try:
        for k in range(nslots):
            P.free_slots[k] = nslots - 1 - k
        P.nfree = nslots
        memset(counts, 0, (eta + 1) * sizeof(int))

        slot = _alloc(&P)
        memset(P.alpha + <Py_ssize_t>slot * eta, 0, eta * sizeof(double))
        memset(P.betal + <Py_ssize_t>slot * eta, 0, eta)
        memset(P.u + <Py_ssize_t>slot * eta, 0, eta)
        P.length[slot] = 0
        P.metric[slot] = 0.0
        P.score[slot] = log_bias[0] if mode == MODE_SEQ else 0.0
        heap[0] = slot
        hn = 1

        while hn > 0:
            # pop
            slot = heap[0]
            hn -= 1
            if hn > 0:
                heap[0] = heap[hn]
                _down(&P, heap, hn, 0)
            i = P.length[slot]
            if i == eta:
                if crc_width == 0:
                    outcome = OUTCOME_DECODED
                    result = np.asarray(<uint8_t[:eta]>(P.u + <Py_ssize_t>slot * eta)).copy()
                    break
                if _crc_remainder(P.u + <Py_ssize_t>slot * eta, &info[0], ninfo,
                                  crc_poly_low, crc_width) == 0:
                    outcome = OUTCOME_CRC_PASS
                    result = np.asarray(<uint8_t[:eta]>(P.u + <Py_ssize_t>slot * eta)).copy()
                    break
                if failed < 0:
                    failed = slot
                else:
                    _release(&P, slot)
                continue
            pops += 1
            lam = _update_alpha(P.alpha + <Py_ssize_t>slot * eta, P.betal + <Py_ssize_t>slot * eta,
                                &llr[0], i, n, exact, &fl)
            children[0] = slot
            uis[0] = 0
            nchild = 1
            if not frozen[i]:
                twin = _alloc(&P)
                _copy_slot(&P, twin, slot)
                children[1] = twin
                uis[1] = 1
                nchild = 2
            pm = P.metric[slot]
            for c in range(nchild):
                k = children[c]
                ui = uis[c]
                P.u[<Py_ssize_t>k * eta + i] = ui
                _update_beta(P.betal + <Py_ssize_t>k * eta, i, ui, n, cur, tmp)
                P.length[k] = i + 1
                x = lam if ui == 0 else -lam
                if exact:
                    P.metric[k] = pm - _softplus_penalty(x, &fl)
                    P.score[k] = P.metric[k]
                else:
                    fl.cmp += 1
                    if x < 0.0:
                        fl.add += 1
                        P.metric[k] = pm + x
                    else:
                        P.metric[k] = pm
                    fl.add += 1
                    P.score[k] = P.metric[k] + log_bias[i + 1]
            for c in range(nchild):
                k = children[c]
                L = P.length[k]
                counts[L] += 1
                if counts[L] == list_size:
                    kept = 0
                    for j in range(hn):
                        if P.length[heap[j]] >= L:
                            heap[kept] = heap[j]
                            kept += 1
                        else:
                            _release(&P, heap[j])
                    if kept != hn:
                        hn = kept
                        j = hn // 2 - 1
                        while j >= 0:
                            _down(&P, heap, hn, j)
                            j -= 1
                drop = False
                if hn >= capacity:
                    w = hn // 2
                    for j in range(hn // 2 + 1, hn):
                        if _better(&P, heap[w], heap[j]):
                            w = j
                    if not _better(&P, k, heap[w]):
                        drop = True
                    else:
                        _release(&P, heap[w])
                        hn -= 1
                        if w < hn:
                            heap[w] = heap[hn]
                            _down(&P, heap, hn, w)
                            _up(&P, heap, w)
                if drop:
                    _release(&P, k)
                else:
                    heap[hn] = k
                    hn += 1
                    _up(&P, heap, hn - 1)

        if result is None:
            if failed >= 0:
                outcome = OUTCOME_CRC_FAIL
                result = np.asarray(<uint8_t[:eta]>(P.u + <Py_ssize_t>failed * eta)).copy()
            else:
                outcome = OUTCOME_EXHAUSTED
                result = np.zeros(eta, dtype=np.uint8)
    finally:
        free(P.alpha)
        free(P.betal)
        free(P.u)
        free(P.length)
        free(P.score)
        free(P.metric)
        free(P.free_slots)
        free(heap)
        free(counts)
        free(cur)
        free(tmp)
    return result, int(pops), [fl.add, fl.cmp, fl.mul], outcome
