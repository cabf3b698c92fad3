"""Pure-Python kernels. The compiled module ``_ccore`` mirrors these line by line.

Floating-point arithmetic is kept scalar (``math`` module) so both backends
produce bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np

MODE_SCS = 0
MODE_SEQ = 1

OUTCOME_DECODED = 0
OUTCOME_CRC_PASS = 1
OUTCOME_CRC_FAIL = 2
OUTCOME_EXHAUSTED = 3

# tanh products are kept strictly inside (-1, 1) so atanh stays finite
_TANH_CLAMP = 1.0 - 1e-15


def sphere_search(R, z, levels):
    """Depth-first Schnorr-Euchner search for ``argmin ||z - R s||^2``.

    ``R`` is upper triangular ``(n, n)``, ``levels`` the sorted real alphabet.
    Returns per-dimension level indices.
    """
    n = len(z)
    nl = len(levels)
    R = [[float(v) for v in row] for row in np.asarray(R)]
    z = [float(v) for v in z]
    lev = [float(v) for v in levels]
    s = [0] * n
    best_s = [0] * n
    pd = [0.0] * (n + 1)
    center = [0.0] * n
    order = [[0] * nl for _ in range(n)]
    pos = [0] * n
    best = math.inf

    def setup(i):
        acc = z[i]
        for j in range(i + 1, n):
            acc -= R[i][j] * lev[s[j]]
        c = acc / R[i][i]
        center[i] = c
        dist = [abs(c - lev[q]) for q in range(nl)]
        # stable insertion sort: equal distances keep the lower index first
        idx = list(range(nl))
        for a in range(1, nl):
            q = idx[a]
            b = a - 1
            while b >= 0 and dist[idx[b]] > dist[q]:
                idx[b + 1] = idx[b]
                b -= 1
            idx[b + 1] = q
        order[i] = idx
        pos[i] = 0

    i = n - 1
    setup(i)
    while True:
        if pos[i] < nl:
            q = order[i][pos[i]]
            pos[i] += 1
            diff = R[i][i] * (center[i] - lev[q])
            dist = pd[i + 1] + diff * diff
            if dist < best:
                s[i] = q
                if i == 0:
                    best = dist
                    best_s = s[:]
                    i += 1
                    if i == n:
                        break
                else:
                    pd[i] = dist
                    i -= 1
                    setup(i)
                continue
        i += 1
        if i == n:
            break
    return np.asarray(best_s, dtype=np.int64)


# ---------------------------------------------------------------------------
# polar decoding


def _ctz(i):
    return (i & -i).bit_length() - 1


def _f_exact(a, b, fl):
    # box-plus via the tanh rule
    t = math.tanh(a * 0.5) * math.tanh(b * 0.5)
    fl[2] += 3
    fl[1] += 2
    if t > _TANH_CLAMP:
        t = _TANH_CLAMP
    elif t < -_TANH_CLAMP:
        t = -_TANH_CLAMP
    fl[2] += 1
    return 2.0 * math.atanh(t)


def _f_minsum(a, b, fl):
    fl[1] += 3
    aa = a if a >= 0.0 else -a
    bb = b if b >= 0.0 else -b
    m = aa if aa <= bb else bb
    if (a < 0.0) != (b < 0.0):
        return -m
    return m


def _g(a, b, u, fl):
    fl[0] += 1
    if u:
        return b - a
    return b + a


def _update_alpha(alpha, betal, llr, i, n, exact, fl):
    """Fill the LLR of bit ``i`` into ``alpha[1]`` (level 0)."""
    if i == 0:
        top = n - 1
        gl = -1
    else:
        top = _ctz(i)
        gl = top
    for s in range(top, -1, -1):
        half = 1 << s
        if s + 1 == n:
            par = llr
            po = 0
        else:
            par = alpha
            po = 1 << (s + 1)
        o = half
        if s == gl:
            for j in range(half):
                alpha[o + j] = _g(par[po + j], par[po + j + half], betal[o + j], fl)
        elif exact:
            for j in range(half):
                alpha[o + j] = _f_exact(par[po + j], par[po + j + half], fl)
        else:
            for j in range(half):
                alpha[o + j] = _f_minsum(par[po + j], par[po + j + half], fl)
    return alpha[1]


def _update_beta(betal, i, ui, n):
    cur = [ui]
    s = 0
    while s < n and (i >> s) & 1:
        half = 1 << s
        left = betal[half : 2 * half]
        cur = [left[j] ^ cur[j] for j in range(half)] + cur
        s += 1
    if s < n:
        half = 1 << s
        betal[half : 2 * half] = cur


def _softplus_penalty(x, fl):
    # log(1 + exp(-x))
    fl[1] += 1
    if x >= 0.0:
        fl[0] += 1
        return math.log1p(math.exp(-x))
    fl[0] += 2
    return -x + math.log1p(math.exp(x))


def sc_decode(llr, frozen):
    """Successive cancellation in tree order with exact check-node updates.

    Returns ``(u, flops)`` where flops is ``[add, cmp, mul]``.
    """
    eta = len(llr)
    n = eta.bit_length() - 1
    llr = [float(v) for v in llr]
    alpha = [0.0] * eta
    betal = [0] * eta
    u = [0] * eta
    fl = [0, 0, 0]
    for i in range(eta):
        lam = _update_alpha(alpha, betal, llr, i, n, True, fl)
        if frozen[i]:
            ui = 0
        else:
            fl[1] += 1
            ui = 1 if lam < 0.0 else 0
        u[i] = ui
        _update_beta(betal, i, ui, n)
    return np.asarray(u, dtype=np.uint8), fl


def crc_remainder(bits, poly_low, width):
    """Remainder of the bit sequence (MSB first) divided by ``x^width + poly_low``."""
    reg = 0
    mask = (1 << width) - 1
    for b in bits:
        top = (reg >> (width - 1)) & 1
        reg = ((reg << 1) & mask) | int(b)
        if top:
            reg ^= poly_low
    return reg


class _Path:
    __slots__ = ("alpha", "betal", "u", "length", "score", "metric")

    def __init__(self, alpha, betal, u, length, score, metric):
        self.alpha = alpha
        self.betal = betal
        self.u = u
        self.length = length
        self.score = score
        self.metric = metric


def _better(a, b):
    if a.score != b.score:
        return a.score > b.score
    if a.length != b.length:
        return a.length > b.length
    ua, ub = a.u, b.u
    for j in range(a.length):
        if ua[j] != ub[j]:
            return ua[j] < ub[j]
    return False


class _Heap:
    """Binary max-heap ordered by :func:`_better`."""

    def __init__(self):
        self.items = []

    def __len__(self):
        return len(self.items)

    def push(self, p):
        it = self.items
        it.append(p)
        self._up(len(it) - 1)

    def pop(self):
        it = self.items
        top = it[0]
        last = it.pop()
        if it:
            it[0] = last
            self._down(0)
        return top

    def remove_at(self, k):
        it = self.items
        last = it.pop()
        if k < len(it):
            it[k] = last
            self._down(k)
            self._up(k)

    def worst_index(self):
        it = self.items
        n = len(it)
        w = n // 2
        for k in range(n // 2 + 1, n):
            if _better(it[w], it[k]):
                w = k
        return w

    def rebuild(self):
        it = self.items
        for k in range(len(it) // 2 - 1, -1, -1):
            self._down(k)

    def _up(self, k):
        it = self.items
        while k > 0:
            p = (k - 1) >> 1
            if _better(it[k], it[p]):
                it[k], it[p] = it[p], it[k]
                k = p
            else:
                break

    def _down(self, k):
        it = self.items
        n = len(it)
        while True:
            lft = 2 * k + 1
            best = k
            if lft < n and _better(it[lft], it[best]):
                best = lft
            r = lft + 1
            if r < n and _better(it[r], it[best]):
                best = r
            if best == k:
                break
            it[k], it[best] = it[best], it[k]
            k = best


def stack_decode(llr, frozen, log_bias, list_size, mode, crc_poly_low=0, crc_width=0,
                 info_positions=None):
    """Best-first (stack) decoding over the polar code tree.

    ``mode`` selects the path score: ``MODE_SCS`` uses the exact path
    probability, ``MODE_SEQ`` the max-continuation score plus ``log_bias``
    indexed by path length. With ``crc_width > 0`` full paths failing the CRC
    over ``info_positions`` are discarded and the search continues.

    Returns ``(u, pops, flops, outcome)``.
    """
    eta = len(llr)
    n = eta.bit_length() - 1
    llr = [float(v) for v in llr]
    frozen = [int(v) for v in frozen]
    exact = mode == MODE_SCS
    bias = [float(v) for v in log_bias] if mode == MODE_SEQ else None
    capacity = list_size * eta
    fl = [0, 0, 0]
    counts = [0] * (eta + 1)
    heap = _Heap()
    root_score = bias[0] if bias is not None else 0.0
    heap.push(_Path([0.0] * eta, [0] * eta, [0] * eta, 0, root_score, 0.0))
    pops = 0
    failed = None
    info = list(info_positions) if info_positions is not None else []

    def insert(p):
        L = p.length
        counts[L] += 1
        if counts[L] == list_size:
            kept = [q for q in heap.items if q.length >= L]
            if len(kept) != len(heap.items):
                heap.items = kept
                heap.rebuild()
        if len(heap) >= capacity:
            w = heap.worst_index()
            if not _better(p, heap.items[w]):
                return
            heap.remove_at(w)
        heap.push(p)

    while len(heap):
        p = heap.pop()
        i = p.length
        if i == eta:
            if crc_width == 0:
                return np.asarray(p.u, dtype=np.uint8), pops, fl, OUTCOME_DECODED
            rem = crc_remainder([p.u[j] for j in info], crc_poly_low, crc_width)
            if rem == 0:
                return np.asarray(p.u, dtype=np.uint8), pops, fl, OUTCOME_CRC_PASS
            if failed is None:
                failed = p
            continue
        pops += 1
        lam = _update_alpha(p.alpha, p.betal, llr, i, n, exact, fl)
        if frozen[i]:
            children = [(p, 0)]
        else:
            twin = _Path(p.alpha[:], p.betal[:], p.u[:], i, 0.0, p.metric)
            children = [(p, 0), (twin, 1)]
        pm = p.metric
        for c, ui in children:
            c.u[i] = ui
            _update_beta(c.betal, i, ui, n)
            c.length = i + 1
            x = lam if ui == 0 else -lam
            if exact:
                c.metric = pm - _softplus_penalty(x, fl)
                c.score = c.metric
            else:
                fl[1] += 1
                if x < 0.0:
                    fl[0] += 1
                    c.metric = pm + x
                else:
                    c.metric = pm
                fl[0] += 1
                c.score = c.metric + bias[i + 1]
        for c, _ in children:
            insert(c)
    if failed is not None:
        return np.asarray(failed.u, dtype=np.uint8), pops, fl, OUTCOME_CRC_FAIL
    return np.zeros(eta, dtype=np.uint8), pops, fl, OUTCOME_EXHAUSTED
