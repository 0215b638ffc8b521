"""Compiled engines for the built-in problems.

The kernels keep the fitness of the current point up to date flip by flip
(O(1) for unitation functions) and replay the reference operators' random
draws in the same order, so a kernel run and a reference run with the same
seed produce identical records.

Per-problem state lives in an int64 vector ``st``:

* unitation functions: ``st[0]`` ones count
* LeadingOnes: ``st[0]`` current prefix length
* HiddenPath: ``st[0]`` zeros count, ``st[1]`` zeros among the last five bits
* vertex cover (nodes): ``st[0]`` cover size, ``st[1]`` uncovered edges
* vertex cover (edges): ``st[0]`` covered vertices, ``st[1]`` uncovered edges,
  ``st[2]`` sum of c(c-1) over vertices, ``st[8 + v]`` selected edges at v
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .core import _fill_bits, exp1, next_double, randbelow
from .distributions import _sample_cdf
from .operators import (OP_PLAIN, OP_RLS, OP_SBM, OP_SIZE, OP_SIZE_RATE, OP_WALK,
                        _sample_sbm, _sample_subset)
from .problems import (K_CLIFF, K_CONST, K_HIDDENPATH, K_JUMP, K_LEADINGONES, K_ONEMAX,
                       K_PARTITION, K_TRAP, K_VC_EDGE, K_VC_NODE)

# tracker slots
T_COUNT, T_BUDGET, T_STOP, T_SUCCESS, T_HIT, T_GENS = range(6)
STOP_TARGET, STOP_BUDGET = 1, 2
# hot helpers never allocate; they are inlined and compiled without reference
# counting, which otherwise dominates the cost of a single flip
NO_BUDGET = 2**62


def state_len(kp) -> int:
    if kp.kind == K_VC_EDGE:
        return 8 + int(kp.ip[2])
    return 8


# ---------------------------------------------------------------------------
# incremental problem evaluation
# ---------------------------------------------------------------------------


@njit(cache=True, _nrt=False)
def ev_init(kp, x, st):
    n = kp.n
    for j in range(st.shape[0]):
        st[j] = 0
    k = kp.kind
    if k == K_LEADINGONES:
        i = 0
        while i < n and x[i] == 1:
            i += 1
        st[0] = i
    elif k == K_HIDDENPATH:
        z = 0
        for i in range(n):
            if x[i] == 0:
                z += 1
        st[0] = z
        t = 0
        for i in range(n - 5, n):
            if x[i] == 0:
                t += 1
        st[1] = t
    elif k == K_VC_NODE:
        s = 0
        for i in range(n):
            s += x[i]
        st[0] = s
        u = 0
        for e in range(kp.eu.shape[0]):
            if x[kp.eu[e]] == 0 and x[kp.ev[e]] == 0:
                u += 1
        st[1] = u
    elif k == K_VC_EDGE:
        nv = kp.ip[2]
        for e in range(n):
            if x[e] == 1:
                st[8 + kp.eu[e]] += 1
                st[8 + kp.ev[e]] += 1
        c = 0
        p = 0
        for v in range(nv):
            cv = st[8 + v]
            if cv > 0:
                c += 1
            p += cv * (cv - 1)
        st[0] = c
        st[2] = p
        u = 0
        for e in range(n):
            if st[8 + kp.eu[e]] == 0 and st[8 + kp.ev[e]] == 0:
                u += 1
        st[1] = u
    elif k != K_PARTITION and k != K_CONST:
        s = 0
        for i in range(n):
            s += x[i]
        st[0] = s


@njit(cache=True, _nrt=False, inline="always")
def _vc_edge_touch(kp, st, v, delta):
    # selected-edge count at vertex v changes by delta (+1 or -1)
    base = 8
    old = st[base + v]
    new = old + delta
    st[base + v] = new
    st[2] += new * (new - 1) - old * (old - 1)
    if old == 0 and new == 1:
        st[0] += 1
        for a in range(kp.adj_ptr[v], kp.adj_ptr[v + 1]):
            if st[base + kp.adj_nbr[a]] == 0:
                st[1] -= 1
    elif old == 1 and new == 0:
        st[0] -= 1
        for a in range(kp.adj_ptr[v], kp.adj_ptr[v + 1]):
            if st[base + kp.adj_nbr[a]] == 0:
                st[1] += 1


@njit(cache=True, _nrt=False, inline="always")
def flip(kp, x, st, i):
    """Toggle bit i and update the incremental state."""
    x[i] ^= 1
    b = x[i]
    k = kp.kind
    if k == K_LEADINGONES:
        lo = st[0]
        if i < lo:
            st[0] = i
        elif i == lo:
            n = kp.n
            j = lo
            while j < n and x[j] == 1:
                j += 1
            st[0] = j
    elif k == K_HIDDENPATH:
        d = 1 if b == 0 else -1
        st[0] += d
        if i >= kp.n - 5:
            st[1] += d
    elif k == K_VC_NODE:
        if b == 1:
            st[0] += 1
            for a in range(kp.adj_ptr[i], kp.adj_ptr[i + 1]):
                if x[kp.adj_nbr[a]] == 0:
                    st[1] -= 1
        else:
            st[0] -= 1
            for a in range(kp.adj_ptr[i], kp.adj_ptr[i + 1]):
                if x[kp.adj_nbr[a]] == 0:
                    st[1] += 1
    elif k == K_VC_EDGE:
        d = 1 if b == 1 else -1
        _vc_edge_touch(kp, st, kp.eu[i], d)
        _vc_edge_touch(kp, st, kp.ev[i], d)
    elif k != K_PARTITION and k != K_CONST:
        st[0] += 1 if b == 1 else -1


@njit(cache=True, _nrt=False, inline="always")
def _on_path(kp, x, zeros):
    lg = kp.ip[1]
    n = kp.n
    if zeros < 5 or zeros > lg + 1:
        return False
    for i in range(n - zeros, n):
        if x[i] == 1:
            return False
    return True


@njit(cache=True, _nrt=False, inline="always")
def ev_value(kp, x, st):
    k = kp.kind
    n = kp.n
    if k == K_ONEMAX:
        return float(st[0])
    if k == K_LEADINGONES:
        return float(st[0])
    if k == K_TRAP:
        if st[0] == 0:
            return float(n + 1)
        return float(st[0])
    if k == K_JUMP:
        d = kp.ip[0]
        ones = st[0]
        if ones <= n - d or ones == n:
            return float(d + ones)
        return float(n - ones)
    if k == K_CLIFF:
        d = kp.ip[0]
        ones = st[0]
        if ones <= n - d:
            return float(ones)
        return ones - d + 0.5
    if k == K_HIDDENPATH:
        eps = kp.fp[0]
        lg = kp.ip[1]
        zeros = st[0]
        on_path = _on_path(kp, x, zeros)
        if zeros == 5 and not on_path:
            return n - eps + st[1] / n
        if zeros < 5 or zeros == n:
            return 0.0
        if on_path:
            return n - eps + eps * zeros / lg
        if zeros == n - 1:
            return float(n)
        return float(zeros)
    if k == K_PARTITION:
        l1 = 0.0
        l0 = 0.0
        for i in range(n):
            if x[i]:
                l1 += kp.w[i]
            else:
                l0 += kp.w[i]
        return l1 if l1 >= l0 else l0
    if k == K_VC_NODE:
        return float(st[0] + n * 2 * st[1])
    if k == K_VC_EDGE:
        nv = kp.ip[2]
        m = kp.ip[3]
        return float(st[0] + nv * 2 * st[1] + (nv + 1) * (m + 1) * st[2])
    return kp.fp[0]


@njit(cache=True, _nrt=False, inline="always")
def ev_target(kp, x, st, f):
    k = kp.kind
    n = kp.n
    if k == K_ONEMAX or k == K_LEADINGONES or k == K_JUMP or k == K_CLIFF:
        return st[0] == n
    if k == K_TRAP:
        return st[0] == 0
    if k == K_HIDDENPATH:
        z = st[0]
        return z == kp.ip[1] + 1 and _on_path(kp, x, z)
    if k == K_PARTITION:
        return f <= kp.fp[0]
    if k == K_VC_NODE:
        return st[1] == 0
    if k == K_VC_EDGE:
        return st[1] == 0 and st[2] == 0
    return False


@njit(cache=True, _nrt=False, inline="always")
def evaluate(kp, x, st, trk, best):
    """Charge one evaluation, track the best point and the target."""
    if trk[T_COUNT] >= trk[T_BUDGET]:
        trk[T_STOP] = STOP_BUDGET
        return 0.0
    f = ev_value(kp, x, st)
    trk[T_COUNT] += 1
    g = kp.sign * f
    if g > best[0]:
        best[0] = g
        best[1] = f
        trk[T_HIT] = trk[T_COUNT]
    if ev_target(kp, x, st, f):
        trk[T_SUCCESS] = 1
        trk[T_STOP] = STOP_TARGET
    return f


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


@njit(cache=True, _nrt=False, inline="always")
def mutate(kp, op, x, st, parent_g, flips, mark, state, trk, best, res):
    """Apply the operator in place.

    Flipped positions end up in ``flips[:res[0]]``; ``res`` = (flips, evals,
    improved, evaluated).  Returns the offspring's raw fitness.
    """
    n = kp.n
    code = op.code
    if code == OP_WALK:
        hz = op.hazard
        nxt = op.next_certain
        for j in range(n):
            flips[j] = j
        step = 0
        evals = 0
        f_last = 0.0
        while True:
            nc = nxt[step]
            if nc == step + 1:
                k = nc
            else:
                t = hz[step] + exp1(state)
                k = np.searchsorted(hz, t)
                if k < step + 1:
                    k = step + 1
                if k > nc:
                    k = nc
            if k > n:
                break
            for j in range(step, k):
                r = j + randbelow(state, n - j)
                tmp = flips[j]
                flips[j] = flips[r]
                flips[r] = tmp
                flip(kp, x, st, flips[j])
            step = k
            f = evaluate(kp, x, st, trk, best)
            if trk[T_STOP] == STOP_BUDGET:
                break
            evals += 1
            f_last = f
            if kp.sign * f > parent_g:
                res[0] = step
                res[1] = evals
                res[2] = 1
                res[3] = 1
                return f
            if trk[T_STOP] != 0:
                break
        res[0] = step
        res[1] = evals
        res[2] = 0
        res[3] = 1 if evals > 0 else 0
        return f_last
    if code == OP_SIZE:
        kk = _sample_cdf(state, op.cdf, op.offset)
        c = _sample_subset(state, n, kk, mark, flips)
    elif code == OP_SIZE_RATE:
        chi = _sample_cdf(state, op.cdf, op.offset)
        c = _sample_sbm(state, n, chi / n, flips)
    elif code == OP_SBM:
        c = _sample_sbm(state, n, op.rate, flips)
    elif code == OP_RLS:
        flips[0] = randbelow(state, n)
        c = 1
    else:
        for i in range(n):
            flips[i] = i
        c = n
    for j in range(c):
        flip(kp, x, st, flips[j])
    res[0] = c
    f = evaluate(kp, x, st, trk, best)
    if trk[T_STOP] == STOP_BUDGET:
        res[1] = 0
        res[2] = 0
        res[3] = 0
        return f
    res[1] = 1
    res[2] = 1 if kp.sign * f > parent_g else 0
    res[3] = 1
    return f


# ---------------------------------------------------------------------------
# engines
#
# Each engine is an allocating wrapper around a main loop compiled without
# reference counting; the loop inlines ``mutate`` and the evaluators.
# ---------------------------------------------------------------------------


@njit(cache=True, _nrt=False)
def _copy(dst, src):
    for j in range(src.shape[0]):
        dst[j] = src[j]


@njit(cache=True)
def one_plus_one(kp, op, state, x0, budget, slen):
    """Elitist (1+1) loop; returns (trk, best)."""
    n = kp.n
    trk = np.zeros(6, dtype=np.int64)
    trk[T_BUDGET] = budget
    best = np.array([-np.inf, 0.0])
    x = np.empty(n, dtype=np.uint8)
    if x0.shape[0] == n:
        x[:] = x0
    else:
        _fill_bits(state, x)
    st = np.zeros(slen, dtype=np.int64)
    saved = np.zeros(slen, dtype=np.int64)
    flips = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.uint8)
    res = np.zeros(4, dtype=np.int64)
    _one_plus_one_loop(kp, op, state, x, st, saved, flips, mark, res, trk, best)
    return trk, best


@njit(cache=True, _nrt=False)
def _one_plus_one_loop(kp, op, state, x, st, saved, flips, mark, res, trk, best):
    ev_init(kp, x, st)
    fx = evaluate(kp, x, st, trk, best)
    if trk[T_STOP] != 0:
        return
    gx = kp.sign * fx
    while True:
        trk[T_GENS] += 1
        _copy(saved, st)
        f = mutate(kp, op, x, st, gx, flips, mark, state, trk, best, res)
        if trk[T_STOP] != 0:
            return
        if res[3] == 1 and kp.sign * f >= gx:
            gx = kp.sign * f
        else:
            for j in range(res[0]):
                x[flips[j]] ^= 1
            _copy(st, saved)


@njit(cache=True)
def opt_ia(kp, op, state, mu, dup, tau, p_die, budget, slen):
    """Opt-IA with cloning, hypermutation and hybrid ageing; returns (trk, best)."""
    n = kp.n
    cap = mu * (dup + 1)
    trk = np.zeros(6, dtype=np.int64)
    trk[T_BUDGET] = budget
    best = np.array([-np.inf, 0.0])
    X = np.zeros((cap, n), dtype=np.uint8)
    ST = np.zeros((cap, slen), dtype=np.int64)
    F = np.zeros(cap)
    AGE = np.zeros(cap, dtype=np.int64)
    X2 = np.zeros((cap, n), dtype=np.uint8)
    ST2 = np.zeros((cap, slen), dtype=np.int64)
    F2 = np.zeros(cap)
    AGE2 = np.zeros(cap, dtype=np.int64)
    keys = np.zeros(cap)
    order = np.zeros(cap, dtype=np.int64)
    flips = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.uint8)
    res = np.zeros(4, dtype=np.int64)
    _opt_ia_loop(kp, op, state, mu, dup, tau, p_die, X, ST, F, AGE, X2, ST2, F2, AGE2,
                 keys, order, flips, mark, res, trk, best)
    return trk, best


@njit(cache=True, _nrt=False, inline="always")
def _new_random(kp, state, x, st, trk, best):
    _fill_bits(state, x)
    ev_init(kp, x, st)
    return evaluate(kp, x, st, trk, best)


@njit(cache=True, _nrt=False)
def _opt_ia_loop(kp, op, state, mu, dup, tau, p_die, X, ST, F, AGE, X2, ST2, F2, AGE2,
                 keys, order, flips, mark, res, trk, best):
    sign = kp.sign
    for i in range(mu):
        F[i] = _new_random(kp, state, X[i], ST[i], trk, best)
        AGE[i] = 0
        if trk[T_STOP] != 0:
            return
    while True:
        trk[T_GENS] += 1
        for i in range(mu):
            AGE[i] += 1
        m = mu
        for i in range(mu):
            for c in range(dup):
                _copy(X[m], X[i])
                _copy(ST[m], ST[i])
                f = mutate(kp, op, X[m], ST[m], sign * F[i], flips, mark, state, trk, best, res)
                if trk[T_STOP] != 0:
                    return
                if res[3] == 1:
                    F[m] = f
                    AGE[m] = 0 if res[2] == 1 else AGE[i]
                else:
                    F[m] = F[i]
                    AGE[m] = AGE[i]
                m += 1
        # hybrid ageing in merged order, survivors compacted into the second buffer
        w = 0
        for j in range(m):
            if AGE[j] >= tau and next_double(state) < p_die:
                continue
            _copy(X2[w], X[j])
            _copy(ST2[w], ST[j])
            F2[w] = F[j]
            AGE2[w] = AGE[j]
            w += 1
        while w < mu:
            F2[w] = _new_random(kp, state, X2[w], ST2[w], trk, best)
            AGE2[w] = 0
            w += 1
            if trk[T_STOP] != 0:
                return
        if w > mu:
            # keep the mu best; ties broken by uniform keys drawn in merged order
            for j in range(w):
                keys[j] = next_double(state)
                order[j] = j
            for a in range(1, w):
                cur = order[a]
                b = a - 1
                while b >= 0 and _before(sign * F2[cur], keys[cur], sign * F2[order[b]], keys[order[b]]):
                    order[b + 1] = order[b]
                    b -= 1
                order[b + 1] = cur
        else:
            for j in range(w):
                order[j] = j
        for j in range(mu):
            src = order[j]
            _copy(X[j], X2[src])
            _copy(ST[j], ST2[src])
            F[j] = F2[src]
            AGE[j] = AGE2[src]


@njit(cache=True, _nrt=False, inline="always")
def _before(g1, k1, g2, k2):
    return g1 > g2 or (g1 == g2 and k1 < k2)


# ---------------------------------------------------------------------------
# batch helpers for Monte-Carlo checks
# ---------------------------------------------------------------------------


@njit(cache=True)
def repeat_mutation(kp, op, state, x0, calls, hist, slen):
    """Apply the operator ``calls`` times to ``x0`` (never accepting).

    Returns total evaluations; ``hist[d]`` counts offspring at distance d and
    ``hist[n + 1]`` counts calls that returned the unevaluated parent.
    """
    n = kp.n
    x = x0.copy()
    st = np.zeros(slen, dtype=np.int64)
    saved = np.zeros(slen, dtype=np.int64)
    trk = np.zeros(6, dtype=np.int64)
    trk[T_BUDGET] = NO_BUDGET
    best = np.array([np.inf, 0.0])  # never updated: nothing exceeds +inf
    flips = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.uint8)
    res = np.zeros(4, dtype=np.int64)
    return _repeat_loop(kp, op, state, x, st, saved, calls, hist, flips, mark, res, trk, best)


@njit(cache=True, _nrt=False)
def _repeat_loop(kp, op, state, x, st, saved, calls, hist, flips, mark, res, trk, best):
    n = kp.n
    ev_init(kp, x, st)
    _copy(saved, st)
    g0 = kp.sign * ev_value(kp, x, st)
    total = 0
    for _ in range(calls):
        trk[T_STOP] = 0
        mutate(kp, op, x, st, g0, flips, mark, state, trk, best, res)
        total += res[1]
        if res[3] == 0:
            hist[n + 1] += 1
        else:
            hist[res[0]] += 1
        for j in range(res[0]):
            x[flips[j]] ^= 1
        _copy(st, saved)
    return total


@njit(cache=True)
def ageing_survivors(state, m, p_die, trials, hist):
    """Survivor counts when ``m`` members all at age >= tau face ageing."""
    for _ in range(trials):
        s = 0
        for j in range(m):
            if not next_double(state) < p_die:
                s += 1
        hist[s] += 1
