"""Numba kernels for the Poisson-clock exclusion dynamics.

Every kernel drives one or more coupled states with the same per-edge clock
streams: each edge (x, x+1) carries an independent Poisson stream of rate
1 + q whose points are marked rate-1 with probability 1/(1+q) and rate-q
otherwise (an exact superposition of the two clock families).  Streams are
keyed by ``mix64(trial_seed, x + 2**62)``, so enlarging a window adds new
edges without disturbing existing ones.

States are plain integer arrays.  Multi-species states hold the permutation
values; single-species states hold 0 for a particle and 1 for a hole, which
makes the particle/hole jump rules a special case of the value-comparison
rules (equal values never swap).

Events are processed in strictly increasing (time, edge) order via a calendar
queue whose span exceeds the largest representable exponential gap, so no
wrap-around handling is needed.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
MIX1 = U64(0xBF58476D1CE4E5B9)
MIX2 = U64(0x94D049BB133111EB)
S30 = U64(30)
S27 = U64(27)
S31 = U64(31)
S11 = U64(11)
ONE = U64(1)
TWO_NEG53 = 2.0 ** -53
EDGE_KEY_OFFSET = 1 << 62

# Largest exponential gap at unit rate: -log(0.5 * 2**-53).
_MAX_UNIT_GAP = 54.0 * math.log(2.0)


@njit(cache=True, inline="always")
def _finalize(z):
    z ^= z >> S30
    z *= MIX1
    z ^= z >> S27
    z *= MIX2
    z ^= z >> S31
    return z


@njit(cache=True, inline="always")
def _mix64(a, b):
    return _finalize(a + GOLDEN * (b + ONE))


@njit(cache=True, inline="always")
def _u01(state):
    """One splitmix64 step mapped into (0, 1)."""
    state += GOLDEN
    z = _finalize(state)
    return (np.float64(z >> S11) + 0.5) * TWO_NEG53, state


@njit(cache=True, inline="always")
def _draw(state, inv_rate, thr, qzero):
    """Next (gap, tag, state) for one edge stream; tag 1 means rate-q mark."""
    u, state = _u01(state)
    gap = -math.log(u) * inv_rate
    tag = np.uint8(0)
    if not qzero:
        u2, state = _u01(state)
        if u2 < thr:
            tag = np.uint8(1)
    return gap, tag, state


def calendar_buckets(n_edges: int) -> int:
    """Power-of-two bucket count whose span exceeds the largest gap."""
    need = int(_MAX_UNIT_GAP * max(n_edges, 1)) + 64
    b = 64
    while b < need:
        b <<= 1
    return b


@njit(cache=True, nogil=True)
def edge_event_list(stream_seed, q, horizon):
    """Materialize one edge's clock stream up to the horizon.

    Returns (times, tags); tags are 0 for rate-1 marks, 1 for rate-q marks.
    """
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    cap = int(rate * horizon + 10.0 * math.sqrt(rate * horizon + 1.0)) + 16
    times = np.empty(cap, np.float64)
    tags = np.empty(cap, np.uint8)
    state = stream_seed
    t = 0.0
    n = 0
    while True:
        u, state = _u01(state)
        t = t - math.log(u) * inv_rate
        if t > horizon:
            break
        tag = np.uint8(0)
        if not qzero:
            u2, state = _u01(state)
            if u2 < thr:
                tag = np.uint8(1)
        if n >= cap:
            cap *= 2
            new_times = np.empty(cap, np.float64)
            new_tags = np.empty(cap, np.uint8)
            new_times[:n] = times[:n]
            new_tags[:n] = tags[:n]
            times = new_times
            tags = new_tags
        times[n] = t
        tags[n] = tag
        n += 1
    return times[:n].copy(), tags[:n].copy()


# ---------------------------------------------------------------------------
# Windowed multi-species runs
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def sim_multi_window_stats(
    seed,
    trial_lo,
    trial_hi,
    wl,
    wr,
    n_species,
    q,
    t_end,
    guard,
    n_buckets,
    out_stat,
    out_valid,
):
    """Evolve the identity-started multi-species window and report the height
    statistic min_k [h{projection k}(N-k) + k] over k in [[0, N]].

    A trial is invalid when a swap affecting any projection k in [[0, N]]
    lands in a guard band.  ``out_stat[trial]`` and ``out_valid[trial]`` are
    written for trial in [trial_lo, trial_hi).
    """
    W = wr - wl + 1
    E = W - 1
    N = n_species
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(W, np.int64)
    diff = np.empty(N + 2, np.int64)
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(W):
            vals[i] = wl + i
        head[:] = -1
        ok = True
        for e in range(E):
            st = _mix64(tseed, U64(wl + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        cb = np.int64(0)
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            if bt > t_end:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            a = vals[i]
            b = vals[i + 1]
            if (a < b) if tagn[best] == 0 else (a > b):
                vals[i] = b
                vals[i + 1] = a
                if i < guard or i >= E - guard:
                    mn = a if a < b else b
                    mx = b if a < b else a
                    if mn <= N and mx >= 1:
                        ok = False
                        break
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best
        out_valid[trial] = ok
        if ok:
            for k in range(N + 2):
                diff[k] = 0
            for i in range(W):
                x = wl + i
                if x > N:
                    break
                hi = vals[i] - 1
                if N - x < hi:
                    hi = N - x
                if hi > N:
                    hi = N
                if hi >= 0:
                    diff[0] += 1
                    diff[hi + 1] -= 1
            c = np.int64(0)
            m = np.int64(1 << 60)
            for k in range(N + 1):
                c += diff[k]
                v = 2 * c - N + 2 * k
                if v < m:
                    m = v
            out_stat[trial] = m
        else:
            out_stat[trial] = 0


@njit(cache=True, nogil=True)
def sim_single_window_counts(
    seed,
    trial_lo,
    trial_hi,
    wl,
    vals0,
    q,
    t_end,
    guard,
    n_buckets,
    positions,
    out_counts,
    out_valid,
):
    """Evolve a single-species window (values 0=particle, 1=hole) and report,
    per requested absolute position p, the number of holes at sites <= p at
    time ``t_end``.  Any swap landing in a guard band invalidates the trial.
    """
    W = vals0.shape[0]
    E = W - 1
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(W, np.int64)
    npos = positions.shape[0]
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(W):
            vals[i] = vals0[i]
        head[:] = -1
        ok = True
        for e in range(E):
            st = _mix64(tseed, U64(wl + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        cb = np.int64(0)
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            if bt > t_end:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            a = vals[i]
            b = vals[i + 1]
            if (a < b) if tagn[best] == 0 else (a > b):
                vals[i] = b
                vals[i + 1] = a
                if i < guard or i >= E - guard:
                    ok = False
                    break
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best
        out_valid[trial] = ok
        if ok:
            for j in range(npos):
                p = positions[j]
                c = np.int64(0)
                top = p - wl
                if top > W - 1:
                    top = W - 1
                for i in range(top + 1):
                    if vals[i] == 1:
                        c += 1
                out_counts[trial, j] = c


@njit(cache=True, nogil=True)
def sim_hitting(
    seed,
    trial_lo,
    trial_hi,
    wl,
    vals0,
    target,
    q,
    horizon,
    guard,
    n_buckets,
    out_time,
    out_valid,
):
    """First time the window state equals ``target``; -1.0 when censored at
    the horizon.  Works for any integer-valued window state (single-species
    hitting, oriented-swap absorbing time with guard=0).
    """
    W = vals0.shape[0]
    E = W - 1
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(W, np.int64)
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        disc = np.int64(0)
        for i in range(W):
            vals[i] = vals0[i]
            if vals[i] != target[i]:
                disc += 1
        head[:] = -1
        ok = True
        hit = -1.0
        if disc == 0:
            hit = 0.0
        else:
            for e in range(E):
                st = _mix64(tseed, U64(wl + e + EDGE_KEY_OFFSET))
                gap, tag, st = _draw(st, inv_rate, thr, qzero)
                rngs[e] = st
                tnext[e] = gap
                tagn[e] = tag
                ch = np.int64(gap * inv_bw) & bmask
                nxt[e] = head[ch]
                head[ch] = e
            cb = np.int64(0)
            while True:
                best = np.int32(-1)
                bprev = np.int32(-1)
                bt = 0.0
                while True:
                    e2 = head[cb & bmask]
                    prev = np.int32(-1)
                    while e2 != -1:
                        tt = tnext[e2]
                        if best == -1 or tt < bt or (tt == bt and e2 < best):
                            best = e2
                            bprev = prev
                            bt = tt
                        prev = e2
                        e2 = nxt[e2]
                    if best != -1:
                        break
                    cb += 1
                if bt > horizon:
                    break
                if bprev == -1:
                    head[cb & bmask] = nxt[best]
                else:
                    nxt[bprev] = nxt[best]
                i = best
                a = vals[i]
                b = vals[i + 1]
                if (a < b) if tagn[best] == 0 else (a > b):
                    disc -= (a != target[i]) + (b != target[i + 1])
                    vals[i] = b
                    vals[i + 1] = a
                    disc += (b != target[i]) + (a != target[i + 1])
                    if i < guard or i >= E - guard:
                        ok = False
                        break
                    if disc == 0:
                        hit = bt
                        break
                gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
                rngs[best] = st
                tnext[best] = bt + gap
                tagn[best] = tag
                ch = np.int64(tnext[best] * inv_bw) & bmask
                nxt[best] = head[ch]
                head[ch] = best
        out_valid[trial] = ok
        out_time[trial] = hit


@njit(cache=True, nogil=True)
def sim_coupling_pair(
    seed,
    trial_lo,
    trial_hi,
    lam0,
    partners,
    q,
    horizon,
    n_buckets,
    out_time,
):
    """Basic coupling of two interval card shufflings; first meeting time.

    ``lam0`` is shared across trials; ``partners[trial]`` is that trial's
    second initial state.  Censored trials report -1.0.
    """
    N = lam0.shape[0]
    E = N - 1
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    va = np.empty(N, np.int64)
    vb = np.empty(N, np.int64)
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        disc = np.int64(0)
        for i in range(N):
            va[i] = lam0[i]
            vb[i] = partners[trial, i]
            if va[i] != vb[i]:
                disc += 1
        head[:] = -1
        tau = -1.0
        if disc == 0:
            tau = 0.0
        else:
            for e in range(E):
                st = _mix64(tseed, U64(1 + e + EDGE_KEY_OFFSET))
                gap, tag, st = _draw(st, inv_rate, thr, qzero)
                rngs[e] = st
                tnext[e] = gap
                tagn[e] = tag
                ch = np.int64(gap * inv_bw) & bmask
                nxt[e] = head[ch]
                head[ch] = e
            cb = np.int64(0)
            while True:
                best = np.int32(-1)
                bprev = np.int32(-1)
                bt = 0.0
                while True:
                    e2 = head[cb & bmask]
                    prev = np.int32(-1)
                    while e2 != -1:
                        tt = tnext[e2]
                        if best == -1 or tt < bt or (tt == bt and e2 < best):
                            best = e2
                            bprev = prev
                            bt = tt
                        prev = e2
                        e2 = nxt[e2]
                    if best != -1:
                        break
                    cb += 1
                if bt > horizon:
                    break
                if bprev == -1:
                    head[cb & bmask] = nxt[best]
                else:
                    nxt[bprev] = nxt[best]
                i = best
                rev = tagn[best] == 1
                a = va[i]
                b = va[i + 1]
                if (a > b) if rev else (a < b):
                    disc -= (va[i] != vb[i]) + (va[i + 1] != vb[i + 1])
                    va[i] = b
                    va[i + 1] = a
                    disc += (va[i] != vb[i]) + (va[i + 1] != vb[i + 1])
                a = vb[i]
                b = vb[i + 1]
                if (a > b) if rev else (a < b):
                    disc -= (va[i] != vb[i]) + (va[i + 1] != vb[i + 1])
                    vb[i] = b
                    vb[i + 1] = a
                    disc += (va[i] != vb[i]) + (va[i + 1] != vb[i + 1])
                if disc == 0:
                    tau = bt
                    break
                gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
                rngs[best] = st
                tnext[best] = bt + gap
                tagn[best] = tag
                ch = np.int64(tnext[best] * inv_bw) & bmask
                nxt[best] = head[ch]
                head[ch] = best
        out_time[trial] = tau


@njit(cache=True, nogil=True)
def sim_interval_checkpoint_stats(
    seed,
    trial_lo,
    trial_hi,
    n_sites,
    q,
    checkpoints,
    n_buckets,
    out_stat,
):
    """Identity-started card shuffling on [[1, N]]; at each checkpoint time
    records the distinguishing statistic max_k [N - k - h{projection k}(N-k)]
    = 2 * max_k #{y <= N-k : value(y) <= k}.
    """
    N = n_sites
    E = N - 1
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(N, np.int64)
    diff = np.empty(N + 2, np.int64)
    ncp = checkpoints.shape[0]
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(N):
            vals[i] = 1 + i
        head[:] = -1
        for e in range(E):
            st = _mix64(tseed, U64(1 + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        ci = 0
        cb = np.int64(0)
        t_end = checkpoints[ncp - 1]
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            while ci < ncp and bt > checkpoints[ci]:
                for k in range(N + 2):
                    diff[k] = 0
                for ii in range(N):
                    y = 1 + ii
                    v = vals[ii]
                    if v <= N - y:
                        diff[v] += 1
                        diff[N - y + 1] -= 1
                c = np.int64(0)
                mx = np.int64(0)
                for k in range(N + 1):
                    c += diff[k]
                    if c > mx:
                        mx = c
                out_stat[trial, ci] = 2 * mx
                ci += 1
            if ci >= ncp or bt > t_end:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            a = vals[i]
            b = vals[i + 1]
            if (a < b) if tagn[best] == 0 else (a > b):
                vals[i] = b
                vals[i + 1] = a
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best


@njit(cache=True, nogil=True)
def sim_final_values(
    seed,
    trial_lo,
    trial_hi,
    wl,
    vals0,
    q,
    t_end,
    n_buckets,
    out_vals,
):
    """Evolve a window state to t_end and return the final values per trial."""
    W = vals0.shape[0]
    E = W - 1
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(W, np.int64)
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(W):
            vals[i] = vals0[i]
        head[:] = -1
        for e in range(E):
            st = _mix64(tseed, U64(wl + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        cb = np.int64(0)
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            if bt > t_end:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            a = vals[i]
            b = vals[i + 1]
            if (a < b) if tagn[best] == 0 else (a > b):
                vals[i] = b
                vals[i + 1] = a
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best
        for i in range(W):
            out_vals[trial, i] = vals[i]


@njit(cache=True, nogil=True)
def sim_zeta_xi_event(
    seed,
    trial_lo,
    trial_hi,
    wl,
    wr,
    n_species,
    q,
    t_end,
    guard,
    n_buckets,
    species_k,
    positions,
    out_hzeta,
    out_counts,
    out_valid,
):
    """Couple the identity-started multi-species window with the
    identity-started card shuffling on [[1, N]] (shared clocks).  Returns
    h{zeta projection k}(N-k) and, for each requested position p, the count
    #{y <= p : xi value(y) <= k} at time t_end.
    """
    W = wr - wl + 1
    E = W - 1
    N = n_species
    k = species_k
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(W, np.int64)
    xi = np.empty(N, np.int64)
    npos = positions.shape[0]
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(W):
            vals[i] = wl + i
        for i in range(N):
            xi[i] = 1 + i
        head[:] = -1
        ok = True
        for e in range(E):
            st = _mix64(tseed, U64(wl + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        cb = np.int64(0)
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            if bt > t_end:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            x = wl + i
            rev = tagn[best] == 1
            a = vals[i]
            b = vals[i + 1]
            if (a > b) if rev else (a < b):
                vals[i] = b
                vals[i + 1] = a
                if i < guard or i >= E - guard:
                    mn = a if a < b else b
                    mx = b if a < b else a
                    if mn <= N and mx >= 1:
                        ok = False
                        break
            if 1 <= x <= N - 1:
                j = x - 1
                a = xi[j]
                b = xi[j + 1]
                if (a > b) if rev else (a < b):
                    xi[j] = b
                    xi[j + 1] = a
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best
        out_valid[trial] = ok
        if ok:
            c = np.int64(0)
            for i in range(W):
                x = wl + i
                if x > N - k:
                    break
                if vals[i] > k:
                    c += 1
            out_hzeta[trial] = -(N - k) + 2 * c
            for j in range(npos):
                p = positions[j]
                c = np.int64(0)
                top = p
                if top > N:
                    top = N
                for y in range(1, top + 1):
                    if xi[y - 1] <= k:
                        c += 1
                out_counts[trial, j] = c


@njit(cache=True, nogil=True)
def sim_event_b(
    seed,
    trial_lo,
    trial_hi,
    n_sites,
    q,
    species_k,
    t_start,
    a_off,
    r_len,
    n_buckets,
    out_flag,
):
    """Identity-started card shuffling on [[1, N]]; checks the freezing event:
    h{projection k}(N-k-a) = h{projection k}(N-k+a) = N-k-a at every integer
    offset in [[0, r]] after t_start, while h{projection k}(N-k) < N-k holds
    throughout [t_start, t_start + r].
    """
    N = n_sites
    E = N - 1
    k = species_k
    p1 = N - k - a_off
    pc = N - k
    p2 = N - k + a_off
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(N, np.int64)
    t_stop = t_start + r_len
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(N):
            vals[i] = 1 + i
        head[:] = -1
        for e in range(E):
            st = _mix64(tseed, U64(1 + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        # counts #{y <= p : value <= k} for the three tracked positions
        c1 = np.int64(0)
        cc = np.int64(0)
        c2 = np.int64(0)
        for i in range(N):
            y = 1 + i
            if vals[i] <= k:
                if y <= p1:
                    c1 += 1
                if y <= pc:
                    cc += 1
                if y <= p2:
                    c2 += 1
        flag = True
        started = False
        next_check = t_start
        n_checks_left = np.int64(r_len) + 1
        cb = np.int64(0)
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            while n_checks_left > 0 and bt > next_check:
                # side heights pinned at N-k-a at integer offsets
                if p1 - 2 * c1 != N - k - a_off or p2 - 2 * c2 != N - k - a_off:
                    flag = False
                started = True
                next_check += 1.0
                n_checks_left -= 1
            if started and pc - 2 * cc >= N - k:
                flag = False
            if bt > t_stop or not flag:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            x = 1 + i
            a = vals[i]
            b = vals[i + 1]
            if (a < b) if tagn[best] == 0 else (a > b):
                vals[i] = b
                vals[i + 1] = a
                if x == p1:
                    c1 += (b <= k) - (a <= k)
                if x == pc:
                    cc += (b <= k) - (a <= k)
                if x == p2:
                    c2 += (b <= k) - (a <= k)
                if started and bt <= t_stop and pc - 2 * cc >= N - k:
                    flag = False
            if not flag:
                break
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best
        out_flag[trial] = flag


@njit(cache=True, nogil=True)
def sim_down_crossing(
    seed,
    trial_lo,
    trial_hi,
    wl,
    wr,
    n_species,
    q,
    t_ref,
    r_len,
    guard,
    n_buckets,
    species_k,
    out_href,
    out_hmin,
    out_valid,
):
    """Identity-started multi-species window; tracks h{projection k}(N-k):
    records its value at t_ref and its minimum over [t_ref, t_ref + r]."""
    W = wr - wl + 1
    E = W - 1
    N = n_species
    k = species_k
    pc = N - k
    rate = 1.0 + q
    inv_rate = 1.0 / rate
    thr = q / rate
    qzero = q == 0.0
    bw = inv_rate / E
    inv_bw = 1.0 / bw
    bmask = np.int64(n_buckets - 1)
    head = np.full(n_buckets, -1, np.int32)
    nxt = np.empty(E, np.int32)
    rngs = np.empty(E, np.uint64)
    tnext = np.empty(E, np.float64)
    tagn = np.empty(E, np.uint8)
    vals = np.empty(W, np.int64)
    t_stop = t_ref + r_len
    useed = U64(seed)
    for trial in range(trial_lo, trial_hi):
        tseed = _mix64(useed, U64(trial))
        for i in range(W):
            vals[i] = wl + i
        head[:] = -1
        ok = True
        for e in range(E):
            st = _mix64(tseed, U64(wl + e + EDGE_KEY_OFFSET))
            gap, tag, st = _draw(st, inv_rate, thr, qzero)
            rngs[e] = st
            tnext[e] = gap
            tagn[e] = tag
            ch = np.int64(gap * inv_bw) & bmask
            nxt[e] = head[ch]
            head[ch] = e
        c = np.int64(0)
        for i in range(W):
            if wl + i > pc:
                break
            if vals[i] > k:
                c += 1
        href = np.int64(-(1 << 60))
        hmin = np.int64(1 << 60)
        started = False
        cb = np.int64(0)
        while True:
            best = np.int32(-1)
            bprev = np.int32(-1)
            bt = 0.0
            while True:
                e2 = head[cb & bmask]
                prev = np.int32(-1)
                while e2 != -1:
                    tt = tnext[e2]
                    if best == -1 or tt < bt or (tt == bt and e2 < best):
                        best = e2
                        bprev = prev
                        bt = tt
                    prev = e2
                    e2 = nxt[e2]
                if best != -1:
                    break
                cb += 1
            if not started and bt > t_ref:
                started = True
                href = -pc + 2 * c
                hmin = href
            if bt > t_stop:
                break
            if bprev == -1:
                head[cb & bmask] = nxt[best]
            else:
                nxt[bprev] = nxt[best]
            i = best
            x = wl + i
            a = vals[i]
            b = vals[i + 1]
            if (a < b) if tagn[best] == 0 else (a > b):
                vals[i] = b
                vals[i + 1] = a
                if i < guard or i >= E - guard:
                    mn = a if a < b else b
                    mx = b if a < b else a
                    if mn <= N and mx >= 1:
                        ok = False
                        break
                if x == pc:
                    c += (b > k) - (a > k)
                    if started:
                        h = -pc + 2 * c
                        if h < hmin:
                            hmin = h
            gap, tag, st = _draw(rngs[best], inv_rate, thr, qzero)
            rngs[best] = st
            tnext[best] = bt + gap
            tagn[best] = tag
            ch = np.int64(tnext[best] * inv_bw) & bmask
            nxt[best] = head[ch]
            head[ch] = best
        if not started and ok:
            href = -pc + 2 * c
            hmin = href
        out_valid[trial] = ok
        out_href[trial] = href
        out_hmin[trial] = hmin
