"""Compiled kernels for Poisson event sampling and the random-cluster chain.

All randomness enters through a flat buffer of uniforms drawn from a numpy
Generator; kernels return the next unread position, or -1 when the buffer
ran out. Callers then extend the buffer with further draws from the same
generator and retry from the last committed position, so results depend
only on the generator stream and never on buffer sizes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_CHUNK = 400.0


@njit(cache=True)
def poisson_inv(U, pos, mu):
    """Poisson(mu) by inversion; large means split into chunks of one uniform each."""
    if mu <= 0.0:
        return 0, pos
    nchunk = int(math.ceil(mu / _CHUNK))
    part = mu / nchunk
    total = 0
    for _ in range(nchunk):
        if pos >= U.shape[0]:
            return 0, -1
        u = U[pos]
        pos += 1
        k = 0
        p = math.exp(-part)
        F = p
        while u > F and k < 100000:
            k += 1
            p *= part / k
            F += p
            if p < 1e-300 and F >= 1.0 - 1e-15:
                break
        total += k
    return total, pos


@njit(cache=True)
def open_times(U, pos, k, T, out, start):
    """Write k sorted uniform times in (0, T) to out[start:start+k]."""
    for i in range(k):
        while True:
            if pos >= U.shape[0]:
                return -1
            t = U[pos] * T
            pos += 1
            if t > 0.0 and t < T:
                break
        out[start + i] = t
    if k > 1:
        out[start:start + k] = np.sort(out[start:start + k])
    return pos


@njit(cache=True)
def sample_events_kernel(rates, T, U, pos):
    """Independent Poisson processes per owner; times sorted within owner."""
    n = rates.shape[0]
    counts = np.zeros(n, np.int64)
    cap = 16
    times = np.empty(cap)
    total = 0
    for o in range(n):
        k, pos = poisson_inv(U, pos, rates[o] * T)
        if pos < 0:
            return counts, times[:0], -1
        if total + k > cap:
            while total + k > cap:
                cap *= 2
            nt = np.empty(cap)
            nt[:total] = times[:total]
            times = nt
        pos = open_times(U, pos, k, T, times, total)
        if pos < 0:
            return counts, times[:0], -1
        # tied times inside one owner have probability zero; redraw the owner
        while k > 1 and np.any(times[total + 1:total + k] == times[total:total + k - 1]):
            pos = open_times(U, pos, k, T, times, total)
            if pos < 0:
                return counts, times[:0], -1
        counts[o] = k
        total += k
    return counts, times[:total], pos


@njit(cache=True)
def _count_leq(times, lo, hi, t):
    return np.searchsorted(times[lo:hi], t, side="right")


@njit(cache=True)
def _local_segment(k, m, periodic):
    if periodic:
        mm = m if m > 0 else 1
        return (k - 1) % mm
    return k


@njit(cache=True)
def _seg_offsets(cut_off, per):
    n = per.shape[0]
    seg_off = np.zeros(n + 1, np.int64)
    for x in range(n):
        m = cut_off[x + 1] - cut_off[x]
        ns = m + 1
        if per[x] and m >= 1:
            ns = m
        seg_off[x + 1] = seg_off[x] + ns
    return seg_off


@njit(cache=True)
def locate(cut_off, cut_t, seg_off, per, x, t):
    lo, hi = cut_off[x], cut_off[x + 1]
    k = _count_leq(cut_t, lo, hi, t)
    return seg_off[x] + _local_segment(k, hi - lo, per[x])


@njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def cluster_kernel(n, E, per, T, cut_off, cut_t, b_edge, b_t, oriented):
    """Segments, union-find over bridges, labels by first appearance, measures."""
    m = E.shape[0]
    seg_off = _seg_offsets(cut_off, per)
    nseg = seg_off[n]
    parent = np.arange(nseg)
    size = np.ones(nseg, np.int64)
    for i in range(b_edge.shape[0]):
        e = b_edge[i]
        if oriented and e >= m:
            e -= m
        x, y = E[e, 0], E[e, 1]
        a = _find(parent, locate(cut_off, cut_t, seg_off, per, x, b_t[i]))
        b = _find(parent, locate(cut_off, cut_t, seg_off, per, y, b_t[i]))
        if a != b:
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
    labels = np.empty(nseg, np.int64)
    root_label = np.full(nseg, -1, np.int64)
    k = 0
    for s in range(nseg):
        r = _find(parent, s)
        if root_label[r] < 0:
            root_label[r] = k
            k += 1
        labels[s] = root_label[r]
    measures = np.zeros(k)
    for x in range(n):
        lo, hi = cut_off[x], cut_off[x + 1]
        mcut = hi - lo
        s0 = seg_off[x]
        if mcut == 0:
            measures[labels[s0]] += T
        elif per[x]:
            for j in range(mcut):
                a = cut_t[lo + j]
                b = cut_t[lo + j + 1] if j + 1 < mcut else cut_t[lo] + T
                measures[labels[s0 + j]] += b - a
        else:
            prev = 0.0
            for j in range(mcut):
                measures[labels[s0 + j]] += cut_t[lo + j] - prev
                prev = cut_t[lo + j]
            measures[labels[s0 + mcut]] += T - prev
    return seg_off, labels, k, measures


@njit(cache=True)
def _has_collision(E, cut_off, cut_t, b_edge, b_t, m):
    for i in range(b_edge.shape[0]):
        e = b_edge[i]
        if e >= m:
            e -= m
        for col in range(2):
            x = E[e, col]
            lo, hi = cut_off[x], cut_off[x + 1]
            j = np.searchsorted(cut_t[lo:hi], b_t[i])
            if j < hi - lo and cut_t[lo + j] == b_t[i]:
                return True
    return False


@njit(cache=True)
def sample_config_kernel(delta, bridge_rates, E, T, U, pos):
    """Cuts then bridges; redraws all bridges on the null collision event."""
    m = E.shape[0]
    ccount, cut_t, pos = sample_events_kernel(delta, T, U, pos)
    cut_off = np.zeros(delta.shape[0] + 1, np.int64)
    if pos < 0:
        return cut_off, cut_t, cut_off[:0], cut_t[:0], -1
    cut_off[1:] = np.cumsum(ccount)
    while True:
        bcount, b_t, pos = sample_events_kernel(bridge_rates, T, U, pos)
        if pos < 0:
            return cut_off, cut_t, cut_off[:0], cut_t[:0], -1
        b_edge = np.repeat(np.arange(bridge_rates.shape[0]), bcount)
        if not _has_collision(E, cut_off, cut_t, b_edge, b_t, m):
            return cut_off, cut_t, b_edge, b_t, pos


@njit(cache=True)
def sweep_kernel(n, E, per, T, delta, lam, q, cut_off, cut_t, seg_spin, U, pos):
    """One Swendsen-Wang alternation; returns the new state or pos = -1."""
    m = E.shape[0]
    seg_off = _seg_offsets(cut_off, per)
    # (a) cuts: spin jumps plus fresh Poisson(delta) cuts on every line
    new_off = np.zeros(n + 1, np.int64)
    cap = cut_t.shape[0] + 16
    new_t = np.empty(cap)
    total = 0
    buf = np.empty(8)
    for x in range(n):
        lo, hi = cut_off[x], cut_off[x + 1]
        mc = hi - lo
        kx, pos = poisson_inv(U, pos, delta[x] * T)
        if pos < 0:
            return new_off, new_t, cut_off[:0], cut_t[:0], seg_spin, -1, seg_spin, cut_t, cut_off
        if kx > buf.shape[0]:
            buf = np.empty(2 * kx)
        pos = open_times(U, pos, kx, T, buf, 0)
        if pos < 0:
            return new_off, new_t, cut_off[:0], cut_t[:0], seg_spin, -1, seg_spin, cut_t, cut_off
        need = total + mc + kx
        if need > cap:
            while need > cap:
                cap *= 2
            nt = np.empty(cap)
            nt[:total] = new_t[:total]
            new_t = nt
        start = total
        if q > 1:
            s0 = seg_off[x]
            for j in range(mc):
                if per[x]:
                    before = (j - 1) % mc
                    after = j
                else:
                    before = j
                    after = j + 1
                if seg_spin[s0 + before] != seg_spin[s0 + after]:
                    new_t[total] = cut_t[lo + j]
                    total += 1
        for i in range(kx):
            new_t[total] = buf[i]
            total += 1
        if total - start > 1:
            new_t[start:total] = np.sort(new_t[start:total])
        new_off[x + 1] = total
    new_t = new_t[:total]
    # (b) bridges: Poisson(lambda) kept where the old spins agree
    while True:
        bcount, cand_t, pos = sample_events_kernel(lam, T, U, pos)
        if pos < 0:
            return new_off, new_t, cut_off[:0], cut_t[:0], seg_spin, -1, seg_spin, cut_t, cut_off
        keep = np.ones(cand_t.shape[0], np.bool_)
        i = 0
        for e in range(m):
            x, y = E[e, 0], E[e, 1]
            for _ in range(bcount[e]):
                if q > 1:
                    sx = seg_spin[locate(cut_off, cut_t, seg_off, per, x, cand_t[i])]
                    sy = seg_spin[locate(cut_off, cut_t, seg_off, per, y, cand_t[i])]
                    keep[i] = sx == sy
                i += 1
        b_edge = np.repeat(np.arange(m), bcount)[keep]
        b_t = cand_t[keep]
        if not _has_collision(E, new_off, new_t, b_edge, b_t, m):
            break
    # (c) clusters and colouring
    nseg_off, labels, k, measures = cluster_kernel(n, E, per, T, new_off, new_t, b_edge, b_t, False)
    if pos + k > U.shape[0]:
        return new_off, new_t, cut_off[:0], cut_t[:0], seg_spin, -1, seg_spin, cut_t, cut_off
    colors = np.empty(k, np.int64)
    for c in range(k):
        colors[c] = int(U[pos] * q) + 1
        pos += 1
    new_spin = colors[labels]
    return new_off, new_t, b_edge, b_t, new_spin, pos, labels, measures, nseg_off


N_OBS = 6  # n_cuts, n_bridges, k, max measure, mean-over-points measure proxy (sum m^2), jumps


@njit(cache=True)
def run_kernel(n, E, per, T, delta, lam, q, cut_off, cut_t, b_edge, b_t, seg_spin, U, pos, nsweeps, record_ends, obs):
    """Run up to nsweeps sweeps; stops early (committing finished sweeps) if U runs out.

    Row i of ``obs`` receives per-sweep observables; with ``record_ends`` the
    cluster labels of the points (x, 0) and (x, T) follow in columns
    N_OBS .. N_OBS + 2n.
    """
    done = 0
    while done < nsweeps:
        no, nt, be, bt, ns, p2, labels, measures, seg_off = sweep_kernel(
            n, E, per, T, delta, lam, q, cut_off, cut_t, seg_spin, U, pos
        )
        if p2 < 0:
            break
        cut_off, cut_t, b_edge, b_t, seg_spin, pos = no, nt, be, bt, ns, p2
        k = measures.shape[0]
        obs[done, 0] = cut_t.shape[0]
        obs[done, 1] = b_t.shape[0]
        obs[done, 2] = k
        obs[done, 3] = measures.max()
        obs[done, 4] = (measures * measures).sum()
        jumps = 0
        for x in range(n):
            lo, hi = cut_off[x], cut_off[x + 1]
            mc = hi - lo
            s0 = seg_off[x]
            for j in range(mc):
                if per[x]:
                    before = (j - 1) % mc
                    after = j
                else:
                    before = j
                    after = j + 1
                if seg_spin[s0 + before] != seg_spin[s0 + after]:
                    jumps += 1
        obs[done, 5] = jumps
        if record_ends:
            for x in range(n):
                obs[done, N_OBS + 2 * x] = labels[locate(cut_off, cut_t, seg_off, per, x, 0.0)]
                obs[done, N_OBS + 2 * x + 1] = labels[locate(cut_off, cut_t, seg_off, per, x, T)]
        done += 1
    return cut_off, cut_t, b_edge, b_t, seg_spin, pos, done
