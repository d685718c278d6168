"""Slow, independent reference implementations used to cross-check the
fast paths: brute-force clustering, brute-force directed search, explicit
partial traces and interval-length laws.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .core import Configuration, SpaceTimeBox


def brute_segments(config: Configuration, box: SpaceTimeBox) -> list[tuple[int, float, float]]:
    """Segments as (x, a, b) by direct enumeration; wrapped ones have b > T."""
    out = []
    T = box.T
    for x in range(box.n):
        cuts = sorted(config.cut_time[config.cut_line == x].tolist())
        if box.periodic_mask[x]:
            if not cuts:
                out.append((x, 0.0, T))
            else:
                for i, c in enumerate(cuts):
                    nxt = cuts[i + 1] if i + 1 < len(cuts) else cuts[0] + T
                    out.append((x, c, nxt))
        else:
            pts = [0.0] + cuts + [T]
            out += [(x, pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
    return out


def _holds(seg, x, t, T):
    y, a, b = seg
    if y != x:
        return False
    return a <= t < b or a <= t + T < b or (a == 0.0 and b == T and t == T)


def brute_clusters(config: Configuration, box: SpaceTimeBox) -> tuple[int, list[int], np.ndarray]:
    """(k, label per brute segment, measures) by breadth-first search."""
    segs = brute_segments(config, box)
    T = box.T
    adj = [[] for _ in segs]
    src, dst = config.bridge_endpoints(box)
    for a, b, t in zip(src.tolist(), dst.tolist(), config.bridge_time.tolist()):
        i = next(j for j, s in enumerate(segs) if _holds(s, a, t, T))
        j = next(j for j, s in enumerate(segs) if _holds(s, b, t, T))
        adj[i].append(j)
        adj[j].append(i)
    label = [-1] * len(segs)
    k = 0
    for s in range(len(segs)):
        if label[s] >= 0:
            continue
        label[s] = k
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if label[v] < 0:
                    label[v] = k
                    queue.append(v)
        k += 1
    meas = np.zeros(k)
    for (x, a, b), lab in zip(segs, label):
        meas[lab] += b - a
    return k, label, meas


def brute_directed(config: Configuration, box: SpaceTimeBox, x0: int, s0: float) -> dict[int, list[tuple[float, float]]]:
    """Directed reachable set by search over entry points (line, time).

    From an entry (y, t) the walker runs forward to the next cut (wrapping
    through T on periodic lines) and may jump along any outgoing bridge met
    on the way; each jump is a new entry.
    """
    T = box.T
    src, dst = config.bridge_endpoints(box)
    out_b = {}
    for a, b, t in zip(src.tolist(), dst.tolist(), config.bridge_time.tolist()):
        out_b.setdefault(a, []).append((t, b))
    cuts = {x: sorted(config.cut_time[config.cut_line == x].tolist()) for x in range(box.n)}

    def run(y, t):
        """Forward intervals from (y, t) as a list of (a, b) in [0, T]."""
        later = [c for c in cuts[y] if c > t]
        if later:
            return [(t, later[0])]
        if not box.periodic_mask[y]:
            return [(t, T)]
        first = [c for c in cuts[y] if c <= t]
        if not first:
            return [(0.0, T)]
        return [(t, T), (0.0, first[0])]

    pieces: dict[int, list] = {}
    seen = {(x0, s0)}
    queue = deque([(x0, s0)])
    while queue:
        y, t = queue.popleft()
        for a, b in run(y, t):
            pieces.setdefault(y, []).append((a, b))
            for tb, z in out_b.get(y, ()):
                if a <= tb < b and (z, tb) not in seen:
                    seen.add((z, tb))
                    queue.append((z, tb))
    merged = {}
    for y, ps in pieces.items():
        ps.sort()
        acc = []
        for a, b in ps:
            if acc and a <= acc[-1][1]:
                acc[-1] = (acc[-1][0], max(acc[-1][1], b))
            else:
                acc.append((a, b))
        merged[y] = acc
    return merged


def explicit_partial_trace(rho: np.ndarray, n: int, keep: list[int]) -> np.ndarray:
    """Partial trace by summation over basis indices, most significant bit first."""
    keep = sorted(keep)
    drop = [i for i in range(n) if i not in keep]
    d = 2 ** len(keep)
    out = np.zeros((d, d))

    def bits(i):
        return [(i >> (n - 1 - j)) & 1 for j in range(n)]

    def sub(b, idx):
        v = 0
        for j in idx:
            v = 2 * v + b[j]
        return v

    for i in range(2**n):
        bi = bits(i)
        for j in range(2**n):
            bj = bits(j)
            if all(bi[k] == bj[k] for k in drop):
                out[sub(bi, keep), sub(bj, keep)] += rho[i, j]
    return out


def min_exp_interval(beta: float, rng, size) -> np.ndarray:
    """min(U + V, beta) with U, V independent Exp(1)."""
    return np.minimum(rng.exponential(size=size) + rng.exponential(size=size), beta)


def discretized_spin_law(lam: float, delta: float, T: float, cells: int) -> np.ndarray:
    """Exact law of (agreement cells A, spin jumps J) for q = 2 on two free lines.

    Time is cut into ``cells`` cells of width eps = T / cells; a jump between
    neighbouring cells costs delta * eps and each agreeing cell gains
    exp(lam * eps). Returns P[A, J] with A in 0..cells, J in 0..2(cells-1).
    """
    eps = T / cells
    nj = 2 * (cells - 1) + 1
    # state s = (s0, s1) in {0,1}^2, dp[s, A, J]
    dp = np.zeros((4, cells + 1, nj))
    for s in range(4):
        dp[s, int((s >> 1) == (s & 1)), 0] = 1.0
    w_jump = delta * eps
    for _ in range(cells - 1):
        new = np.zeros_like(dp)
        for s in range(4):
            for u in range(4):
                jumps = ((s ^ u) >> 1) + ((s ^ u) & 1)
                agree = int((u >> 1) == (u & 1))
                src = dp[s] * w_jump**jumps
                new[u, agree:, jumps:] += src[: cells + 1 - agree, : nj - jumps]
        dp = new
    P = dp.sum(axis=0) * np.exp(lam * eps * np.arange(cells + 1))[:, None]
    return P / P.sum()
