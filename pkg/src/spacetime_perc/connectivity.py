"""Clusters of a configuration under the undirected relation and the
oriented (contact-model) relation.

Lines are cut into maximal cut-free segments; a bridge glues the two
segments containing its time on its endpoint lines. Periodic lines wrap the
last segment across T = 0. Point queries are right-continuous: a point
sitting on a cut belongs to the segment that starts there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import engine
from .core import Configuration, Point, SpaceTimeBox
from .errors import CorruptConfiguration, InvalidParameter


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True

    def labels(self) -> np.ndarray:
        """Contiguous labels 0..count-1 in order of first appearance."""
        roots = [self.find(i) for i in range(len(self.parent))]
        _, first, inv = np.unique(roots, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first)] = np.arange(len(first))
        return rank[inv]


class Segment(NamedTuple):
    vertex: int
    start: float
    end: float  # may exceed T for a segment wrapping through 0 = T


def count_cuts_leq(cut_line, cut_time, cut_start, qline, qtime) -> np.ndarray:
    """Number of cuts on ``qline[i]`` at times <= ``qtime[i]``."""
    nq = len(qline)
    if nq == 0:
        return np.zeros(0, dtype=np.int64)
    if len(cut_line) == 0:
        return np.zeros(nq, dtype=np.int64)
    lines = np.concatenate([cut_line, qline])
    times = np.concatenate([cut_time, qtime])
    kind = np.concatenate([np.zeros(len(cut_line), np.int8), np.ones(nq, np.int8)])
    order = np.lexsort((kind, times, lines))
    is_cut = kind[order] == 0
    seen = np.cumsum(is_cut)
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order))
    qpos = pos[len(cut_line):]
    return seen[qpos] - cut_start[qline]


@dataclass(frozen=True, eq=False)
class Segments:
    """Maximal cut-free segments of every line, indexed contiguously by line."""

    box: SpaceTimeBox
    config: Configuration
    line: np.ndarray
    start: np.ndarray
    end: np.ndarray
    offset: np.ndarray
    ncut: np.ndarray
    cut_start: np.ndarray

    def __len__(self) -> int:
        return len(self.line)

    def __getitem__(self, i: int) -> Segment:
        return Segment(int(self.line[i]), float(self.start[i]), float(self.end[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def length(self) -> np.ndarray:
        return self.end - self.start

    def locate(self, lines, times) -> np.ndarray:
        lines = np.asarray(lines, dtype=np.int64).ravel()
        times = np.asarray(times, dtype=float).ravel()
        k = count_cuts_leq(self.config.cut_line, self.config.cut_time, self.cut_start, lines, times)
        per = self.box.periodic_mask[lines]
        m = self.ncut[lines]
        local = np.where(per, (k - 1) % np.maximum(m, 1), k)
        return self.offset[lines] + local

    def before_cut(self) -> np.ndarray:
        """Segment ending at each cut (same order as the configuration's cuts)."""
        j = self._cut_rank()
        x = self.config.cut_line
        per = self.box.periodic_mask[x]
        return self.offset[x] + np.where(per, (j - 1) % np.maximum(self.ncut[x], 1), j)

    def after_cut(self) -> np.ndarray:
        j = self._cut_rank()
        x = self.config.cut_line
        per = self.box.periodic_mask[x]
        return self.offset[x] + np.where(per, j, j + 1)

    def _cut_rank(self) -> np.ndarray:
        x = self.config.cut_line
        return np.arange(len(x)) - self.cut_start[x]


def build_segments(config: Configuration, box: SpaceTimeBox) -> Segments:
    n, T = box.n, box.T
    per = box.periodic_mask
    x = config.cut_line
    ncut = np.bincount(x, minlength=n).astype(np.int64)
    cut_start = np.concatenate([[0], np.cumsum(ncut)])
    nseg = ncut + 1 - (per & (ncut >= 1))
    offset = np.concatenate([[0], np.cumsum(nseg)])
    line = np.repeat(np.arange(n, dtype=np.int64), nseg)
    start = np.zeros(len(line))
    end = np.full(len(line), float(T))
    if len(x):
        j = np.arange(len(x)) - cut_start[x]
        t = config.cut_time
        pc = per[x]
        after = offset[x] + np.where(pc, j, j + 1)
        before = offset[x] + np.where(pc, (j - 1) % np.maximum(ncut[x], 1), j)
        start[after] = t
        end[before] = np.where(pc & (j == 0), t + T, t)
    return Segments(box, config, line, start, end, offset, ncut, cut_start)


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    segments: Segments
    labels: np.ndarray
    k: int
    measures: np.ndarray

    def cluster_of(self, vertex, time) -> np.ndarray | int:
        seg = self.segments.locate(np.atleast_1d(vertex), np.atleast_1d(time))
        lab = self.labels[seg]
        return int(lab[0]) if np.ndim(vertex) == 0 else lab

    def segments_of(self, c: int) -> list[Segment]:
        return [self.segments[i] for i in np.flatnonzero(self.labels == c)]

    def contains(self, c: int, vertex: int, time: float) -> bool:
        return self.cluster_of(vertex, time) == c


def bridge_segment_pairs(config: Configuration, box: SpaceTimeBox, segs: Segments):
    src, dst = config.bridge_endpoints(box)
    t = config.bridge_time
    return segs.locate(src, t), segs.locate(dst, t)


def build_clusters(
    config: Configuration, box: SpaceTimeBox, segs: Segments | None = None, check=True, method: str = "compiled"
) -> ClusterLabeling:
    """Union-find over bridges; ``method="python"`` keeps a pure reference path."""
    if segs is None:
        segs = build_segments(config, box)
    if check and config.n_cuts and config.n_bridges:
        from .core import _has_collision

        if _has_collision(config, box):
            raise CorruptConfiguration("bridge time coincides with a cut at an endpoint")
    if method == "compiled":
        _, labels, k, _ = engine.cluster_kernel(
            box.n, box.edges, box.periodic_mask, float(box.T), segs.cut_start, config.cut_time,
            config.bridge_edge, config.bridge_time, config.oriented,
        )
        return ClusterLabeling(segs, labels, int(k), np.bincount(labels, weights=segs.length, minlength=k))
    if method != "python":
        raise InvalidParameter(f"unknown method {method!r}")
    a, b = bridge_segment_pairs(config, box, segs)
    uf = UnionFind(len(segs))
    for u, v in zip(a.tolist(), b.tolist()):
        uf.union(u, v)
    labels = uf.labels()
    measures = np.bincount(labels, weights=segs.length, minlength=uf.count)
    return ClusterLabeling(segs, labels, uf.count, measures)


# ---------------------------------------------------------------------------
# per-cluster geometry


def _time_sup_distance(start, end, s, T, periodic) -> np.ndarray:
    """sup over t in [start, end) of the time distance |t - s|.

    On periodic lines the distance is measured around the circle.
    """
    lin = np.maximum(np.abs(start - s), np.abs(end - s))
    if not np.any(periodic):
        return lin

    def circ(t):
        d = np.abs(t - s) % T
        return np.minimum(d, T - d)

    length = end - start
    anti = (s + T / 2 - start) % T
    hits = (length >= T) | (anti < length)
    cir = np.where(hits, T / 2, np.maximum(circ(start), circ(end)))
    return np.where(periodic, cir, lin)


class ClusterInfo(NamedTuple):
    cluster: int
    measure: float
    radius: float
    space_extent: float
    time_extent: float


def cluster_at(labeling: ClusterLabeling, p: Point) -> ClusterInfo:
    """Cluster id, Lebesgue measure and radius of the cluster containing ``p``.

    The radius is sup of ``||x - x_p|| + |t - t_p|`` over the cluster, the
    sup-norm taken on vertex coordinates (graph distance without them).
    """
    segs = labeling.segments
    box = segs.box
    x0, s0 = int(p.vertex), float(p.time)
    if not (0 <= x0 < box.n) or not (0 <= s0 <= box.T):
        raise InvalidParameter("point outside the box")
    c = labeling.cluster_of(x0, s0)
    idx = np.flatnonzero(labeling.labels == c)
    dist = box.graph.distance_from(x0)[segs.line[idx]]
    tsup = _time_sup_distance(segs.start[idx], segs.end[idx], s0, box.T, box.periodic_mask[segs.line[idx]])
    return ClusterInfo(
        c,
        float(labeling.measures[c]),
        float(np.max(dist + tsup)),
        float(np.max(dist)),
        float(np.max(tsup)),
    )


# ---------------------------------------------------------------------------
# contact model


@dataclass(frozen=True)
class DirectedCluster:
    origin: Point
    pieces: dict  # vertex -> sorted list of disjoint (a, b)

    @property
    def measure(self) -> float:
        return float(sum(b - a for ps in self.pieces.values() for a, b in ps))

    def contains(self, vertex: int, time: float) -> bool:
        return any(a <= time < b for a, b in self.pieces.get(vertex, ()))

    def piece_list(self) -> list[tuple[int, float, float]]:
        return [(x, a, b) for x in sorted(self.pieces) for a, b in self.pieces[x]]

    def extents(self, box: SpaceTimeBox) -> tuple[float, float, float]:
        """(radius, space extent, time extent) measured from the origin."""
        x0, s0 = self.origin
        dist = box.graph.distance_from(x0)
        rad = sp = tm = 0.0
        for x, a, b in self.piece_list():
            t = float(_time_sup_distance(np.array([a]), np.array([b]), s0, box.T, np.array([box.periodic_mask[x]]))[0])
            rad = max(rad, dist[x] + t)
            sp = max(sp, float(dist[x]))
            tm = max(tm, t)
        return float(rad), sp, tm


def _merge(intervals):
    out = []
    for a, b in sorted(intervals):
        if b <= a:
            continue
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def directed_reach(config: Configuration, box: SpaceTimeBox, origin: Point) -> DirectedCluster:
    """Points reachable from ``origin`` along time-increasing paths.

    Bridges must come from an oriented configuration. Events are swept in
    time order; on periodic lines activity at T re-enters at 0 and the sweep
    is repeated until the set of re-entering lines stops growing.
    """
    if not config.oriented:
        raise InvalidParameter("directed reach needs an oriented configuration")
    x0, s0 = int(origin.vertex), float(origin.time)
    if not (0 <= x0 < box.n) or not (0 <= s0 <= box.T):
        raise InvalidParameter("origin outside the box")
    T = box.T
    per = box.periodic_mask
    src, dst = config.bridge_endpoints(box)
    # kind 0 = cut, 1 = bridge
    ev_t = np.concatenate([config.cut_time, config.bridge_time])
    ev_k = np.concatenate([np.zeros(config.n_cuts, np.int8), np.ones(config.n_bridges, np.int8)])
    ev_a = np.concatenate([config.cut_line, src])
    ev_b = np.concatenate([config.cut_line, dst])
    order = np.argsort(ev_t, kind="stable")
    events = list(zip(ev_t[order].tolist(), ev_k[order].tolist(), ev_a[order].tolist(), ev_b[order].tolist()))

    pieces: dict[int, list] = {}

    def sweep(t0, initial, inject):
        active = {x: t0 for x in initial}
        injected = not inject
        if inject and s0 <= t0:
            active.setdefault(x0, t0 if t0 == s0 else s0)
            injected = True
        for t, kind, a, b in events:
            if t <= t0:
                continue
            if not injected and t > s0:
                active.setdefault(x0, s0)
                injected = True
            if kind == 0:
                st = active.pop(a, None)
                if st is not None:
                    pieces.setdefault(a, []).append((st, t))
            elif a in active and b not in active:
                active[b] = t
        if not injected:
            active.setdefault(x0, s0)
        for x, st in active.items():
            pieces.setdefault(x, []).append((st, T))
        return {x for x in active if per[x]}

    wrap = sweep(s0, (), True)
    seen = set()
    while not wrap <= seen:
        seen |= wrap
        wrap = sweep(0.0, sorted(seen), True)
    merged = {x: _merge(ps) for x, ps in pieces.items()}
    return DirectedCluster(origin, {x: ps for x, ps in merged.items() if ps})
