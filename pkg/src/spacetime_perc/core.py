"""Space-time boxes, intensity environments and Poisson cut/bridge sampling.

A box is a finite graph G with a time interval [0, T] attached to every
vertex. Cuts live on vertex lines, bridges on edges. Configurations are
stored as flat arrays sorted by (owner, time), which keeps the large
mean-field graphs cheap while still giving per-line/per-edge access.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import engine
from .errors import InvalidParameter


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True, eq=False)
class Graph:
    """Finite simple connected graph; ``edges[i] = (x, y)`` with ``x < y``."""

    n: int
    edges: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=np.int64)
            if c.ndim == 1:
                c = c[:, None]
            object.__setattr__(self, "coords", c)

    @classmethod
    def from_edges(cls, n, edges, coords=None, validate=True) -> "Graph":
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        g = cls(int(n), e, coords)
        if validate:
            g.validate()
        return g

    @classmethod
    def single(cls) -> "Graph":
        return cls(1, np.zeros((0, 2), dtype=np.int64), np.zeros((1, 1)))

    @classmethod
    def path(cls, n: int, start: int = 0) -> "Graph":
        """Chain of ``n`` vertices with integer coordinates start..start+n-1."""
        if n < 1:
            raise InvalidParameter("path needs at least one vertex")
        e = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        return cls(n, e, np.arange(start, start + n))

    @classmethod
    def interval(cls, a: int, b: int) -> "Graph":
        """The integer interval [a, b] of Z with nearest-neighbour edges."""
        return cls.path(b - a + 1, start=a)

    @classmethod
    def lattice(cls, radius: int, dim: int) -> "Graph":
        """The box [-radius, radius]^dim of Z^dim."""
        side = 2 * radius + 1
        grid = np.indices((side,) * dim).reshape(dim, -1).T - radius
        idx = np.arange(side**dim).reshape((side,) * dim)
        edges = []
        for ax in range(dim):
            a = np.take(idx, np.arange(side - 1), axis=ax).ravel()
            b = np.take(idx, np.arange(1, side), axis=ax).ravel()
            edges.append(np.stack([a, b], axis=1))
        e = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
        return cls(side**dim, np.sort(e, axis=1), grid)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        i, j = np.triu_indices(n, k=1)
        return cls(n, np.stack([i, j], axis=1).astype(np.int64), None)

    @property
    def m(self) -> int:
        return len(self.edges)

    def validate(self) -> None:
        if self.n < 1:
            raise InvalidParameter("graph needs at least one vertex")
        e = self.edges
        if len(e):
            if e.min() < 0 or e.max() >= self.n:
                raise InvalidParameter("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise InvalidParameter("graph has a loop")
            code = e[:, 0] * self.n + e[:, 1]
            if len(np.unique(code)) != len(code):
                raise InvalidParameter("graph has multiple edges")
        if self.n > 1:
            adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(self.n, self.n))
            ncomp, _ = connected_components(adj, directed=False)
            if ncomp != 1:
                raise InvalidParameter("graph is not connected")
        if self.coords is not None and len(self.coords) != self.n:
            raise InvalidParameter("coords length differs from vertex count")

    def distance_from(self, x: int) -> np.ndarray:
        """Sup-norm coordinate distance from ``x``; graph distance without coords."""
        if self.coords is not None:
            return np.abs(self.coords - self.coords[x]).max(axis=1)
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[x] = 0
        nbrs = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        frontier = [x]
        while frontier:
            nxt = []
            for u in frontier:
                for v in nbrs[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        return dist


@dataclass(frozen=True)
class Boundary:
    """Time boundary: ``free``, ``periodic`` (all lines) or ``periodic_on``."""

    kind: str = "free"
    vertices: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in ("free", "periodic", "periodic_on"):
            raise InvalidParameter(f"unknown boundary kind {self.kind!r}")
        object.__setattr__(self, "vertices", frozenset(int(v) for v in self.vertices))

    @classmethod
    def free(cls) -> "Boundary":
        return cls("free")

    @classmethod
    def periodic(cls) -> "Boundary":
        return cls("periodic")

    @classmethod
    def periodic_on(cls, vertices) -> "Boundary":
        return cls("periodic_on", frozenset(vertices))

    def describe(self) -> str:
        if self.kind == "periodic_on":
            return "periodic_on:" + ",".join(str(v) for v in sorted(self.vertices))
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Boundary":
        if text.startswith("periodic_on"):
            _, _, rest = text.partition(":")
            vs = [int(v) for v in rest.split(",") if v.strip()]
            return cls.periodic_on(vs)
        return cls(text)


@dataclass(frozen=True, eq=False)
class SpaceTimeBox:
    graph: Graph
    T: float
    boundary: Boundary = field(default_factory=Boundary.free)

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise InvalidParameter("time length must be positive and finite")
        if self.boundary.kind == "periodic_on" and any(
            v < 0 or v >= self.graph.n for v in self.boundary.vertices
        ):
            raise InvalidParameter("periodic vertex subset not contained in the graph")
        mask = np.zeros(self.graph.n, dtype=bool)
        if self.boundary.kind == "periodic":
            mask[:] = True
        elif self.boundary.kind == "periodic_on":
            mask[list(self.boundary.vertices)] = True
        object.__setattr__(self, "periodic_mask", mask)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def edges(self) -> np.ndarray:
        return self.graph.edges

    def with_T(self, T: float) -> "SpaceTimeBox":
        return SpaceTimeBox(self.graph, T, self.boundary)

    def with_boundary(self, boundary: Boundary) -> "SpaceTimeBox":
        return SpaceTimeBox(self.graph, self.T, boundary)


class Point(NamedTuple):
    vertex: int
    time: float


@dataclass(frozen=True, eq=False)
class IntensityEnvironment:
    cut_rate: np.ndarray
    bridge_rate: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cut_rate, dtype=float).ravel()
        b = np.asarray(self.bridge_rate, dtype=float).ravel()
        for name, r in (("cut", c), ("bridge", b)):
            if np.any(~np.isfinite(r)) or np.any(r < 0):
                raise InvalidParameter(f"{name} rates must be finite and >= 0")
        object.__setattr__(self, "cut_rate", c)
        object.__setattr__(self, "bridge_rate", b)

    @classmethod
    def homogeneous(cls, box_or_graph, lam: float, delta: float) -> "IntensityEnvironment":
        g = box_or_graph.graph if isinstance(box_or_graph, SpaceTimeBox) else box_or_graph
        if lam < 0 or delta < 0:
            raise InvalidParameter("rates must be >= 0")
        return cls(np.full(g.n, float(delta)), np.full(g.m, float(lam)))

    def check(self, box: SpaceTimeBox) -> None:
        if len(self.cut_rate) != box.n or len(self.bridge_rate) != box.graph.m:
            raise InvalidParameter("environment does not match the box")


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True, eq=False)
class Configuration:
    """Cuts and bridges, sorted by (owner, time).

    With ``oriented=True`` bridge owners index oriented edges: ``e`` is
    ``edges[e]`` read x->y and ``m + e`` is the reverse orientation.
    """

    cut_line: np.ndarray
    cut_time: np.ndarray
    bridge_edge: np.ndarray
    bridge_time: np.ndarray
    oriented: bool = False

    def __post_init__(self):
        for name, dt in (
            ("cut_line", np.int64),
            ("cut_time", float),
            ("bridge_edge", np.int64),
            ("bridge_time", float),
        ):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dt).ravel())

    @classmethod
    def empty(cls, oriented=False) -> "Configuration":
        z = np.zeros(0)
        return cls(z.astype(np.int64), z, z.astype(np.int64), z, oriented)

    @classmethod
    def from_lists(cls, cuts: dict, bridges: dict, oriented=False) -> "Configuration":
        """Build from ``{vertex: times}`` and ``{edge index: times}``; sorts for you."""
        cl = [v for v, ts in cuts.items() for _ in ts]
        ct = [t for _, ts in cuts.items() for t in ts]
        be = [e for e, ts in bridges.items() for _ in ts]
        bt = [t for _, ts in bridges.items() for t in ts]
        return cls(*_sorted_pair(cl, ct), *_sorted_pair(be, bt), oriented)

    @property
    def n_cuts(self) -> int:
        return len(self.cut_time)

    @property
    def n_bridges(self) -> int:
        return len(self.bridge_time)

    def cuts_on(self, x: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.cut_line, [x, x + 1])
        return self.cut_time[lo:hi]

    def bridges_on(self, e: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.bridge_edge, [e, e + 1])
        return self.bridge_time[lo:hi]

    def cut_counts(self, n: int) -> np.ndarray:
        return np.bincount(self.cut_line, minlength=n)

    def bridge_counts(self, m: int) -> np.ndarray:
        return np.bincount(self.bridge_edge, minlength=m)

    def bridge_endpoints(self, box: SpaceTimeBox) -> tuple[np.ndarray, np.ndarray]:
        """(source, target) vertex arrays for every bridge."""
        E = box.edges
        m = len(E)
        e = self.bridge_edge
        if not self.oriented:
            return E[e, 0], E[e, 1]
        rev = e >= m
        base = np.where(rev, e - m, e)
        src = np.where(rev, E[base, 1], E[base, 0])
        dst = np.where(rev, E[base, 0], E[base, 1])
        return src, dst

    def add_cut(self, x: int, t: float) -> "Configuration":
        return Configuration(
            *_sorted_pair(np.append(self.cut_line, x), np.append(self.cut_time, t)),
            self.bridge_edge,
            self.bridge_time,
            self.oriented,
        )

    def add_bridge(self, e: int, t: float) -> "Configuration":
        return Configuration(
            self.cut_line,
            self.cut_time,
            *_sorted_pair(np.append(self.bridge_edge, e), np.append(self.bridge_time, t)),
            self.oriented,
        )

    def identical(self, other: "Configuration") -> bool:
        """Bit-level equality."""
        return (
            self.oriented == other.oriented
            and np.array_equal(self.cut_line, other.cut_line)
            and self.cut_time.tobytes() == other.cut_time.tobytes()
            and np.array_equal(self.bridge_edge, other.bridge_edge)
            and self.bridge_time.tobytes() == other.bridge_time.tobytes()
        )

    def validate(self, box: SpaceTimeBox) -> None:
        from .errors import CorruptConfiguration

        T = box.T
        for owner, times, n_owner in (
            (self.cut_line, self.cut_time, box.n),
            (self.bridge_edge, self.bridge_time, box.graph.m * (2 if self.oriented else 1)),
        ):
            if len(times) == 0:
                continue
            if owner.min() < 0 or owner.max() >= n_owner:
                raise CorruptConfiguration("event owner out of range")
            if np.any(times <= 0) or np.any(times >= T):
                raise CorruptConfiguration("event time outside (0, T)")
            same = owner[1:] == owner[:-1]
            if np.any(owner[1:] < owner[:-1]) or np.any(same & (np.diff(times) <= 0)):
                raise CorruptConfiguration("events not strictly increasing per owner")
        if _has_collision(self, box):
            raise CorruptConfiguration("bridge time coincides with a cut at an endpoint")


def _sorted_pair(owner, times):
    owner = np.asarray(owner, dtype=np.int64)
    times = np.asarray(times, dtype=float)
    order = np.lexsort((times, owner))
    return owner[order], times[order]


def _has_collision(config: Configuration, box: SpaceTimeBox) -> bool:
    common = np.intersect1d(config.cut_time, config.bridge_time)
    if len(common) == 0:
        return False
    src, dst = config.bridge_endpoints(box)
    cuts = set(zip(config.cut_line.tolist(), config.cut_time.tolist()))
    for a, b, t in zip(src.tolist(), dst.tolist(), config.bridge_time.tolist()):
        if (a, t) in cuts or (b, t) in cuts:
            return True
    return False


# ---------------------------------------------------------------------------
# sampling


def _open_uniform(rng: np.random.Generator, length: float, k: int) -> np.ndarray:
    """k i.i.d. uniform points strictly inside (0, length)."""
    t = rng.random(k) * length
    bad = (t <= 0) | (t >= length)
    while np.any(bad):
        t[bad] = rng.random(int(bad.sum())) * length
        bad = (t <= 0) | (t >= length)
    return t


def sample_poisson_times(rate: float, length: float, rng) -> np.ndarray:
    """Sorted points of a rate-``rate`` Poisson process on (0, length)."""
    if not (rate >= 0) or not np.isfinite(rate):
        raise InvalidParameter("rate must be finite and >= 0")
    if not (length > 0) or not np.isfinite(length):
        raise InvalidParameter("length must be positive")
    k = rng.poisson(rate * length)
    return np.sort(_open_uniform(rng, length, k))


def draw_with(rng, kernel, args, hint: int):
    """Run ``kernel(*args, U, 0)`` on uniforms from ``rng``, extending U until it fits."""
    U = rng.random(max(int(hint), 64))
    while True:
        out = kernel(*args, U, 0)
        if out[-1] >= 0:
            return out[:-1]
        U = np.concatenate([U, rng.random(len(U))])


def sample_events(rates: np.ndarray, length: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Independent Poisson processes with the given per-owner rates.

    Returns (owner, time) sorted by owner then time.
    """
    rates = np.ascontiguousarray(rates, dtype=float)
    hint = len(rates) + 2 * rates.sum() * length + 64
    counts, times = draw_with(rng, engine.sample_events_kernel, (rates, float(length)), hint)
    owner = np.repeat(np.arange(len(rates), dtype=np.int64), counts)
    return owner, times


def sample_configuration(
    box: SpaceTimeBox, env: IntensityEnvironment, rng, oriented: bool = False
) -> Configuration:
    """Cuts ~ Poisson(delta_x) per line, bridges ~ Poisson(lambda_e) per edge.

    ``oriented=True`` draws two independent processes per edge, one per
    orientation (contact-model bridges). Draws come from ``rng`` in a fixed
    order, so equal generator states give bit-identical configurations.
    """
    env.check(box)
    brates = np.concatenate([env.bridge_rate, env.bridge_rate]) if oriented else env.bridge_rate
    brates = np.ascontiguousarray(brates)
    hint = box.n + len(brates) + 2 * (env.cut_rate.sum() + brates.sum()) * box.T + 64
    cut_off, cut_t, b_edge, b_t = draw_with(
        rng, engine.sample_config_kernel, (env.cut_rate, brates, box.edges, float(box.T)), hint
    )
    cut_line = np.repeat(np.arange(box.n, dtype=np.int64), np.diff(cut_off))
    return Configuration(cut_line, cut_t, b_edge, b_t, oriented)


# ---------------------------------------------------------------------------
# random environments


@dataclass(frozen=True)
class PointMass:
    value: float

    def sample(self, rng, size):
        return np.full(size, float(self.value))


@dataclass(frozen=True)
class LogNormal:
    loc: float
    scale: float

    def sample(self, rng, size):
        return rng.lognormal(self.loc, self.scale, size)


@dataclass(frozen=True)
class TwoPoint:
    """``low`` with probability ``1 - p_high``, else ``high``."""

    low: float
    high: float
    p_high: float = 0.5

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.p_high, float(self.high), float(self.low))


_LAWS = {"point": PointMass, "lognormal": LogNormal, "two_point": TwoPoint}


def parse_law(law):
    """Accept a law object or a dict such as ``{"kind": "lognormal", "loc": 0, "scale": 1}``."""
    if isinstance(law, (PointMass, LogNormal, TwoPoint)):
        return law
    if isinstance(law, dict) and law.get("kind") in _LAWS:
        kw = {k: v for k, v in law.items() if k != "kind"}
        return _LAWS[law["kind"]](**kw)
    raise InvalidParameter(f"unsupported distribution {law!r}")


def sample_environment(cut_law, bridge_law, box: SpaceTimeBox, rng) -> IntensityEnvironment:
    cut_law, bridge_law = parse_law(cut_law), parse_law(bridge_law)
    delta = cut_law.sample(rng, box.n)
    lam = bridge_law.sample(rng, box.graph.m)
    return IntensityEnvironment(delta, lam)


def rescale_time(config: Configuration, box: SpaceTimeBox, c: float) -> tuple[Configuration, SpaceTimeBox]:
    if not (c > 0) or not np.isfinite(c):
        raise InvalidParameter("scale factor must be positive")
    out = Configuration(config.cut_line, config.cut_time * c, config.bridge_edge, config.bridge_time * c, config.oriented)
    return out, box.with_T(box.T * c)


def thin_bridges(config: Configuration, keep_prob: float, rng) -> Configuration:
    """Keep each bridge independently with probability ``keep_prob``."""
    keep = rng.random(config.n_bridges) < keep_prob
    return Configuration(
        config.cut_line, config.cut_time, config.bridge_edge[keep], config.bridge_time[keep], config.oriented
    )
