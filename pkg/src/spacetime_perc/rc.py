"""Continuum random-cluster sampling for integer q >= 1.

The chain alternates, Swendsen-Wang style, between the spin field and the
cut/bridge configuration:

* given spins, the new cuts are the spin jump points together with fresh
  Poisson(delta) cuts, and bridges are Poisson(lambda) restricted to the
  times where the two endpoint spins agree;
* given the configuration, every cluster gets an independent uniform spin.

For q = 1 the first half-step is exactly a fresh percolation draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .connectivity import ClusterLabeling, Segments, build_clusters, build_segments
from .core import (
    Configuration,
    IntensityEnvironment,
    SpaceTimeBox,
    _sorted_pair,
    sample_configuration,
)
from .errors import ConsistencyError, InvalidParameter


@dataclass(frozen=True)
class RCParams:
    lam: float
    delta: float
    q: int = 2
    sweeps: int = 10_000
    burn_in: int = 1_000

    def __post_init__(self):
        if self.lam < 0 or not (self.delta > 0):
            raise InvalidParameter("need lam >= 0 and delta > 0")
        if int(self.q) != self.q or self.q < 1:
            raise InvalidParameter("the sampler needs an integer q >= 1")
        if self.sweeps < 1 or self.burn_in < 0:
            raise InvalidParameter("sweeps must be positive and burn-in nonnegative")

    def environment(self, box: SpaceTimeBox) -> IntensityEnvironment:
        return IntensityEnvironment.homogeneous(box, self.lam, self.delta)


@dataclass(frozen=True, eq=False)
class SpinField:
    """Spin per cut-free segment of the generating configuration."""

    segments: Segments
    seg_spin: np.ndarray
    q: int

    def spin_at(self, lines, times) -> np.ndarray:
        return self.seg_spin[self.segments.locate(lines, times)]

    def jump_mask(self) -> np.ndarray:
        """Which cuts of the configuration are spin discontinuities."""
        s = self.segments
        if len(s.config.cut_line) == 0:
            return np.zeros(0, dtype=bool)
        return self.seg_spin[s.before_cut()] != self.seg_spin[s.after_cut()]

    def jump_times(self, x: int) -> np.ndarray:
        c = self.segments.config
        return c.cut_time[(c.cut_line == x) & self.jump_mask()]

    def pieces(self, x: int) -> list[tuple[float, float, int]]:
        """Maximal constant pieces ``(a, b, spin)`` covering [0, T] on line x."""
        s = self.segments
        T = s.box.T
        raw = []
        for i in range(s.offset[x], s.offset[x + 1]):
            a, b, sp = float(s.start[i]), float(s.end[i]), int(self.seg_spin[i])
            if b > T:
                # the wrapped segment ends at the first cut of the line; read
                # it back exactly rather than as (t + T) - T
                raw.append((a, T, sp))
                raw.append((0.0, float(s.config.cut_time[s.cut_start[x]]), sp))
            else:
                raw.append((a, b, sp))
        raw.sort()
        out = []
        for a, b, sp in raw:
            if b <= a:
                continue
            if out and out[-1][2] == sp and out[-1][1] == a:
                out[-1] = (out[-1][0], b, sp)
            else:
                out.append((a, b, sp))
        return out


@dataclass(frozen=True, eq=False)
class RCState:
    config: Configuration
    labeling: ClusterLabeling
    spins: SpinField


def color_clusters(labeling: ClusterLabeling, q: int, rng) -> SpinField:
    """Independent uniform spin in 1..q for each cluster."""
    if int(q) != q or q < 1:
        raise InvalidParameter("q must be an integer >= 1")
    colors = rng.integers(1, q + 1, size=labeling.k)
    return SpinField(labeling.segments, colors[labeling.labels], int(q))


def initial_state(box: SpaceTimeBox, params: RCParams, rng, env: IntensityEnvironment | None = None) -> RCState:
    env = env or params.environment(box)
    config = sample_configuration(box, env, rng)
    lab = build_clusters(config, box, check=False)
    return RCState(config, lab, color_clusters(lab, params.q, rng))


def check_state(state: RCState, box: SpaceTimeBox) -> None:
    """Spins constant on clusters, and the field built on this configuration."""
    spins, config = state.spins, state.config
    if spins.segments.config is not config:
        raise ConsistencyError("spin field was built on a different configuration")
    from .connectivity import bridge_segment_pairs

    a, b = bridge_segment_pairs(config, box, spins.segments)
    if np.any(spins.seg_spin[a] != spins.seg_spin[b]):
        raise ConsistencyError("spin field is not constant on clusters")


class RCChain:
    """A Swendsen-Wang chain held in flat arrays and advanced by compiled sweeps.

    The chain owns its generator and a buffer of uniforms read from it.
    """

    def __init__(self, box: SpaceTimeBox, params: RCParams, rng, env=None, state: RCState | None = None, block=8192):
        self.box, self.params, self.rng = box, params, rng
        self.env = env or params.environment(box)
        self.env.check(box)
        if state is None:
            state = initial_state(box, params, rng, self.env)
        c = state.config
        if c.oriented:
            raise InvalidParameter("the random-cluster chain uses unoriented bridges")
        self.cut_off = np.concatenate([[0], np.cumsum(np.bincount(c.cut_line, minlength=box.n))]).astype(np.int64)
        self.cut_t = np.ascontiguousarray(c.cut_time)
        self.b_edge = np.ascontiguousarray(c.bridge_edge)
        self.b_t = np.ascontiguousarray(c.bridge_time)
        self.seg_spin = np.ascontiguousarray(state.spins.seg_spin, dtype=np.int64)
        self.block = int(block)
        self.U = np.zeros(0)
        self.pos = 0
        self.sweeps_done = 0

    @property
    def n_obs(self) -> int:
        return engine.N_OBS

    def run(self, nsweeps: int, record_ends: bool = False) -> np.ndarray:
        """Advance ``nsweeps`` sweeps; one row of observables per sweep.

        Columns: cut count, bridge count, cluster count, largest cluster
        measure, sum of squared cluster measures, spin jump count, then
        (with ``record_ends``) the cluster labels of (x, 0) and (x, T).
        """
        box, p = self.box, self.params
        ncol = engine.N_OBS + (2 * box.n if record_ends else 0)
        obs = np.zeros((nsweeps, ncol))
        done = 0
        stalls = 0
        while done < nsweeps:
            if self.pos >= len(self.U) - 8:
                self._refill()
            out = engine.run_kernel(
                box.n, box.edges, box.periodic_mask, float(box.T), self.env.cut_rate, self.env.bridge_rate,
                int(p.q), self.cut_off, self.cut_t, self.b_edge, self.b_t, self.seg_spin,
                self.U, self.pos, nsweeps - done, record_ends, obs[done:],
            )
            self.cut_off, self.cut_t, self.b_edge, self.b_t, self.seg_spin, self.pos, d = out
            done += d
            if done < nsweeps:
                stalls = stalls + 1 if d == 0 else 0
                if stalls > 1:
                    self.block *= 2
                self._refill()
        self.sweeps_done += nsweeps
        return obs

    def _refill(self):
        self.U = np.concatenate([self.U[self.pos:], self.rng.random(self.block)])
        self.pos = 0

    def configuration(self) -> Configuration:
        line = np.repeat(np.arange(self.box.n, dtype=np.int64), np.diff(self.cut_off))
        return Configuration(line, self.cut_t.copy(), self.b_edge.copy(), self.b_t.copy())

    def state(self) -> RCState:
        config = self.configuration()
        segs = build_segments(config, self.box)
        lab = build_clusters(config, self.box, segs, check=False)
        return RCState(config, lab, SpinField(segs, self.seg_spin.copy(), int(self.params.q)))


def sw_sweep(
    state: RCState,
    box: SpaceTimeBox,
    params: RCParams,
    rng,
    env: IntensityEnvironment | None = None,
    check: bool = False,
) -> RCState:
    """One alternation: resample cuts/bridges given spins, then recolour clusters."""
    if check:
        check_state(state, box)
    env = env or params.environment(box)
    hint = box.n + box.graph.m + 2 * (env.cut_rate.sum() + env.bridge_rate.sum()) * box.T + state.labeling.k + 64
    chain = RCChain(box, params, rng, env, state, block=int(hint))
    chain.run(1)
    return chain.state()


def iterate_chain(state: RCState, box: SpaceTimeBox, params: RCParams, rng, n: int, env=None):
    chain = RCChain(box, params, rng, env, state)
    for _ in range(n):
        chain.run(1)
        yield chain.state()


def sample_rc(box: SpaceTimeBox, params: RCParams, rng, env=None) -> RCState:
    """Final state after ``burn_in + sweeps`` sweeps from a q=1 start."""
    chain = RCChain(box, params, rng, env)
    chain.run(params.burn_in + params.sweeps)
    return chain.state()


def spin_log_density(spins: SpinField, box: SpaceTimeBox, lam: float = 0.0, delta: float = 0.0) -> tuple[float, int]:
    """(L, |D|): total agreement time over edges and the number of spin jumps.

    These are the sufficient statistics of the spin law, whose density
    against Poisson(delta) jump sets is proportional to exp(lam * L).
    """
    s = spins.segments
    T = box.T
    E = box.edges
    jumps = int(np.count_nonzero(spins.jump_mask()))
    if len(E) == 0:
        return 0.0, jumps
    c = s.config
    # breakpoints per edge: cuts on either endpoint plus 0 and T
    ids, times = [np.arange(len(E)), np.arange(len(E))], [np.zeros(len(E)), np.full(len(E), T)]
    for col in (0, 1):
        ends = E[:, col]
        cnt = s.ncut[ends]
        eid = np.repeat(np.arange(len(E)), cnt)
        first = np.repeat(s.cut_start[ends], cnt)
        rank = np.arange(len(eid)) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        ids.append(eid)
        times.append(c.cut_time[first + rank])
    eid, t = _sorted_pair(np.concatenate(ids), np.concatenate(times))
    same = eid[1:] == eid[:-1]
    a, b, e = t[:-1][same], t[1:][same], eid[:-1][same]
    mid = 0.5 * (a + b)
    agree = spins.spin_at(E[e, 0], mid) == spins.spin_at(E[e, 1], mid)
    return float(np.sum((b - a)[agree])), jumps


def spins_from_pieces(config: Configuration, box: SpaceTimeBox, pieces: dict, q: int) -> SpinField:
    """Rebuild a field from ``{x: [(a, b, s), ...]}`` records."""
    segs = build_segments(config, box)
    seg_spin = np.zeros(len(segs), dtype=np.int64)
    mid = (0.5 * (segs.start + segs.end)) % box.T
    for i in range(len(segs)):
        for a, b, sp in pieces.get(int(segs.line[i]), ()):
            if a <= mid[i] < b:
                seg_spin[i] = sp
                break
    if np.any(seg_spin < 1) or np.any(seg_spin > q):
        raise ConsistencyError("spin pieces do not cover every segment with a valid spin")
    return SpinField(segs, seg_spin, q)


def state_from(config: Configuration, spins: SpinField, box: SpaceTimeBox) -> RCState:
    return RCState(config, build_clusters(config, box, spins.segments), spins)
