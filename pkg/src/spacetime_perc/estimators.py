"""Monte Carlo estimators on finite boxes: radius-crossing proxies for the
percolation probability, survival tables with exponential decay fits, and
two-point connection frequencies binned by d_q.

Boxes are centered at the origin vertex of Z^d with time height twice the
spatial radius, and the observation point sits at mid-height.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .connectivity import build_clusters, cluster_at, directed_reach
from .core import Boundary, Graph, IntensityEnvironment, Point, SpaceTimeBox, sample_configuration, sample_environment
from .errors import InsufficientData, InvalidParameter

OBSERVABLES = ("measure", "radius", "space", "time")


@dataclass(frozen=True)
class PercolationParams:
    lam: float
    delta: float = 1.0
    dim: int = 1
    directed: bool = False

    def __post_init__(self):
        if self.lam < 0 or self.delta < 0:
            raise InvalidParameter("lam and delta must be >= 0")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidParameter("dim must be a positive integer")

    def label(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"lam={self.lam:g};delta={self.delta:g};d={self.dim};{kind}"


def centered_box(radius: int, dim: int, T: float | None = None) -> tuple[SpaceTimeBox, Point]:
    """[-radius, radius]^dim x [0, T] (T = 2 radius by default) and its center point."""
    if radius < 1:
        raise InvalidParameter("box radius must be >= 1")
    g = Graph.lattice(int(radius), int(dim))
    T = float(2 * radius if T is None else T)
    return SpaceTimeBox(g, T, Boundary.free()), Point(g.n // 2, T / 2)


def observe_origin(box: SpaceTimeBox, env: IntensityEnvironment, origin: Point, rng, directed=False) -> np.ndarray:
    """(measure, radius, space extent, time extent) of the cluster of ``origin``."""
    config = sample_configuration(box, env, rng, oriented=directed)
    if directed:
        dc = directed_reach(config, box, origin)
        return np.array([dc.measure, *dc.extents(box)])
    info = cluster_at(build_clusters(config, box, check=False), origin)
    return np.array([info.measure, info.radius, info.space_extent, info.time_extent])


def observe_many(params: PercolationParams, box_radius: int, trials: int, rng, env=None, T=None) -> np.ndarray:
    """trials x 4 array of origin-cluster observables on one centered box."""
    box, origin = centered_box(box_radius, params.dim, T)
    env = env or IntensityEnvironment.homogeneous(box, params.lam, params.delta)
    out = np.empty((trials, len(OBSERVABLES)))
    for i in range(trials):
        out[i] = observe_origin(box, env, origin, rng, params.directed)
    return out


@dataclass(frozen=True)
class SurvivalRow:
    param_set: str
    level: float
    trials: int
    successes: int

    @property
    def estimate(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.trials)

    def interval(self, z=1.959964) -> tuple[float, float]:
        """Wilson score interval."""
        n, p = self.trials, self.estimate
        den = 1 + z * z / n
        mid = (p + z * z / (2 * n)) / den
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
        return max(0.0, mid - half), min(1.0, mid + half)


def survival_table(values: np.ndarray, levels, label: str) -> list[SurvivalRow]:
    values = np.asarray(values)
    return [SurvivalRow(label, float(k), len(values), int(np.count_nonzero(values >= k))) for k in levels]


def estimate_theta(params: PercolationParams, radii, trials: int, rng, box_radius=None, T=None, env=None) -> list[SurvivalRow]:
    """Frequency of {rad(C) >= R} for each R, from one box shared by all R.

    This is an upper-bound proxy for the percolation probability at finite R.
    The box has spatial radius ``box_radius`` (default max R) and height T
    (default twice the box radius); every R must fit in both directions.
    """
    radii = sorted(float(r) for r in radii)
    if not radii or radii[0] <= 0:
        raise InvalidParameter("radii must be positive")
    box_radius = int(math.ceil(radii[-1])) if box_radius is None else int(box_radius)
    height = float(2 * box_radius if T is None else T)
    if radii[-1] > box_radius or 2 * radii[-1] > height:
        raise InvalidParameter(f"R={radii[-1]:g} exceeds the box (radius {box_radius}, height {height:g})")
    obs = observe_many(params, box_radius, trials, rng, env, height)
    return survival_table(obs[:, 1], radii, params.label())


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of log P(X >= k) = a - rate * k (+ b log k)."""

    observable: str
    rate: float
    stderr: float
    intercept: float
    levels: np.ndarray
    log_survival: np.ndarray
    residuals: np.ndarray
    rows: list = field(default_factory=list)
    prefactor: bool = False

    def ci(self, level=0.95) -> tuple[float, float]:
        dof = max(len(self.levels) - (3 if self.prefactor else 2), 1)
        z = float(stats.t.ppf(0.5 + level / 2, dof))
        return self.rate - z * self.stderr, self.rate + z * self.stderr


def fit_decay(rows: list[SurvivalRow], observable: str = "", min_count: int = 5, prefactor: bool = False) -> DecayFit:
    """Ordinary least squares over cells with at least ``min_count`` successes.

    Sparse tail cells are dropped since log frequencies of a handful of
    counts are dominated by noise. With ``prefactor`` a free log k term
    absorbs power-law prefactors such as the (1 + k) of a Gamma(2) tail,
    which otherwise bias the slope low on short grids.
    """
    k = np.array([r.level for r in rows])
    s = np.array([r.successes for r in rows], dtype=float)
    n = np.array([r.trials for r in rows], dtype=float)
    if not np.any(s > 0):
        raise InsufficientData("no successes in any cell")
    use = s >= min_count
    npar = 3 if prefactor else 2
    if use.sum() < npar:
        raise InsufficientData(f"need {npar} cells with at least {min_count} successes to fit")
    if prefactor and np.any(k[use] <= 0):
        raise InvalidParameter("the prefactor fit needs positive levels")
    k, y = k[use], np.log(s[use] / n[use])
    cols = [np.ones_like(k), -k] + ([np.log(k)] if prefactor else [])
    X = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(k) - npar
    if dof > 0:
        sigma2 = float(resid @ resid) / dof
    else:
        # two cells: fall back to the sampling variance of log p-hat
        p = np.exp(y)
        sigma2 = float(np.mean((1 - p) / s[use]))
    cov = sigma2 * np.linalg.inv(X.T @ X)
    return DecayFit(observable, float(coef[1]), float(math.sqrt(cov[1, 1])), float(coef[0]), k, y, resid, rows, prefactor)


def estimate_decay_rates(
    params: PercolationParams,
    grid,
    trials: int,
    rng,
    box_radius=None,
    T=None,
    env=None,
    observables=OBSERVABLES,
    min_count: int = 5,
    prefactor: bool = False,
) -> dict[str, DecayFit]:
    """Survival tables over ``grid`` for each observable, each fitted by ``fit_decay``.

    Slopes are reported as decay rates (positive means decay). Observables
    whose cells are all zero raise InsufficientData.
    """
    grid = sorted(float(g) for g in grid)
    box_radius = int(math.ceil(grid[-1])) if box_radius is None else int(box_radius)
    obs = observe_many(params, box_radius, trials, rng, env, T)
    fits = {}
    for name in observables:
        col = obs[:, OBSERVABLES.index(name)]
        rows = survival_table(col, grid, f"{params.label()};{name}")
        fits[name] = fit_decay(rows, name, min_count, prefactor)
    return fits


def random_environment(box: SpaceTimeBox, cut_law, bridge_law, rng) -> IntensityEnvironment:
    return sample_environment(cut_law, bridge_law, box, rng)


# ---------------------------------------------------------------------------
# two-point function


def d_q(x, s, y, t, q: float, box: SpaceTimeBox) -> np.ndarray:
    """max(||x - y||, log(1 + |s - t|)^q) with the box's vertex distance."""
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    g = box.graph
    if g.coords is not None:
        space = np.abs(g.coords[x] - g.coords[y]).max(axis=1)
    else:
        space = np.array([g.distance_from(int(a))[int(b)] for a, b in zip(x, y)])
    return np.maximum(space, np.log1p(np.abs(np.asarray(s) - np.asarray(t))) ** q)


def random_pairs(box: SpaceTimeBox, npairs: int, rng) -> np.ndarray:
    """npairs x 4 array of (x, s, y, t), uniform over the box."""
    return np.stack(
        [
            rng.integers(0, box.n, npairs),
            rng.random(npairs) * box.T,
            rng.integers(0, box.n, npairs),
            rng.random(npairs) * box.T,
        ],
        axis=1,
    )


@dataclass(frozen=True)
class TwoPointRow:
    bin_lo: float
    bin_hi: float
    pairs: int
    connected: int

    @property
    def frequency(self) -> float:
        return self.connected / self.pairs if self.pairs else float("nan")


def empirical_two_point_dq(box: SpaceTimeBox, env: IntensityEnvironment, q: float, pairs, trials: int, rng, bins) -> list[TwoPointRow]:
    """Connection frequency of (x,s) <-> (y,t), binned by d_q.

    Each trial draws a fresh configuration and tests every pair in it.
    """
    if q < 1:
        raise InvalidParameter("q must be >= 1")
    pairs = np.asarray(pairs, dtype=float)
    x, s, y, t = pairs[:, 0].astype(np.int64), pairs[:, 1], pairs[:, 2].astype(np.int64), pairs[:, 3]
    dist = d_q(x, s, y, t, q, box)
    bins = np.asarray(bins, dtype=float)
    which = np.digitize(dist, bins) - 1
    nb = len(bins) - 1
    hit = np.zeros(nb, dtype=np.int64)
    tot = np.zeros(nb, dtype=np.int64)
    inside = (which >= 0) & (which < nb)
    for _ in range(trials):
        lab = build_clusters(sample_configuration(box, env, rng), box, check=False)
        same = lab.cluster_of(x, s) == lab.cluster_of(y, t)
        np.add.at(hit, which[inside], same[inside])
        np.add.at(tot, which[inside], 1)
    return [TwoPointRow(float(bins[i]), float(bins[i + 1]), int(tot[i]), int(hit[i])) for i in range(nb)]


# ---------------------------------------------------------------------------
# output

CSV_COLUMNS = ("param_set", "level", "trials", "successes", "estimate", "stderr")


def rows_to_csv(rows: list[SurvivalRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.param_set, f"{r.level:g}", r.trials, r.successes, f"{r.estimate:.17g}", f"{r.stderr:.17g}"])
    return buf.getvalue()
