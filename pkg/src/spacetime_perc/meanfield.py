"""Continuum random-cluster model on K_n x [0, beta] with circular time and
delta = 1: closed forms, the branching approximation, and simulation.

The interval I is the maximal cut-free arc through a fixed point of one
circle when the circle carries the q-weighted cut law. Its law has an atom
at beta (no cut, or a single cut) and the density

    g(u) = q^2 u exp(-beta) exp(q (beta - u)) / Z,   0 < u < beta,

which integrates to E|I| = q F_q / lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import gammaln

from .connectivity import ClusterLabeling, build_clusters
from .core import Boundary, Configuration, Graph, IntensityEnvironment, SpaceTimeBox, sample_configuration
from .errors import CapacityError, InvalidParameter, NumericError
from .rc import RCChain, RCParams

Q1_MAX_N = 5000
QN_MAX_N = 500
QUAD_POINTS = 2**14


def _check(beta, lam=0.0, q=1.0):
    if not beta > 0:
        raise InvalidParameter("beta must be positive")
    if lam < 0:
        raise InvalidParameter("lambda must be >= 0")
    if q < 1:
        raise InvalidParameter("q must be >= 1")


def F(beta: float, lam: float) -> float:
    _check(beta, lam)
    return lam * (2 * (1 - math.exp(-beta)) - beta * math.exp(-beta))


def Fq(beta: float, lam: float, q: float) -> float:
    """Mean offspring of the q-weighted branching approximation (rate lambda/q)."""
    _check(beta, lam, q)
    x = math.exp(-beta * q)  # numerator and denominator divided by e^{beta q}
    num = 2 - 2 * x + beta * q * (q - 2) * x
    den = 1 + (q - 1) * x
    return lam / q**2 * num / den


def lambda_c(beta: float, q: float) -> float:
    """lambda at which F_q = 1; for q = 2 this is 2 / tanh(beta)."""
    _check(beta, 0.0, q)
    return 1.0 / Fq(beta, 1.0, q)


def lambda_c_status(q: float) -> str:
    """How firmly the lambda_c(q) formula is established at this q."""
    if q == 1:
        return "proven"
    if q == 2:
        return "claimed"
    if 1 < q < 2:
        return "conjectured"
    return "outside-range"


def partition_Z(beta: float, q: float) -> float:
    return (q - 1) * math.exp(-beta) + math.exp(beta * (q - 1))


def cut_count_pmf(k, beta: float, q: float):
    """P(D = k) for the number of cuts on one circle under the q-weighted law."""
    _check(beta, 0.0, q)
    k = np.asarray(k)
    if np.any(k < 0):
        raise InvalidParameter("k must be >= 0")
    logp = -beta + np.maximum(k, 1) * math.log(q) + k * math.log(beta) - gammaln(k + 1) - math.log(partition_Z(beta, q))
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def _pmf_support(beta, q, tail=1e-17):
    kmax = 8
    while True:
        ks = np.arange(kmax + 1)
        p = cut_count_pmf(ks, beta, q)
        if p.sum() >= 1 - tail or kmax > 100_000:
            return ks, p
        kmax *= 2


def sample_cut_counts(beta: float, q: float, rng, size) -> np.ndarray:
    ks, p = _pmf_support(beta, q)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


def sample_weighted_interval(beta: float, q: float, rng, size=None):
    """Length of the cut-free arc through a fixed point of a q-weighted circle.

    Draws D from ``cut_count_pmf`` then places D uniform cuts on the circle.
    """
    _check(beta, 0.0, q)
    shape = () if size is None else size
    D = sample_cut_counts(beta, q, rng, int(np.prod(shape)))
    out = np.full(D.shape, float(beta))
    for d in np.unique(D):
        if d <= 1:
            continue
        idx = np.flatnonzero(D == d)
        u = rng.random((len(idx), int(d))) * beta
        out[idx] = u.min(axis=1) + (beta - u.max(axis=1))
    return float(out[0]) if size is None else out.reshape(shape)


def interval_atom(beta: float, q: float) -> float:
    """P(|I| = beta)."""
    return math.exp(-beta) * q * (1 + beta) / partition_Z(beta, q)


def interval_density(u, beta: float, q: float):
    u = np.asarray(u, dtype=float)
    return q * q * u * np.exp(-beta + q * (beta - u)) / partition_Z(beta, q)


def _quadrature(beta, q, npts=QUAD_POINTS):
    u = np.linspace(0.0, beta, npts + 1)
    return u, interval_density(u, beta, q)


def mean_interval(beta: float, q: float) -> float:
    u, g = _quadrature(beta, q)
    return beta * interval_atom(beta, q) + float(simpson(u * g, x=u))


def offspring_rate(lam: float, q: float, model: str | float) -> float:
    """``"upper"`` -> lambda, ``"product"`` -> lambda / q, or a number."""
    if model == "upper":
        return lam
    if model == "product":
        return lam / q
    if isinstance(model, (int, float)):
        return float(model)
    raise InvalidParameter(f"unknown offspring model {model!r}")


def survival_probability(
    beta: float, lam: float, q: float = 1.0, model: str | float = "upper", start: float = 1.0, damping: float = 0.5, tol: float = 1e-12
) -> float:
    """Survival probability of the branching approximation.

    Each individual owns an interval I and has Poisson(r |I|) children, so
    pi solves pi = 1 - E exp(-r |I| pi). Solved by damped iteration against
    a quadrature of the interval law.
    """
    _check(beta, lam, q)
    r = offspring_rate(lam, q, model)
    u, g = _quadrature(beta, q)
    atom = interval_atom(beta, q)
    mean = beta * atom + float(simpson(u * g, x=u))
    if r * mean <= 1:
        return 0.0

    def laplace(s):
        return atom * math.exp(-s * beta) + float(simpson(g * np.exp(-s * u), x=u))

    pi = float(start)
    for _ in range(10_000):
        new = (1 - damping) * pi + damping * (1 - laplace(r * pi))
        if abs(new - pi) < tol:
            return new
        pi = new
    raise NumericError("survival fixed point did not converge")


def simulate_branching(beta: float, lam: float, q: float, trees: int, rng, model="upper", cap: int = 60, max_gen: int = 10_000):
    """Direct simulation: fraction of trees reaching ``cap`` live individuals.

    Returns (estimate, standard error).
    """
    r = offspring_rate(lam, q, model)
    alive = np.ones(trees, dtype=np.int64)
    survived = 0
    for _ in range(max_gen):
        active = np.flatnonzero((alive > 0) & (alive < cap))
        survived += int(np.count_nonzero(alive >= cap))
        alive[alive >= cap] = 0
        if len(active) == 0:
            break
        counts = alive[active]
        lengths = sample_weighted_interval(beta, q, rng, int(counts.sum()))
        owner = np.repeat(np.arange(len(active)), counts)
        S = np.bincount(owner, weights=lengths, minlength=len(active))
        alive[active] = rng.poisson(r * S)
    else:
        survived += int(np.count_nonzero(alive > 0))
    p = survived / trees
    return p, math.sqrt(p * (1 - p) / trees)


# ---------------------------------------------------------------------------
# complete-graph simulation


@dataclass(frozen=True, eq=False)
class MeanFieldSample:
    n: int
    beta: float
    config: Configuration
    labeling: ClusterLabeling
    M: float
    M_trace: np.ndarray | None = None

    @property
    def giant_fraction(self) -> float:
        """M / n."""
        return self.M / self.n


_graphs: dict[int, Graph] = {}


def complete_box(n: int, beta: float) -> SpaceTimeBox:
    if n not in _graphs:
        _graphs.clear()
        _graphs[n] = Graph.complete(n)
    return SpaceTimeBox(_graphs[n], beta, Boundary.periodic())


def simulate_complete_graph(
    n: int, beta: float, lam: float, q: int, rng, sweeps: int = 200, burn_in: int = 100
) -> MeanFieldSample:
    """One sample of the model on K_n x [0, beta] with bridge rate lambda/n per edge.

    q = 1 is sampled directly; q >= 2 runs a Swendsen-Wang chain and also
    returns the trace of the largest cluster measure after burn-in.
    """
    _check(beta, lam, q)
    if int(q) != q:
        raise InvalidParameter("simulation needs integer q")
    limit = Q1_MAX_N if q == 1 else QN_MAX_N
    if n > limit or n < 2:
        raise CapacityError(f"n={n} outside 2..{limit} for q={q}")
    box = complete_box(n, beta)
    if q == 1:
        env = IntensityEnvironment.homogeneous(box, lam / n, 1.0)
        config = sample_configuration(box, env, rng)
        lab = build_clusters(config, box, check=False)
        return MeanFieldSample(n, beta, config, lab, float(lab.measures.max()))
    chain = RCChain(box, RCParams(lam / n, 1.0, int(q), sweeps, burn_in), rng)
    if burn_in:
        chain.run(burn_in)
    obs = chain.run(sweeps)
    st = chain.state()
    return MeanFieldSample(n, beta, st.config, st.labeling, float(st.labeling.measures.max()), obs[:, 3])


def sample_product_rc(n: int, beta: float, lam: float, q: float, rng) -> MeanFieldSample:
    """Independent q-weighted cut circles joined by Poisson((lambda/q)/n) bridges per edge."""
    _check(beta, lam, q)
    if n > Q1_MAX_N or n < 2:
        raise CapacityError(f"n={n} outside 2..{Q1_MAX_N}")
    box = complete_box(n, beta)
    D = sample_cut_counts(beta, q, rng, n)
    cut_line = np.repeat(np.arange(n, dtype=np.int64), D)
    cut_time = rng.random(int(D.sum())) * beta
    env = IntensityEnvironment(np.zeros(n), np.full(box.graph.m, lam / q / n))
    bridges = sample_configuration(box, env, rng)
    from .core import _sorted_pair

    cl, ct = _sorted_pair(cut_line, cut_time)
    config = Configuration(cl, ct, bridges.bridge_edge, bridges.bridge_time)
    lab = build_clusters(config, box, check=False)
    return MeanFieldSample(n, beta, config, lab, float(lab.measures.max()))
