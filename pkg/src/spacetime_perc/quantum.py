"""Transverse-field quantum Ising model: exact linear algebra and the
random-cluster (q = 2) path-integral estimators of the same matrices.

Basis convention: for a vertex list (v_0, ..., v_{n-1}) the basis index of a
spin vector eta is sum_x b_x 2^(n-1-x) with b_x = 1 meaning eta_x = +1, so
v_0 is the most significant bit and tensor factors follow vertex order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import eigsh

from .core import Boundary, Graph, SpaceTimeBox
from .errors import CapacityError, InsufficientData, InvalidParameter, NotAState
from .rc import RCChain, RCParams

DENSE_LIMIT = 12
SPARSE_LIMIT = 16
DENSE_GROUND = 10  # ground states above this size use the sparse Lanczos solver


@dataclass(frozen=True)
class QuantumParams:
    graph: Graph
    lam: float
    delta: float
    beta: float = 1.0

    def __post_init__(self):
        if self.lam < 0 or self.delta < 0:
            raise InvalidParameter("lam and delta must be >= 0")
        if not self.beta > 0:
            raise InvalidParameter("beta must be positive")


# ---------------------------------------------------------------------------
# basis


def spins_of(index, n: int) -> np.ndarray:
    """+-1 spin vector(s) of basis index(es) over n sites."""
    idx = np.asarray(index)
    bits = (idx[..., None] >> np.arange(n - 1, -1, -1)) & 1
    return 2 * bits - 1


def index_of(eta) -> int:
    eta = np.asarray(eta)
    bits = (eta > 0).astype(np.int64)
    return int(bits @ (1 << np.arange(len(bits) - 1, -1, -1)))


# ---------------------------------------------------------------------------
# density operators


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray
    sites: tuple

    @property
    def n(self) -> int:
        return len(self.sites)

    def check(self, sym_tol=1e-12, psd_tol=1e-10, trace_tol=1e-10) -> None:
        a = self.matrix
        if a.shape != (2**self.n, 2**self.n):
            raise NotAState("dimension does not match the site count")
        if np.max(np.abs(a - a.T), initial=0.0) > sym_tol:
            raise NotAState("matrix is not symmetric")
        if np.linalg.eigvalsh(a).min() < -psd_tol:
            raise NotAState("matrix is not positive semidefinite")
        if abs(np.trace(a) - 1) > trace_tol:
            raise NotAState("trace differs from 1")


def _capacity(n: int, limit: int) -> None:
    if n > limit:
        raise CapacityError(f"{n} spins exceed the limit of {limit} for exact computation")


def _diag_energy(graph: Graph, lam: float) -> np.ndarray:
    s = spins_of(np.arange(2**graph.n), graph.n)
    if graph.m == 0:
        return np.zeros(2**graph.n)
    e = graph.edges
    return -0.5 * lam * np.sum(s[:, e[:, 0]] * s[:, e[:, 1]], axis=1)


def build_hamiltonian(graph: Graph, lam: float, delta: float, sparse_ok: bool = False):
    """H = -(lam/2) sum_edges Z_x Z_y - delta sum_x X_x in the Z product basis."""
    n = graph.n
    _capacity(n, SPARSE_LIMIT if sparse_ok else DENSE_LIMIT)
    dim = 2**n
    diag = _diag_energy(graph, lam)
    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [diag]
    for x in range(n):
        flip = np.arange(dim) ^ (1 << (n - 1 - x))
        rows.append(np.arange(dim))
        cols.append(flip)
        vals.append(np.full(dim, -float(delta)))
    H = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    if sparse_ok and n > DENSE_LIMIT:
        return H
    return H.toarray()


def gibbs_operator(H: np.ndarray, beta: float, sites=None) -> DensityOperator:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or not np.allclose(H, H.T, atol=1e-12):
        raise InvalidParameter("Hamiltonian must be a real symmetric matrix")
    if not beta > 0:
        raise InvalidParameter("beta must be positive")
    w, V = np.linalg.eigh(H)
    p = np.exp(-beta * (w - w.min()))
    p /= p.sum()
    rho = (V * p) @ V.T
    rho = 0.5 * (rho + rho.T)
    n = int(round(np.log2(H.shape[0])))
    return DensityOperator(rho, tuple(range(n)) if sites is None else tuple(sites))


def reduced_density(rho: DensityOperator, W) -> DensityOperator:
    """Partial trace over the sites of ``rho`` not in W."""
    W = [int(w) for w in W]
    if not W:
        raise InvalidParameter("W must be nonempty")
    pos = {s: i for i, s in enumerate(rho.sites)}
    if any(w not in pos for w in W) or len(set(W)) != len(W):
        raise InvalidParameter("W must be a subset of the operator's sites")
    keep = sorted(pos[w] for w in W)
    n = rho.n
    if len(keep) == n:
        return rho
    t = rho.matrix.reshape([2] * (2 * n))
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    red = np.einsum(t, row + col, out)
    d = 2 ** len(keep)
    sites = tuple(rho.sites[i] for i in keep)
    return DensityOperator(red.reshape(d, d), sites)


def entanglement_entropy(rhoW: DensityOperator) -> float:
    """von Neumann entropy in bits."""
    p = np.linalg.eigvalsh(rhoW.matrix)
    if p.min() < -1e-8:
        raise NotAState(f"negative eigenvalue {p.min():.3g}")
    p = p[p > 1e-14]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def ground_state(graph: Graph, lam: float, delta: float) -> tuple[np.ndarray, float, float]:
    """(ground vector, ground energy, spectral gap)."""
    n = graph.n
    _capacity(n, SPARSE_LIMIT)
    if n <= DENSE_GROUND:
        w, V = np.linalg.eigh(build_hamiltonian(graph, lam, delta))
        psi, e0 = V[:, 0], w[0]
        gap = w[1] - w[0] if len(w) > 1 else np.inf
    else:
        H = build_hamiltonian(graph, lam, delta, sparse_ok=True)
        if not sparse.issparse(H):
            H = sparse.csr_matrix(H)
        w, V = eigsh(H, k=2, which="SA", tol=1e-13, v0=np.ones(H.shape[0]))
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        psi, e0, gap = V[:, 0], w[0], w[1] - w[0]
    return psi, float(e0), float(gap)


def ground_state_density(graph: Graph, lam: float, delta: float, W=None) -> DensityOperator:
    psi, _, gap = ground_state(graph, lam, delta)
    if gap < 1e-10:
        warnings.warn("ground space is degenerate; returning one ground vector", RuntimeWarning)
    psi = psi / np.linalg.norm(psi)
    rho = DensityOperator(np.outer(psi, psi), tuple(range(graph.n)))
    return rho if W is None else reduced_density(rho, W)


def operator_norm(A: np.ndarray) -> float:
    """sup over unit psi of |<psi|A|psi>|, i.e. the spectral norm of symmetric A."""
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return float(np.max(np.abs(w)))


def chain_reduced_ground(L: int, m: int, lam: float, delta: float) -> DensityOperator:
    """Ground-state reduced matrix of W = [0, L] inside V = [-m, m + L]."""
    g = Graph.interval(-m, m + L)
    return ground_state_density(g, lam, delta, W=range(m, m + L + 1))


def entanglement_chain(L: int, m: int, lam: float, delta: float) -> float:
    return entanglement_entropy(chain_reduced_ground(L, m, lam, delta))


# ---------------------------------------------------------------------------
# random-cluster estimators


@dataclass(frozen=True)
class MCMatrix:
    """Monte Carlo estimate of a (reduced) density matrix."""

    estimate: np.ndarray
    stderr: np.ndarray
    sites: tuple
    sweeps: int

    def z_scores(self, exact: np.ndarray) -> np.ndarray:
        """Elements fixed exactly by symmetry have zero error and score 0 when they match."""
        diff = self.estimate - exact
        exact_hit = self.stderr <= 1e-15
        with np.errstate(divide="ignore", invalid="ignore"):
            z = diff / self.stderr
        return np.where(exact_hit, np.where(np.abs(diff) <= 1e-10, 0.0, np.inf), z)

    def element(self, eta, eta_prime) -> tuple[float, float]:
        """<eta'| rho |eta> and its standard error."""
        r, c = index_of(eta_prime), index_of(eta)
        return float(self.estimate[r, c]), float(self.stderr[r, c])


def _pattern_weights(patterns: np.ndarray, w: int) -> np.ndarray:
    """Conditional probabilities P(sigma_0 = eta, sigma_beta = eta' | clusters).

    ``patterns[p]`` holds the cluster labels of (x, 0), (x, beta) for the w
    sites; the result has shape (P, 2^w, 2^w) indexed [p, eta', eta].
    """
    dim = 2**w
    s = spins_of(np.arange(dim), w)  # (dim, w)
    out = np.zeros((len(patterns), dim, dim))
    for p, lab in enumerate(patterns):
        lab0, labb = lab[0::2], lab[1::2]
        allab = np.concatenate([lab0, labb])
        uniq, inv = np.unique(allab, return_inverse=True)
        weight = 0.5 ** len(uniq)
        # spins demanded at each endpoint: eta at time 0 (cols), eta' at beta (rows)
        req = np.concatenate(
            [np.broadcast_to(s[None, :, :], (dim, dim, w)), np.broadcast_to(s[:, None, :], (dim, dim, w))], axis=2
        )
        ok = np.ones((dim, dim), dtype=bool)
        for u in range(len(uniq)):
            members = np.flatnonzero(inv == u)
            if len(members) > 1:
                ok &= np.all(req[:, :, members] == req[:, :, members[:1]], axis=2)
        out[p] = np.where(ok, weight, 0.0)
    return out


def rc_density_matrix(
    graph: Graph,
    lam: float,
    delta: float,
    beta: float,
    rng,
    W=None,
    sweeps: int = 100_000,
    burn_in: int = 1_000,
    batches: int = 32,
    symmetrize: bool = True,
) -> MCMatrix:
    """Estimate rho_G(beta), or its reduction to W, from one q = 2 chain.

    For a strict subset W the lines outside W are periodic in time. Per sweep
    the spin average given the clusters is taken exactly, and numerator and
    denominator come from the same sweeps; errors are batch-means with the
    delta method. ``symmetrize`` averages with the time-reversed estimate,
    an exact symmetry of the measure.
    """
    if W is None:
        W = list(range(graph.n))
    W = sorted(int(w) for w in W)
    if not W or any(w < 0 or w >= graph.n for w in W):
        raise InvalidParameter("W must be a nonempty subset of the vertices")
    outside = sorted(set(range(graph.n)) - set(W))
    boundary = Boundary.periodic_on(outside) if outside else Boundary.free()
    box = SpaceTimeBox(graph, beta, boundary)
    params = RCParams(lam, delta, 2, sweeps, burn_in)
    chain = RCChain(box, params, rng)
    if burn_in:
        chain.run(burn_in)
    per = sweeps // batches
    if per < 1:
        raise InvalidParameter("need at least one sweep per batch")
    obs = chain.run(per * batches, record_ends=True)
    cols = np.ravel([[chain.n_obs + 2 * x, chain.n_obs + 2 * x + 1] for x in W])
    ends = obs[:, cols].astype(np.int64)
    patterns, inv = np.unique(ends, axis=0, return_inverse=True)
    inv = inv.ravel()
    weights = _pattern_weights(patterns, len(W))
    if symmetrize:
        weights = 0.5 * (weights + weights.transpose(0, 2, 1))
    batch = np.repeat(np.arange(batches), per)
    counts = np.zeros((batches, len(patterns)))
    np.add.at(counts, (batch, inv), 1.0)
    num = np.einsum("bp,pij->bij", counts / per, weights)  # per-batch numerators
    den = np.trace(num, axis1=1, axis2=2)
    if np.any(den.mean() <= 0):
        raise InsufficientData("denominator frequency is zero")
    R = num.mean(axis=0) / den.mean()
    resid = num - R[None] * den[:, None, None]
    se = resid.std(axis=0, ddof=1) / np.sqrt(batches) / den.mean()
    return MCMatrix(R, se, tuple(W), per * batches)


def rc_density_element(eta, eta_prime, params: QuantumParams, rng, **mc) -> tuple[float, float]:
    m = rc_density_matrix(params.graph, params.lam, params.delta, params.beta, rng, **mc)
    return m.element(eta, eta_prime)


def rc_reduced_element(eta, eta_prime, params: QuantumParams, W, rng, **mc) -> tuple[float, float]:
    m = rc_density_matrix(params.graph, params.lam, params.delta, params.beta, rng, W=W, **mc)
    return m.element(eta, eta_prime)


def norm_difference(L: int, m: int, n: int, lam: float, delta: float, mode: str = "exact", beta=None, rng=None, **mc) -> float:
    """||rho_m^L - rho_n^L|| for chains V_k = [-k, k + L], W = [0, L]."""
    if m == n:
        return 0.0
    if mode == "exact":
        a = chain_reduced_ground(L, m, lam, delta).matrix
        b = chain_reduced_ground(L, n, lam, delta).matrix
        return operator_norm(a - b)
    if mode == "mc":
        if beta is None or rng is None:
            raise InvalidParameter("MC mode needs beta and rng")
        mats = []
        for k in (m, n):
            g = Graph.interval(-k, k + L)
            _capacity(g.n, DENSE_LIMIT)
            mats.append(rc_density_matrix(g, lam, delta, beta, rng, W=range(k, k + L + 1), **mc).estimate)
        return operator_norm(mats[0] - mats[1])
    raise InvalidParameter(f"unknown mode {mode!r}")
