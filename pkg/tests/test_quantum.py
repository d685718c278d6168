import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spacetime_perc import quantum as qm
from spacetime_perc.core import Graph
from spacetime_perc.errors import CapacityError, InvalidParameter, NotAState
from spacetime_perc.oracles import explicit_partial_trace
from spacetime_perc.rng import make_rng


def test_basis_bijection():
    for n in (1, 3, 5):
        idx = np.arange(2**n)
        assert [qm.index_of(qm.spins_of(i, n)) for i in idx] == idx.tolist()
    assert qm.spins_of(4, 3).tolist() == [1, -1, -1]


def test_one_vertex_hamiltonian():
    H = qm.build_hamiltonian(Graph.single(), 3.0, 1.0)
    assert np.allclose(H, [[0, -1], [-1, 0]])
    assert np.allclose(np.linalg.eigvalsh(H), [-1, 1])


def test_classical_two_vertex_diagonal():
    H = qm.build_hamiltonian(Graph.path(2), 2.0, 0.0)
    assert np.allclose(H, np.diag([-1.0, 1.0, 1.0, -1.0]))


def test_ground_energy_against_characteristic_polynomial():
    H = qm.build_hamiltonian(Graph.path(2), 2.0, 1.0)
    # characteristic polynomial via Faddeev-LeVerrier, roots by numpy
    n = 4
    c = [1.0]
    M = np.zeros_like(H)
    for k in range(1, n + 1):
        M = H @ M + c[-1] * np.eye(n)
        c.append(-np.trace(H @ M) / k)
    roots = np.sort(np.roots(c).real)
    assert qm.ground_state(Graph.path(2), 2.0, 1.0)[1] == pytest.approx(roots[0], abs=1e-10)
    assert roots[0] == pytest.approx(-math.sqrt(5), abs=1e-10)


def test_capacity_limit():
    with pytest.raises(CapacityError):
        qm.build_hamiltonian(Graph.path(13), 1.0, 1.0)


def test_gibbs_infinite_temperature():
    H = qm.build_hamiltonian(Graph.path(3), 1.0, 1.0)
    rho = qm.gibbs_operator(H, 1e-8).matrix
    assert np.max(np.abs(rho - np.eye(8) / 8)) < 1e-6


def test_gibbs_one_vertex_closed_form():
    rho = qm.gibbs_operator(qm.build_hamiltonian(Graph.single(), 0.0, 1.0), 1.0)
    assert rho.matrix[0, 0] == pytest.approx(0.5, abs=1e-14)
    assert rho.matrix[0, 1] == pytest.approx(math.tanh(1) / 2, abs=1e-12)
    assert math.tanh(1) / 2 == pytest.approx(0.3807970780, abs=1e-10)


def test_gibbs_rejects_nonsymmetric():
    with pytest.raises(InvalidParameter):
        qm.gibbs_operator(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.05, 5.0), st.integers(1, 4))
def test_gibbs_is_a_state(lam, delta, beta, n):
    rho = qm.gibbs_operator(qm.build_hamiltonian(Graph.path(n), lam, delta), beta)
    rho.check()
    assert abs(np.trace(rho.matrix) - 1) < 1e-12


def test_reduced_full_set_is_identity():
    rho = qm.gibbs_operator(qm.build_hamiltonian(Graph.path(3), 1.0, 1.0), 1.0)
    assert qm.reduced_density(rho, [0, 1, 2]).matrix is rho.matrix


def test_reduced_product_state():
    a = qm.gibbs_operator(qm.build_hamiltonian(Graph.single(), 0.0, 1.0), 0.7).matrix
    b = qm.gibbs_operator(qm.build_hamiltonian(Graph.path(2), 1.0, 0.5), 1.3).matrix
    rho = qm.DensityOperator(np.kron(a, b), (0, 1, 2))
    assert np.allclose(qm.reduced_density(rho, [0]).matrix, a, atol=1e-15)
    assert np.allclose(qm.reduced_density(rho, [1, 2]).matrix, b, atol=1e-15)


def test_reduced_middle_vertex_matches_explicit_sum():
    rho = qm.gibbs_operator(qm.build_hamiltonian(Graph.path(3), 1.0, 1.0), 1.0)
    red = qm.reduced_density(rho, [1]).matrix
    assert np.max(np.abs(red - explicit_partial_trace(rho.matrix, 3, [1]))) < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_reduced_matches_explicit_sum_random_subsets(seed, n):
    rng = make_rng(seed)
    rho = qm.gibbs_operator(qm.build_hamiltonian(Graph.path(n), rng.uniform(0, 2), rng.uniform(0, 2)), rng.uniform(0.1, 3))
    W = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
    assert np.allclose(qm.reduced_density(rho, W).matrix, explicit_partial_trace(rho.matrix, n, W), atol=1e-12)


def test_reduced_rejects_empty_and_foreign():
    rho = qm.gibbs_operator(qm.build_hamiltonian(Graph.path(2), 1.0, 1.0), 1.0)
    with pytest.raises(InvalidParameter):
        qm.reduced_density(rho, [])
    with pytest.raises(InvalidParameter):
        qm.reduced_density(rho, [5])


@given(st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_partial_trace_linear_and_trace_preserving(alpha, seed):
    rng = make_rng(seed)
    g = Graph.path(3)
    r1 = qm.gibbs_operator(qm.build_hamiltonian(g, rng.uniform(0, 2), rng.uniform(0, 2)), rng.uniform(0.1, 2))
    r2 = qm.gibbs_operator(qm.build_hamiltonian(g, rng.uniform(0, 2), rng.uniform(0, 2)), rng.uniform(0.1, 2))
    mix = qm.DensityOperator(alpha * r1.matrix + (1 - alpha) * r2.matrix, r1.sites)
    for W in ([0], [2], [0, 2], [1, 2]):
        lhs = qm.reduced_density(mix, W).matrix
        rhs = alpha * qm.reduced_density(r1, W).matrix + (1 - alpha) * qm.reduced_density(r2, W).matrix
        assert np.max(np.abs(lhs - rhs)) < 1e-12
        assert abs(np.trace(lhs) - 1) < 1e-12


def test_entropy_pure_and_mixed():
    psi = np.ones(8) / math.sqrt(8)
    assert qm.entanglement_entropy(qm.DensityOperator(np.outer(psi, psi), (0, 1, 2))) == pytest.approx(0, abs=1e-12)
    assert qm.entanglement_entropy(qm.DensityOperator(np.eye(8) / 8, (0, 1, 2))) == pytest.approx(3.0, abs=1e-12)


def test_entropy_rejects_negative_eigenvalue():
    with pytest.raises(NotAState):
        qm.entanglement_entropy(qm.DensityOperator(np.diag([1.1, -0.1]), (0,)))


def test_entropy_schmidt_oracle():
    psi, _, _ = qm.ground_state(Graph.path(2), 2.0, 1.0)
    s = np.linalg.svd(psi.reshape(2, 2), compute_uv=False) ** 2
    s = s[s > 0]
    expected = float(-np.sum(s * np.log2(s)))
    S = qm.entanglement_entropy(qm.ground_state_density(Graph.path(2), 2.0, 1.0, W=[0]))
    assert abs(S - expected) < 1e-10


@given(st.integers(0, 2**32 - 1))
def test_entropy_zero_iff_projector(seed):
    rng = make_rng(seed)
    d = 4
    V = np.linalg.qr(rng.normal(size=(d, d)))[0]
    rank = int(rng.integers(1, d + 1))
    w = rng.dirichlet(np.ones(rank))
    rho = (V[:, :rank] * w) @ V[:, :rank].T
    S = qm.entanglement_entropy(qm.DensityOperator(rho, (0, 1)))
    projector = np.allclose(rho @ rho, rho, atol=1e-8)
    assert (S < 1e-8) == projector


def test_ground_state_product_when_uncoupled():
    rho = qm.ground_state_density(Graph.path(3), 0.0, 1.0, W=[0, 1])
    assert qm.entanglement_entropy(rho) == pytest.approx(0.0, abs=1e-10)
    assert np.allclose(rho.matrix, np.full((4, 4), 0.25), atol=1e-10)


def test_ground_state_equals_large_beta_gibbs():
    g = Graph.path(2)
    gs = qm.ground_state_density(g, 1.0, 1.0).matrix
    gibbs = qm.gibbs_operator(qm.build_hamiltonian(g, 1.0, 1.0), 50.0).matrix
    assert np.max(np.abs(gs - gibbs)) < 1e-8


def test_degenerate_ground_state_warns():
    with pytest.warns(RuntimeWarning):
        qm.ground_state_density(Graph.path(2), 1.0, 0.0)


def test_sparse_ground_state_agrees_with_dense():
    g = Graph.path(11)
    psi, e0, gap = qm.ground_state(g, 0.4, 1.0)
    w = np.linalg.eigvalsh(qm.build_hamiltonian(g, 0.4, 1.0))
    assert e0 == pytest.approx(w[0], abs=1e-10)
    assert gap == pytest.approx(w[1] - w[0], abs=1e-8)


def test_entropy_sweep_nondecreasing_in_L():
    for m in range(4):
        S = [qm.entanglement_chain(L, m, 0.2, 1.0) for L in range(2, 7)]
        assert all(b >= a - 1e-12 for a, b in zip(S, S[1:]))
        assert all(0 <= s <= L + 1 for s, L in zip(S, range(2, 7)))


def test_norm_difference_properties():
    assert qm.norm_difference(2, 3, 3, 0.2, 1.0) == 0.0
    norms = [qm.norm_difference(2, m, 4, 0.2, 1.0) for m in range(4)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert max(norms) <= 2 + 1e-12


def test_operator_norm_is_spectral():
    A = np.diag([0.3, -0.7])
    assert qm.operator_norm(A) == pytest.approx(0.7)


def test_low_temperature_cauchy():
    H = qm.build_hamiltonian(Graph.path(3), 1.0, 1.0)
    mats = [qm.gibbs_operator(H, b).matrix for b in (2, 4, 8, 16)]
    diffs = [np.max(np.abs(b - a)) for a, b in zip(mats, mats[1:])]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_rc_one_vertex_elements():
    p = qm.QuantumParams(Graph.single(), 0.0, 1.0, 1.0)
    est, se = qm.rc_density_element([1], [1], p, make_rng(4, 1), sweeps=100_000)
    assert abs(est - 0.5) <= 3 * se + 1e-15
    est, se = qm.rc_density_element([1], [-1], p, make_rng(4, 2), sweeps=100_000)
    assert abs(est - math.tanh(1) / 2) <= 3 * se


def test_rc_two_vertex_all_elements():
    g = Graph.path(2)
    exact = qm.gibbs_operator(qm.build_hamiltonian(g, 1.0, 1.0), 1.0).matrix
    est = qm.rc_density_matrix(g, 1.0, 1.0, 1.0, make_rng(4, 3), sweeps=100_000, symmetrize=False)
    assert np.all(np.abs(est.z_scores(exact)) <= 3)
    asym = est.estimate - est.estimate.T
    se = np.hypot(est.stderr, est.stderr.T)
    assert np.all(np.abs(asym) <= 3 * se + 1e-15)


def test_rc_reduced_two_vertex():
    g = Graph.path(2)
    full = qm.gibbs_operator(qm.build_hamiltonian(g, 1.0, 1.0), 1.0)
    exact = qm.reduced_density(full, [0]).matrix
    p = qm.QuantumParams(g, 1.0, 1.0, 1.0)
    est = qm.rc_density_matrix(g, 1.0, 1.0, 1.0, make_rng(4, 4), W=[0], sweeps=100_000)
    assert np.all(np.abs(est.z_scores(exact)) <= 3)
    diag = np.trace(est.estimate)
    assert abs(diag - 1) <= 3 * math.sqrt(np.sum(np.diag(est.stderr) ** 2)) + 1e-12
    e, s = qm.rc_reduced_element([1], [-1], p, [0], make_rng(4, 5), sweeps=50_000)
    assert abs(e - exact[1, 0]) <= 3 * s


def test_rc_reduced_full_set_is_free_boundary():
    g = Graph.path(2)
    a = qm.rc_density_matrix(g, 1.0, 1.0, 1.0, make_rng(4, 6), W=[0, 1], sweeps=3200)
    b = qm.rc_density_matrix(g, 1.0, 1.0, 1.0, make_rng(4, 6), sweeps=3200)
    assert np.array_equal(a.estimate, b.estimate)


def test_norm_difference_mc_close_to_exact():
    exact = qm.norm_difference(1, 0, 1, 1.0, 1.0)
    mc = qm.norm_difference(1, 0, 1, 1.0, 1.0, mode="mc", beta=8.0, rng=make_rng(4, 7), sweeps=20_000)
    assert mc <= 2
    assert abs(mc - exact) < 0.1
