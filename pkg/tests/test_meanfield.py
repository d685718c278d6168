import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize, stats

from spacetime_perc import meanfield as mf
from spacetime_perc.connectivity import build_clusters
from spacetime_perc.core import IntensityEnvironment, sample_configuration, thin_bridges
from spacetime_perc.errors import CapacityError, InvalidParameter
from spacetime_perc.oracles import min_exp_interval
from spacetime_perc.rng import make_rng

betas = st.floats(0.05, 8.0)
lams = st.floats(0.0, 10.0)
qs = st.floats(1.0, 4.0)


def test_F_examples():
    assert mf.F(1.0, 0.0) == 0.0
    assert mf.F(1.0, 1.0) == pytest.approx(2 - 3 / math.e, abs=1e-15)
    assert mf.F(50.0, 1.0) == pytest.approx(2.0, abs=1e-10)


def test_F_matches_interval_mean(rng):
    x = min_exp_interval(1.0, rng, 10**6)
    assert abs(x.mean() - mf.F(1.0, 1.0)) <= 3 * x.std() / 1000


@given(betas, lams)
def test_F1_equals_F(beta, lam):
    assert abs(mf.Fq(beta, lam, 1.0) - mf.F(beta, lam)) <= 1e-14 * max(1.0, lam)


def test_F1_equals_F_grid():
    b, l = np.meshgrid(np.linspace(0.1, 5, 10), np.linspace(0, 5, 10))
    assert max(abs(mf.Fq(x, y, 1) - mf.F(x, y)) for x, y in zip(b.ravel(), l.ravel())) <= 1e-14


def test_Fq_q2_is_half_tanh():
    assert mf.Fq(1.0, 1.0, 2.0) == pytest.approx(math.tanh(1) / 2, abs=1e-15)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_Fq_at_lambda_c2_is_one(beta):
    assert mf.Fq(beta, 2 / math.tanh(beta), 2.0) == pytest.approx(1.0, abs=1e-12)


@given(betas, qs, st.floats(0.0, 5.0), st.floats(0.01, 5.0))
def test_Fq_increasing_in_lambda(beta, q, lam, dl):
    assert mf.Fq(beta, lam + dl, q) > mf.Fq(beta, lam, q)


def test_Fq_stable_for_large_beta_q():
    v = mf.Fq(200.0, 1.0, 4.0)
    assert math.isfinite(v) and v == pytest.approx(2 / 16, rel=1e-12)


def test_lambda_c_q1_bisection():
    root = optimize.brentq(lambda l: mf.F(1.0, l) - 1, 0.1, 10, xtol=1e-14)
    assert mf.lambda_c(1.0, 1) == pytest.approx(root, abs=1e-10)
    assert mf.lambda_c(1.0, 1) == pytest.approx(1.1156, abs=1e-4)


@pytest.mark.parametrize("beta", [0.25, 1.0, 4.0])
def test_lambda_c_q2_identity(beta):
    assert mf.lambda_c(beta, 2) == pytest.approx(2 / math.tanh(beta), rel=1e-12)


def test_lambda_c_q2_value():
    assert mf.lambda_c(1.0, 2) == pytest.approx(2.6261, abs=1e-4)


def test_lambda_c_status():
    assert mf.lambda_c_status(1) == "proven"
    assert mf.lambda_c_status(1.5) == "conjectured"
    assert mf.lambda_c_status(3) == "outside-range"


def test_pmf_q1_is_poisson():
    ks = np.arange(30)
    assert np.allclose(mf.cut_count_pmf(ks, 1.7, 1.0), stats.poisson.pmf(ks, 1.7), atol=1e-15)


@pytest.mark.parametrize("beta", [0.25, 1.0, 3.0])
@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 3.0])
def test_pmf_normalized(beta, q):
    assert abs(mf.cut_count_pmf(np.arange(201), beta, q).sum() - 1) <= 1e-12


def test_pmf_q2_beta1_value():
    Z = math.exp(-1) + math.e
    assert Z == pytest.approx(3.0862, abs=1e-4)
    assert mf.cut_count_pmf(0, 1.0, 2.0) == pytest.approx(2 * math.exp(-1) / Z, abs=1e-15)
    assert mf.cut_count_pmf(0, 1.0, 2.0) == pytest.approx(0.23840, abs=1e-5)


def test_pmf_rejects_negative():
    with pytest.raises(InvalidParameter):
        mf.cut_count_pmf(-1, 1.0, 2.0)


def test_interval_q1_mean(rng):
    x = mf.sample_weighted_interval(1.0, 1.0, rng, 10**6)
    assert abs(x.mean() - (2 - 3 / math.e)) <= 3 * x.std() / 1000


def test_interval_q1_matches_min_exp(rng):
    a = mf.sample_weighted_interval(1.0, 1.0, rng, 10**5)
    b = min_exp_interval(1.0, rng, 10**5)
    assert stats.ks_2samp(a, b).pvalue > 1e-3


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("q", [1, 2, 3])
def test_interval_mean_is_q_Fq_over_lambda(beta, q):
    x = mf.sample_weighted_interval(beta, q, make_rng(5, int(10 * beta), q), 10**6)
    target = q * mf.Fq(beta, 1.0, q)
    assert abs(x.mean() - target) <= 3 * x.std() / 1000
    assert x.max() <= beta
    assert mf.mean_interval(beta, q) == pytest.approx(target, rel=1e-9)


def test_interval_law_integrates_to_one():
    from scipy.integrate import quad

    for beta, q in ((0.5, 1.0), (2.0, 3.0)):
        mass = quad(mf.interval_density, 0, beta, args=(beta, q))[0] + mf.interval_atom(beta, q)
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_survival_subcritical_zero():
    assert mf.survival_probability(1.0, 1.0, 1) == 0.0
    assert mf.survival_probability(1.0, 0.0, 2, model="product") == 0.0


def test_survival_minimal_fixed_point():
    for beta, lam, q, model in ((1.0, 2.0, 1, "upper"), (2.0, 3.0, 2, "product"), (0.5, 6.0, 1.5, "upper")):
        hi = mf.survival_probability(beta, lam, q, model, start=1.0)
        lo = mf.survival_probability(beta, lam, q, model, start=1e-3)
        assert hi > 0 and abs(hi - lo) <= 1e-10


def test_survival_continuous_at_critical():
    lc = mf.lambda_c(1.0, 1)
    pis = [mf.survival_probability(1.0, lc * f, 1) for f in (1.01, 1.1, 1.5)]
    assert 0 < pis[0] < 0.05 and pis[0] < pis[1] < pis[2]


def test_survival_matches_branching_simulation():
    pi = mf.survival_probability(1.0, 2.0, 1)
    p, se = mf.simulate_branching(1.0, 2.0, 1, 10**6, make_rng(5, 1))
    assert abs(p - pi) <= 3 * se


def test_branching_zero_lambda():
    assert mf.simulate_branching(1.0, 0.0, 1, 1000, make_rng(5, 2))[0] == 0.0


def test_offspring_rate_models():
    assert mf.offspring_rate(3.0, 2.0, "upper") == 3.0
    assert mf.offspring_rate(3.0, 2.0, "product") == 1.5
    with pytest.raises(InvalidParameter):
        mf.offspring_rate(3.0, 2.0, "sideways")


def test_complete_graph_capacity(rng):
    with pytest.raises(CapacityError):
        mf.simulate_complete_graph(600, 1.0, 1.0, 2, rng)
    with pytest.raises(CapacityError):
        mf.simulate_complete_graph(5001, 1.0, 1.0, 1, rng)


def test_complete_graph_subcritical():
    lam = 0.5 * mf.lambda_c(1.0, 1)
    m = [mf.simulate_complete_graph(2000, 1.0, lam, 1, make_rng(5, 3, r)).giant_fraction for r in range(50)]
    assert np.mean(np.array(m) <= 0.05) >= 0.95


def test_complete_graph_sample_bounds(rng):
    s = mf.simulate_complete_graph(200, 1.0, 2.0, 1, rng)
    assert 0 <= s.M <= s.n * s.beta
    assert s.labeling.measures.sum() == pytest.approx(s.n * s.beta)


def test_complete_graph_q2_separates():
    lc = 2 / math.tanh(1.0)
    lo = mf.simulate_complete_graph(300, 1.0, 0.8 * lc, 2, make_rng(5, 4)).giant_fraction
    hi = mf.simulate_complete_graph(300, 1.0, 1.2 * lc, 2, make_rng(5, 5)).giant_fraction
    assert hi - lo >= 0.1


def test_complete_graph_monotone_coupling():
    box = mf.complete_box(500, 1.0)
    env = IntensityEnvironment.homogeneous(box, 3.0 / 500, 1.0)
    rng = make_rng(5, 6)
    for _ in range(10):
        big = sample_configuration(box, env, rng)
        ms = []
        for keep in (1 / 3, 2 / 3, 1.0):
            c = thin_bridges(big, keep, make_rng(5, 7)) if keep < 1 else big
            ms.append(build_clusters(c, box, check=False).measures.max())
        assert ms[0] <= ms[1] + 1e-9 <= ms[2] + 2e-9


def test_product_q1_matches_complete_graph():
    a = [mf.sample_product_rc(1000, 1.0, 2.0, 1, make_rng(5, 8, r)).giant_fraction for r in range(50)]
    b = [mf.simulate_complete_graph(1000, 1.0, 2.0, 1, make_rng(5, 9, r)).giant_fraction for r in range(50)]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_product_supercritical_lower_bound():
    lam = 2.0 * mf.lambda_c(1.0, 2)
    pi = mf.survival_probability(1.0, lam, 2, model="product")
    m = np.array([mf.sample_product_rc(2000, 1.0, lam, 2, make_rng(5, 10, r)).giant_fraction for r in range(20)])
    assert np.mean(m >= pi - 0.05) >= 0.9


def test_product_subcritical():
    lam = 0.4 * mf.lambda_c(1.0, 2)  # F_2 = 0.4 < 1/2
    assert mf.Fq(1.0, lam, 2) < 0.5
    m = np.array([mf.sample_product_rc(2000, 1.0, lam, 2, make_rng(5, 11, r)).giant_fraction for r in range(20)])
    assert np.mean(m <= 0.05) >= 0.95
