import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spacetime_perc.connectivity import build_clusters, build_segments
from spacetime_perc.core import (
    Boundary,
    Configuration,
    Graph,
    IntensityEnvironment,
    LogNormal,
    PointMass,
    SpaceTimeBox,
    TwoPoint,
    parse_law,
    rescale_time,
    sample_configuration,
    sample_environment,
    sample_poisson_times,
)
from spacetime_perc.errors import CorruptConfiguration, InvalidParameter
from spacetime_perc.rng import make_rng


def test_zero_rate_gives_empty(rng):
    assert len(sample_poisson_times(0.0, 5.0, rng)) == 0


def test_poisson_count_moments(rng):
    counts = np.array([len(sample_poisson_times(2.0, 3.0, rng)) for _ in range(100_000)])
    n = len(counts)
    assert abs(counts.mean() - 6) <= 3 * math.sqrt(6 / n)
    # variance of the sample variance for Poisson(mu) is about (mu + 2 mu^2) / n
    assert abs(counts.var(ddof=1) - 6) <= 3 * math.sqrt((6 + 2 * 36) / n)


def test_poisson_empty_probability(rng):
    zero = np.mean([len(sample_poisson_times(1.0, 1.0, rng)) == 0 for _ in range(100_000)])
    p = math.exp(-1)
    assert abs(zero - p) <= 3 * math.sqrt(p * (1 - p) / 100_000)


def test_poisson_times_sorted_inside(rng):
    t = sample_poisson_times(50.0, 2.0, rng)
    assert np.all(np.diff(t) > 0) and t.min() > 0 and t.max() < 2.0


@pytest.mark.parametrize("rate,length", [(-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (np.inf, 1.0)])
def test_poisson_rejects_bad_input(rate, length, rng):
    with pytest.raises(InvalidParameter):
        sample_poisson_times(rate, length, rng)


def test_zero_rates_empty_configuration(rng):
    box = SpaceTimeBox(Graph.lattice(2, 2), 3.0)
    c = sample_configuration(box, IntensityEnvironment.homogeneous(box, 0.0, 0.0), rng)
    assert c.n_cuts == 0 and c.n_bridges == 0


def test_mean_cut_count_single_vertex(rng):
    box = SpaceTimeBox(Graph.single(), 1.0)
    env = IntensityEnvironment.homogeneous(box, 0.0, 1.0)
    counts = np.array([sample_configuration(box, env, rng).n_cuts for _ in range(100_000)])
    assert abs(counts.mean() - 1.0) <= 3 * math.sqrt(1.0 / len(counts))


def test_mean_bridge_count_one_edge(rng):
    box = SpaceTimeBox(Graph.path(2), 2.0)
    env = IntensityEnvironment.homogeneous(box, 3.0, 0.0)
    counts = np.array([sample_configuration(box, env, rng).n_bridges for _ in range(100_000)])
    assert abs(counts.mean() - 6.0) <= 3 * math.sqrt(6.0 / len(counts))


def test_counts_poisson_goodness_of_fit(rng):
    from scipy import stats

    box = SpaceTimeBox(Graph.path(3), 1.5)
    env = IntensityEnvironment.homogeneous(box, 0.8, 1.2)
    cuts = np.zeros((20_000, 3), dtype=int)
    bridges = np.zeros((20_000, 2), dtype=int)
    for i in range(len(cuts)):
        c = sample_configuration(box, env, rng)
        cuts[i] = c.cut_counts(3)
        bridges[i] = c.bridge_counts(2)
    for data, mu in ((cuts.ravel(), 1.8), (bridges.ravel(), 1.2)):
        top = 7
        obs = np.bincount(np.minimum(data, top), minlength=top + 1)
        p = stats.poisson.pmf(np.arange(top), mu)
        p = np.append(p, 1 - p.sum())
        assert stats.chisquare(obs, p * len(data)).pvalue > 1e-3


def test_cut_and_bridge_lines_independent(rng):
    box = SpaceTimeBox(Graph.path(2), 2.0)
    env = IntensityEnvironment.homogeneous(box, 1.0, 1.0)
    data = np.array([[*sample_configuration(box, env, rng).cut_counts(2), sample_configuration(box, env, rng).n_bridges] for _ in range(20_000)])
    r = np.corrcoef(data.T)
    assert np.all(np.abs(r[np.triu_indices(3, 1)]) < 4 / math.sqrt(len(data)))


def test_seed_determinism():
    box = SpaceTimeBox(Graph.lattice(3, 2), 4.0, Boundary.periodic())
    env = IntensityEnvironment.homogeneous(box, 1.3, 0.7)
    a = sample_configuration(box, env, make_rng(5, 1))
    b = sample_configuration(box, env, make_rng(5, 1))
    c = sample_configuration(box, env, make_rng(5, 2))
    assert a.identical(b)
    assert not a.identical(c)


def test_oriented_sampling_has_two_processes(rng):
    box = SpaceTimeBox(Graph.path(2), 1.0)
    env = IntensityEnvironment.homogeneous(box, 2.0, 0.0)
    owners = np.concatenate([sample_configuration(box, env, rng, oriented=True).bridge_edge for _ in range(5000)])
    fwd, rev = np.mean(owners == 0) * len(owners) / 5000, np.mean(owners == 1) * len(owners) / 5000
    assert abs(fwd - 2.0) < 0.1 and abs(rev - 2.0) < 0.1


def test_sampled_configurations_validate(rng):
    for bd in (Boundary.free(), Boundary.periodic(), Boundary.periodic_on([0, 3])):
        box = SpaceTimeBox(Graph.lattice(2, 2), 2.5, bd)
        env = IntensityEnvironment.homogeneous(box, 2.0, 2.0)
        for _ in range(50):
            sample_configuration(box, env, rng).validate(box)


def test_point_mass_environment(rng):
    box = SpaceTimeBox(Graph.path(4), 1.0)
    env = sample_environment({"kind": "point", "value": 1.0}, PointMass(0.5), box, rng)
    assert np.all(env.cut_rate == 1.0) and np.all(env.bridge_rate == 0.5)


def test_two_point_environment_fraction(rng):
    box = SpaceTimeBox(Graph.path(10_001), 1.0)
    env = sample_environment(PointMass(1.0), TwoPoint(0.1, 1.0, 0.5), box, rng)
    frac = np.mean(env.bridge_rate == 1.0)
    assert set(np.unique(env.bridge_rate)) == {0.1, 1.0}
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / box.graph.m)


def test_lognormal_environment_log_mean(rng):
    box = SpaceTimeBox(Graph.path(10_000), 1.0)
    env = sample_environment(LogNormal(0.0, 1.0), PointMass(1.0), box, rng)
    assert abs(np.log(env.cut_rate).mean()) <= 3 / math.sqrt(box.n)


@pytest.mark.parametrize("law", [{"kind": "cauchy"}, "lognormal", {"kind": "point"}, None])
def test_unsupported_law(law):
    with pytest.raises((InvalidParameter, TypeError)):
        parse_law(law)


def test_rescale_identity():
    box = SpaceTimeBox(Graph.path(2), 2.0)
    c = Configuration.from_lists({0: [0.5, 1.0]}, {0: [0.7]})
    out, b2 = rescale_time(c, box, 1.0)
    assert out.identical(c) and b2.T == box.T


def test_rescale_doubles_times():
    box = SpaceTimeBox(Graph.single(), 2.0)
    c = Configuration.from_lists({0: [0.5, 1.0]}, {})
    out, b2 = rescale_time(c, box, 2.0)
    assert out.cut_time.tolist() == [1.0, 2.0] and b2.T == 4.0


@pytest.mark.parametrize("c", [0.0, -1.0, np.nan])
def test_rescale_rejects(c):
    box = SpaceTimeBox(Graph.single(), 1.0)
    with pytest.raises(InvalidParameter):
        rescale_time(Configuration.empty(), box, c)


def test_rescale_in_law(rng):
    """(lam, delta, T) rescaled by delta matches (lam/delta, 1, delta T) in mean cluster size."""
    lam, delta, T = 1.5, 2.0, 1.5
    g = Graph.path(3)
    box_a = SpaceTimeBox(g, T)
    box_b = SpaceTimeBox(g, delta * T)
    env_a = IntensityEnvironment.homogeneous(box_a, lam, delta)
    env_b = IntensityEnvironment.homogeneous(box_b, lam / delta, 1.0)
    n = 10_000
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        c, bx = rescale_time(sample_configuration(box_a, env_a, rng), box_a, delta)
        a[i] = build_clusters(c, bx).measures.max()
        b[i] = build_clusters(sample_configuration(box_b, env_b, rng), box_b).measures.max()
    se = math.sqrt(a.var() / n + b.var() / n)
    assert abs(a.mean() - b.mean()) <= 3 * se


def test_graph_validation():
    with pytest.raises(InvalidParameter):
        Graph.from_edges(3, [(0, 1)])  # disconnected
    with pytest.raises(InvalidParameter):
        Graph.from_edges(2, [(0, 0)])
    with pytest.raises(InvalidParameter):
        Graph.from_edges(2, [(0, 1), (1, 0)])


def test_box_validation():
    with pytest.raises(InvalidParameter):
        SpaceTimeBox(Graph.single(), 0.0)
    with pytest.raises(InvalidParameter):
        SpaceTimeBox(Graph.path(2), 1.0, Boundary.periodic_on([5]))
    with pytest.raises(InvalidParameter):
        Boundary("mobius")


def test_environment_validation():
    with pytest.raises(InvalidParameter):
        IntensityEnvironment([-1.0], [])
    with pytest.raises(InvalidParameter):
        IntensityEnvironment([np.inf], [])
    box = SpaceTimeBox(Graph.path(3), 1.0)
    with pytest.raises(InvalidParameter):
        IntensityEnvironment([1.0], [1.0]).check(box)


def test_configuration_validation():
    box = SpaceTimeBox(Graph.path(2), 1.0)
    with pytest.raises(CorruptConfiguration):
        Configuration.from_lists({0: [1.0]}, {}).validate(box)
    with pytest.raises(CorruptConfiguration):
        Configuration.from_lists({0: [0.3, 0.3]}, {}).validate(box)
    with pytest.raises(CorruptConfiguration):
        Configuration.from_lists({0: [0.3]}, {0: [0.3]}).validate(box)
    with pytest.raises(CorruptConfiguration):
        Configuration.from_lists({}, {4: [0.3]}).validate(box)


@pytest.mark.parametrize("text", ["free", "periodic", "periodic_on:0,2", "periodic_on:"])
def test_boundary_describe_round_trip(text):
    assert Boundary.parse(text).describe() == text


@given(
    st.lists(st.floats(0.01, 0.99), max_size=6, unique=True),
    st.lists(st.floats(0.01, 0.99), max_size=6, unique=True),
    st.floats(0.1, 10.0),
)
def test_rescale_preserves_segment_structure(cut_times, bridge_times, c):
    box = SpaceTimeBox(Graph.path(2), 1.0)
    cfg = Configuration.from_lists({0: cut_times[:3], 1: cut_times[3:]}, {0: bridge_times})
    if set(cut_times) & set(bridge_times):
        return
    out, box2 = rescale_time(cfg, box, c)
    s1, s2 = build_segments(cfg, box), build_segments(out, box2)
    assert np.array_equal(s1.line, s2.line)
    l1, l2 = build_clusters(cfg, box), build_clusters(out, box2)
    assert l1.k == l2.k and np.array_equal(l1.labels, l2.labels)
    assert np.allclose(l2.measures, c * l1.measures)


def test_periodic_lines_have_no_endpoint_events(rng):
    box = SpaceTimeBox(Graph.path(3), 1.0, Boundary.periodic())
    env = IntensityEnvironment.homogeneous(box, 5.0, 5.0)
    for _ in range(200):
        c = sample_configuration(box, env, rng)
        t = np.concatenate([c.cut_time, c.bridge_time])
        assert np.all((t > 0) & (t < 1.0))
