import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from condips.errors import ConfigError
from condips.kernels import RateKernel
from condips.oracle import (
    build_chain,
    initial_law,
    marginals,
    multinomial_law,
    total_variation,
    transient,
    transient_terms,
)
from condips.state import TaggedSite

IW = RateKernel.independent()
ZR = RateKernel.zero_range(4)


def test_two_sites_two_particles():
    chain = build_chain(2, 2, IW)
    assert chain.states == [(0, 2), (1, 1), (2, 0)]
    Q = chain.Q
    i = chain.index
    assert Q[i[(1, 1)], i[(0, 2)]] == 1 and Q[i[(1, 1)], i[(2, 0)]] == 1
    assert Q[i[(2, 0)], i[(1, 1)]] == 2 and Q[i[(2, 0)], i[(0, 2)]] == 0


@pytest.mark.parametrize("L,N,tagged", [(2, 2, False), (3, 3, False), (4, 3, False),
                                        (3, 3, True), (4, 2, True), (5, 4, False)])
def test_generator_structure(kernel, L, N, tagged):
    chain = build_chain(L, N, kernel, tagged=tagged)
    Q = chain.Q
    assert np.max(np.abs(Q.sum(axis=1))) < 1e-12
    off = Q - np.diag(np.diag(Q))
    assert off.min() >= 0
    if not tagged:
        from math import comb
        assert len(chain.states) == comb(N + L - 1, L - 1)


def test_tagged_single_particle():
    chain = build_chain(2, 1, IW, tagged=True)
    assert chain.states == [((0, 1), 1), ((1, 0), 0)]
    np.testing.assert_allclose(chain.Q, [[-1, 1], [1, -1]])


def test_state_guard():
    with pytest.raises(ConfigError):
        build_chain(12, 12, IW)
    with pytest.raises(ConfigError):
        build_chain(3, 0, IW, tagged=True)


def test_transient_limits():
    chain = build_chain(2, 2, IW)
    p0 = np.array([1.0, 0, 0])
    np.testing.assert_array_equal(transient(chain, p0, 0.0), p0)
    np.testing.assert_allclose(transient(chain, p0, 40.0), [0.25, 0.5, 0.25], atol=1e-12)
    with pytest.raises(ValueError):
        transient(chain, [0.5, 0.2, 0.2], 1.0)


@pytest.mark.parametrize("tagged", [False, True])
def test_transient_matches_expm(kernel, tagged):
    chain = build_chain(3, 3, kernel, tagged=tagged)
    p0 = initial_law(chain)
    for t in (0.5, 1.0, 2.0):
        ref = p0 @ expm(chain.Q * t)
        np.testing.assert_allclose(transient(chain, p0, t), ref, atol=1e-11)


def test_doubled_depth_changes_nothing(kernel):
    chain = build_chain(3, 3, kernel, tagged=True)
    p0 = initial_law(chain)
    for t in (0.5, 2.0):
        n = transient_terms(chain, p0, t)
        a = transient(chain, p0, t)
        b = transient(chain, p0, t, min_terms=2 * n)
        assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("L,N", [(2, 2), (3, 2), (3, 3), (4, 3), (4, 4)])
def test_independent_walkers_stationary_law_is_multinomial(L, N):
    chain = build_chain(L, N, IW)
    pi = multinomial_law(chain)
    assert pi.sum() == pytest.approx(1.0)
    assert np.max(np.abs(pi @ chain.Q)) < 1e-12


def test_marginal_aggregation():
    chain = build_chain(2, 2, IW)
    m = marginals(chain, np.full(3, 1 / 3))
    assert m.config_law == pytest.approx({(1, 0, 1): 2 / 3, (0, 2): 1 / 3})
    assert sum(m.config_law.values()) == pytest.approx(1.0)
    np.testing.assert_allclose(m.fk_mean, [1 / 3, 1 / 3, 1 / 3])
    assert m.w_law is None


def test_tagged_marginals_are_site_symmetric(kernel):
    chain = build_chain(3, 3, kernel, tagged=True)
    dist = transient(chain, initial_law(chain), 1.0)
    for perm in itertools.permutations(range(3)):
        for i, (eta, x) in enumerate(chain.states):
            moved = (tuple(eta[perm.index(j)] for j in range(3)), perm[x])
            assert dist[chain.index[moved]] == pytest.approx(dist[i], abs=1e-14)
    m = marginals(chain, dist)
    assert m.w_law.sum() == pytest.approx(1.0)
    assert m.w_law[0] == 0


def test_fixed_and_uniform_tag_agree_after_forgetting(kernel):
    chain = build_chain(3, 3, kernel, tagged=True)
    a = marginals(chain, initial_law(chain, TaggedSite.FIXED))
    b = marginals(chain, initial_law(chain, TaggedSite.UNIFORM))
    assert total_variation(a.config_law, b.config_law) < 1e-14
    np.testing.assert_allclose(a.w_law, b.w_law, atol=1e-14)


def test_untagged_initial_law_is_multinomial():
    chain = build_chain(3, 3, ZR)
    np.testing.assert_allclose(initial_law(chain), multinomial_law(chain), atol=1e-15)


def test_disk_cache(tmp_path):
    a = build_chain(3, 3, ZR, tagged=True, cache_dir=tmp_path)
    assert list(tmp_path.iterdir())
    b = build_chain(3, 3, ZR, tagged=True, cache_dir=tmp_path)
    np.testing.assert_array_equal(a.Q, b.Q)
    assert a.states == b.states
