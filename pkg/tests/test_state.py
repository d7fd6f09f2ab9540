import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from condips.errors import InvalidLatticeError
from condips.state import (
    ClassConfig,
    InitScheme,
    TaggedSite,
    TaggedState,
    empirical_measure,
    moment,
    sample_config,
    sample_initial,
)


def test_class_config_basics():
    cfg = ClassConfig.from_occupations([0, 2, 1, 0, 3])
    assert cfg.L == 5 and cfg.N == 6
    assert cfg.to_dict() == {0: 2, 1: 1, 2: 1, 3: 1}
    assert cfg == ClassConfig.from_dict({0: 2, 1: 1, 2: 1, 3: 1})
    assert hash(cfg) == hash(ClassConfig(np.array([2, 1, 1, 1, 0, 0])))
    assert cfg.add_site(3).n(3) == 2
    assert cfg.remove_site(0).L == 4
    with pytest.raises(ValueError):
        cfg.remove_site(7)
    with pytest.raises(ValueError):
        ClassConfig(np.array([1, -1]))
    assert not cfg.counts.flags.writeable


def test_tagged_state_totals():
    st_ = TaggedState(ClassConfig.from_dict({0: 1, 2: 1}), 3)
    assert st_.L == 3 and st_.N == 5
    assert st_.full() == ClassConfig.from_occupations([0, 2, 3])
    with pytest.raises(ValueError):
        TaggedState(ClassConfig.from_dict({0: 1}), 0)


def test_sample_initial_single_particle(rng):
    st_ = sample_initial(2, 1, InitScheme(tagged=TaggedSite.FIXED), rng)
    assert st_.W == 1 and st_.env == ClassConfig.from_dict({0: 1})


def test_sample_initial_errors(rng):
    with pytest.raises(InvalidLatticeError):
        sample_initial(1, 3, InitScheme(), rng)
    with pytest.raises(InvalidLatticeError):
        sample_initial(4, 0, InitScheme(), rng)
    with pytest.raises(ValueError):
        InitScheme(tagged=TaggedSite.MAX)


def test_max_site_scheme_tags_a_largest_site(rng):
    scheme = InitScheme(tagged=TaggedSite.MAX, allow_max_site=True)
    for _ in range(20):
        st_ = sample_initial(50, 100, scheme, rng)
        assert st_.W >= st_.env.max_occupation


def test_background_is_binomial(rng):
    L = N = 10**4
    st_ = sample_initial(L, N, InitScheme(), rng)
    # background occupations: env sites plus the tagged site minus the tag
    counts = st_.env.add_site(st_.W - 1).counts
    for k in range(6):
        p = binom.pmf(k, N - 1, 1 / L)
        sd = np.sqrt(L * p * (1 - p))
        assert abs(counts[k] - L * p) < 3 * sd + 1


def test_initial_w_law_matches_enumeration():
    # exact law of W(0) for L = 3, N = 3, uniform tagged site
    law = {}
    for placement in itertools.product(range(3), repeat=2):
        for x in range(3):
            eta = np.bincount(placement, minlength=3)
            w = int(eta[x]) + 1
            law[w] = law.get(w, 0) + Fraction(1, 27)
    rng = np.random.default_rng(1)
    n = 10**5
    ws = np.array([sample_initial(3, 3, InitScheme(tagged=TaggedSite.UNIFORM), rng).W
                   for _ in range(n)])
    for w, p in law.items():
        est = np.mean(ws == w)
        assert abs(est - float(p)) < 4 * np.sqrt(float(p) * (1 - float(p)) / n)
    assert law[1] == Fraction(4, 9)


def test_sample_config_conserves(rng):
    cfg = sample_config(37, 80, rng)
    assert cfg.L == 37 and cfg.N == 80


def test_empirical_measure_examples():
    m = empirical_measure(ClassConfig.from_dict({2: 1, 0: 1}))
    np.testing.assert_allclose(m.f, [0.5, 0, 0.5])
    np.testing.assert_allclose(m.p, [0, 0, 1])
    m = empirical_measure(ClassConfig.from_dict({1: 7}))
    assert m.f[1] == 1 and m.p[1] == 1
    m = empirical_measure(ClassConfig.from_dict({0: 1, 1: 1, 2: 1}), exact=True)
    assert m.p == [0, Fraction(1, 3), Fraction(2, 3)]
    m = empirical_measure(ClassConfig.from_dict({0: 4}))
    assert m.p is None and m.N == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=2, max_size=60))
def test_measures_normalised_and_related(eta):
    cfg = ClassConfig.from_occupations(eta)
    ex = empirical_measure(cfg, exact=True)
    assert sum(ex.f) == 1
    if cfg.N:
        assert sum(ex.p) == 1
        fl = empirical_measure(cfg)
        np.testing.assert_allclose(fl.p, cfg.L / cfg.N * np.arange(fl.f.size) * fl.f, atol=1e-12)
    assert moment(cfg, 0) == 1
    assert moment(cfg, 1) == pytest.approx(cfg.N / cfg.L, abs=1e-12)


def test_moment_examples_and_guard():
    assert moment(ClassConfig.from_dict({3: 1, 0: 2}), 2) == 3
    with pytest.raises(ValueError):
        moment(ClassConfig.from_dict({1: 1}), 7)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=1, max_size=50), st.integers(0, 5))
def test_moments_monotone_when_no_empty_site(eta, n):
    cfg = ClassConfig.from_occupations(eta)
    assert moment(cfg, n) <= moment(cfg, n + 1)
