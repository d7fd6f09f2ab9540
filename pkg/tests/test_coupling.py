import numpy as np
import pytest
from scipy.stats import ks_2samp

from condips.coupling import (
    INT_LIMIT,
    CoupledPair,
    cbar,
    exit_rate_bar,
    moment_monitor,
    simulate_coupled,
    simulate_wbar,
    step_coupled,
    wbar_event_rates,
)
from condips.errors import InvariantViolation
from condips.harness import coupled_ensemble
from condips.kernels import RateKernel
from condips.state import ClassConfig, InitScheme, TaggedState, sample_config, sample_initial

IW = RateKernel.independent()
ZR = RateKernel.zero_range(4)


def test_cbar_and_exit_rate_example():
    assert cbar(IW, 1.0) == 8
    cfg = ClassConfig.from_dict({1: 10})
    assert exit_rate_bar(1, cfg, IW) == 12


def test_exit_rate_is_sum_of_event_rates(kernel, rng):
    for _ in range(100):
        L = int(rng.integers(2, 200))
        cfg = sample_config(L, int(rng.integers(1, 4 * L)), rng)
        w = int(rng.integers(1, 10**6))
        up, jumps = wbar_event_rates(w, cfg, kernel)
        assert up + jumps.sum() == pytest.approx(exit_rate_bar(w, cfg, kernel), rel=1e-12)


def test_doubling_w_adds_cbar_w(kernel, rng):
    cfg = sample_config(50, 80, rng)
    for w in (1, 3, 17, 1000):
        gain = exit_rate_bar(2 * w, cfg, kernel) - exit_rate_bar(w, cfg, kernel)
        assert gain == pytest.approx(cbar(kernel, 80 / 50) * w, rel=1e-12)


def test_pair_must_dominate():
    st = TaggedState(ClassConfig.from_dict({0: 2}), 3)
    with pytest.raises(InvariantViolation):
        CoupledPair(st, 2, 8.0)


def test_relocation_jump_dominates():
    # 2n + k - n = n + k covers any move from n to k + 1
    for n in range(1, 60):
        for k in range(0, 60):
            assert n + k >= abs(k + 1 - n)


def test_first_birth_from_one(rng):
    st = TaggedState(ClassConfig.from_dict({1: 1}), 1)
    moved = 0
    for _ in range(200):
        pair, dt = step_coupled(CoupledPair.start(st, IW), IW, rng)
        assert dt > 0 and pair.wbar >= pair.tagged.W
        # a step may also be a long jump of Wbar alone
        if pair.tagged.W != 1:
            assert pair.tagged.W == 2 and pair.wbar >= 2
            moved += 1
    assert moved > 50


def test_steps_keep_domination(kernel, rng):
    for _ in range(20):
        st = sample_initial(30, 60, InitScheme(), rng)
        pair = CoupledPair.start(st, kernel)
        for _ in range(200):
            new, _ = step_coupled(pair, kernel, rng)
            dw = abs(new.tagged.W - pair.tagged.W)
            assert new.wbar - pair.wbar >= dw
            assert new.wbar >= new.tagged.W
            assert new.tagged.N == 60
            pair = new


def test_trajectory_is_monotone_and_saturates(rng):
    st = sample_initial(100, 200, InitScheme(), rng)
    obs = np.linspace(0, 2, 41)
    tr = simulate_coupled(st, ZR, 2.0, obs, rng)
    assert tr.violations == 0
    assert np.all(np.diff(tr.wbar) >= 0)
    assert np.all(tr.wbar >= tr.W)
    assert tr.wbar_exact[0] == st.W
    exact = [v for v in tr.wbar_exact if v is not None]
    assert all(v < INT_LIMIT for v in exact)
    assert tr.saturated == (tr.wbar_exact[-1] is None)


def test_domination_over_many_paths():
    ens = coupled_ensemble(ZR, 100, 200, 2.0, np.linspace(0, 2, 21), 1000, seed=12)
    assert ens.violations.sum() == 0
    assert np.all(ens.W <= ens.wbar)


def test_moment_monitor_orderings():
    for L in (10, 100, 1000):
        times = np.linspace(0, 1, 11)
        ens = coupled_ensemble(ZR, L, 2 * L, 1.0, times, 300, seed=L)
        rep = moment_monitor(ens.W, ens.wbar, times)
        assert rep.m2_hat[0] == rep.m2_bar[0]
        assert rep.ordered and rep.finite
        again = coupled_ensemble(ZR, L, 2 * L, 1.0, times, 300, seed=L)
        np.testing.assert_array_equal(again.wbar, ens.wbar)


@pytest.mark.slow
def test_coupled_marginal_matches_standalone():
    a = coupled_ensemble(ZR, 100, 200, 1.0, (1.0,), 5000, seed=41)
    b = coupled_ensemble(ZR, 100, 200, 1.0, (1.0,), 5000, seed=41, paired=False)
    x, y = a.wbar[:, 0], b.wbar[:, 0]
    se = np.hypot(x.std(ddof=1), y.std(ddof=1)) / np.sqrt(x.size)
    assert abs(x.mean() - y.mean()) < 3 * se
    lx, ly = np.log(x), np.log(y)
    se = np.hypot(lx.std(ddof=1), ly.std(ddof=1)) / np.sqrt(x.size)
    assert abs(lx.mean() - ly.mean()) < 3 * se
    assert ks_2samp(x, y).pvalue > 0.001


def test_standalone_is_seeded(rng):
    st = sample_initial(20, 40, InitScheme(), rng)
    a = simulate_wbar(st, ZR, 1.0, [0.5, 1.0], np.random.default_rng(3))
    b = simulate_wbar(st, ZR, 1.0, [0.5, 1.0], np.random.default_rng(3))
    np.testing.assert_array_equal(a.wbar, b.wbar)
