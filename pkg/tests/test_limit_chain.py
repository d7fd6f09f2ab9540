import numpy as np
import pytest
from scipy.stats import kstest, poisson

from conftest import tv
from condips.errors import EnvelopeError, OutOfRangeError
from condips.kernels import RateKernel
from condips.limit_chain import (
    LimitChainState,
    _Runner,
    ensemble_law,
    grid_check,
    limit_rates,
    simulate_path,
    step_limit,
)
from condips.meanfield import MeanFieldSolution, birth_death_rates, integrate, poisson_profile, rhs_p

IW = RateKernel.independent()
ZR = RateKernel.zero_range(4)


def frozen(f, kernel, t_end=50.0):
    f = np.asarray(f, dtype=float)
    rho = float(np.dot(np.arange(f.size), f))
    return MeanFieldSolution(np.array([0.0, t_end]), np.vstack([f, f]), rho, kernel)


@pytest.fixture(scope="module")
def zr_solution():
    return integrate(poisson_profile(2.0), ZR, 2.0, grid_step=0.005)


def test_single_occupant_rates(zr_solution):
    r = limit_rates(1, 0.5, zr_solution)
    mu = birth_death_rates(zr_solution.f_at(0.5), ZR).mu[1]
    assert r.death == 0
    assert r.long_range.sum() == pytest.approx(mu, rel=1e-12)


def test_point_mass_rates():
    sol = frozen([0.0, 1.0, 0.0, 0.0], IW)
    r = limit_rates(3, 1.0, sol)
    assert r.birth == pytest.approx(1.0)
    assert r.death == pytest.approx(2.0)
    assert r.long_range[2] == pytest.approx(1.0)
    assert r.long_range.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("kernel", [IW, ZR, RateKernel.inclusion(0.5)])
def test_rate_identity(kernel):
    sol = integrate(poisson_profile(2.0), kernel, 1.0, grid_step=0.1)
    for w in (1, 2, 5, 11, 40):
        for t in (0.0, 0.33, 1.0):
            r = limit_rates(w, t, sol)
            f = np.pad(sol.f_at(t), (0, w + 2))
            rates = birth_death_rates(f, kernel)
            assert r.long_range.sum() == pytest.approx(rates.mu[w] / w, rel=1e-12)
            assert r.total == pytest.approx(rates.mu[w] + rates.beta[w], rel=1e-12)


def test_rates_outside_grid(zr_solution):
    with pytest.raises(OutOfRangeError):
        limit_rates(2, 3.0, zr_solution)
    with pytest.raises(ValueError):
        LimitChainState(0, 0.0, zr_solution)


def test_frozen_profile_first_jump_is_exponential():
    f = poisson_profile(2.0)
    sol = frozen(f, ZR)
    rate = limit_rates(3, 0.0, sol).total
    rng = np.random.default_rng(4)
    times = [step_limit(LimitChainState(3, 0.0, sol), rng=rng).t for _ in range(5000)]
    assert kstest(times, "expon", args=(0, 1 / rate)).pvalue > 0.001


def test_paths_stay_positive(zr_solution, rng):
    obs = np.linspace(0, 2, 81)
    for _ in range(200):
        path = simulate_path(1, zr_solution, obs, rng)
        assert path.min() >= 1


def test_point_mass_start():
    f0 = np.array([0.0, 1.0])
    sol = integrate(f0, IW, 1.0, grid_step=0.01)
    ens = ensemble_law(None, sol, None, [0.0], 1000, master_seed=1)
    assert np.all(ens.samples == 1)


def test_initial_histogram(zr_solution):
    ens = ensemble_law(None, zr_solution, None, [0.0], 20000, master_seed=2)
    p0 = zr_solution.size_biased()[0]
    h = ens.histogram(0, p0.size)
    se = np.sqrt(p0 * (1 - p0) / ens.n_paths)
    assert np.all(np.abs(h[: p0.size] - p0) <= 4 * se + 1e-12)


def test_poisson_law_is_kept_with_both_envelopes():
    sol = integrate(poisson_profile(1.0), IW, 5.0, grid_step=0.01)
    k = np.arange(1, 30)
    shifted = np.concatenate([[0.0], poisson.pmf(k - 1, 1.0)])
    for lip in (False, True):
        ens = ensemble_law(None, sol, None, [5.0], 20000, master_seed=3, lipschitz=lip)
        assert tv(ens.histogram(0), shifted) < 0.015
        assert ens.worst_ratio <= 1.0


def test_envelope_violation_is_surfaced(zr_solution, rng):
    runner = _Runner(zr_solution, None, safety=0.5)
    with pytest.raises(EnvelopeError):
        for _ in range(100):
            runner.run(3, 0.0, 2.0, np.zeros(0), rng)


def test_grid_check(zr_solution):
    ok, worst = grid_check(zr_solution)
    assert ok and worst < 0.01
    coarse = integrate(poisson_profile(2.0), ZR, 2.0, grid_step=0.5)
    assert not grid_check(coarse)[0]


@pytest.mark.slow
def test_mean_is_second_moment_over_density(zr_solution):
    ens = ensemble_law(None, zr_solution, None, [1.0, 2.0], 20000, master_seed=6)
    mean, se = ens.moment(1)
    for j, t in enumerate((1.0, 2.0)):
        m2 = zr_solution.moment(2)[zr_solution.index_of(t)]
        assert abs(mean[j] - m2 / 2.0) < 3 * se[j]


@pytest.mark.slow
def test_master_equation_finite_difference(zr_solution):
    h = 0.1
    ens = ensemble_law(None, zr_solution, None, [1 - h, 1 + h], 10**5, master_seed=7)
    width = int(ens.samples.max()) + 1
    lo = ens.samples[:, 0][:, None] == np.arange(width)
    hi = ens.samples[:, 1][:, None] == np.arange(width)
    diff = (hi.astype(float) - lo) / (2 * h)
    fd = diff.mean(axis=0)
    se = diff.std(axis=0, ddof=1) / np.sqrt(ens.n_paths)
    sol = zr_solution
    i = sol.index_of(1.0)
    p = sol.size_biased()
    exact = rhs_p(p[i], sol.f[i], ZR, sol.rho)
    # finite-difference error of the same stencil applied to the ODE solution
    fd_ode = (p[sol.index_of(1 + h)] - p[sol.index_of(1 - h)]) / (2 * h)
    n = min(width, exact.size)
    top = np.argsort(p[i][:n])[::-1][:10]
    for k in top:
        assert abs(fd[k] - exact[k]) < 3 * se[k] + abs(fd_ode[k] - exact[k])
