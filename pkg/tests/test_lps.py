import math

import mpmath as mp
import numpy as np
import pytest

from semigroup_lab import lps
from semigroup_lab.errors import DomainError
from semigroup_lab.markov import (DiffusionSemigroup, cycle_chain, random_reversible_chain, semigroup_at,
                                  two_point_chain)
from semigroup_lab.spaces import MixedNormConfig, mixed_norm

L2 = MixedNormConfig(2, 2, 1)


def ml_factor(alpha, x):
    """Eigen-factor of M^alpha_t at x = t * eigenvalue: E_{1, alpha+1}(x) = sum x^j / Gamma(j + alpha + 1)."""
    with mp.workdps(60):
        a = mp.mpc(alpha)
        return complex(mp.nsum(lambda j: mp.mpf(x) ** j * mp.rgamma(j + a + 1), [0, mp.inf]))


def test_time_grid_invariants(random_chain):
    g = lps.TimeGrid.for_semigroup(random_chain)
    assert np.all(g.nodes > 0) and np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)
    assert g.tail_bound >= 0
    # weights integrate dt/t over [t_min, t_max]
    assert g.weights.sum() == pytest.approx(math.log(g.t_max / g.t_min), rel=1e-13)
    assert g.refined().panels == 2 * g.panels
    with pytest.raises(DomainError):
        lps.TimeGrid(1.0, 0.5)


def test_g_function_two_point_eigenvector(two_point):
    r = lps.g_function(two_point, np.array([1.0, -1.0]), L2)
    assert np.allclose(r.per_point, [0.5, 0.5], atol=1e-9)
    assert r.lp_norm == pytest.approx(0.5, abs=1e-9)
    assert r.quad_error < 1e-6


def test_g_function_constant_is_zero(random_chain):
    r = lps.g_function(random_chain, np.ones((random_chain.n, 2)), MixedNormConfig(3, 4, 2))
    assert np.all(r.per_point == 0.0) and r.lp_norm == 0.0


def test_g_function_lp_norm_is_mixed_norm(random_chain):
    cfg = MixedNormConfig(3, 4, 2)
    f = np.random.default_rng(0).standard_normal((random_chain.n, 2))
    r = lps.g_function(random_chain, f, cfg, q_time=3.0, k=2)
    assert np.all(r.per_point >= 0)
    assert r.lp_norm == pytest.approx(mixed_norm(r.per_point, random_chain.space, MixedNormConfig(3, 2, 1)),
                                      rel=1e-14)


@pytest.mark.parametrize("d", [1, 3])
def test_hilbert_identity(random_chain, d):
    cfg = MixedNormConfig(2, 2, d)
    rng = np.random.default_rng(d)
    for _ in range(5):
        f = rng.standard_normal((random_chain.n, d))
        r = lps.g_function(random_chain, f, cfg)
        target = 0.5 * mixed_norm(f - random_chain.kernel_projection @ f, random_chain.space, cfg)
        assert abs(r.lp_norm - target) <= max(1e-6, r.quad_error)


def test_g_function_order_two_eigenvector(two_point):
    # int (lam t)^4 e^{-2 lam t} dt/t = Gamma(4)/2^4
    r = lps.g_function(two_point, np.array([1.0, -1.0]), L2, k=2)
    assert r.lp_norm == pytest.approx(math.sqrt(6 / 16), rel=1e-8)


def test_g_function_domain(two_point):
    with pytest.raises(DomainError):
        lps.g_function(two_point, np.array([1.0, -1.0]), L2, k=0)
    with pytest.raises(DomainError):
        lps.g_function(two_point, np.array([1.0, -1.0]), L2, q_time=1.5)


@pytest.mark.parametrize("chain", [two_point_chain(1.0), cycle_chain(8)])
def test_lps_ratio_hilbert(chain):
    assert lps.lps_ratio(chain, L2).value == pytest.approx(0.5, abs=1e-4)


def test_lps_ratio_positive_non_hilbert():
    est = lps.lps_ratio(random_reversible_chain(5, seed=1), MixedNormConfig(3, 4, 2), restarts=4)
    assert est.value > 0
    assert est.maximizer.shape == (5, 2)


@pytest.mark.parametrize("alpha", [2.0, 3.0, 10.0])
def test_hn_two_point_frullani(two_point, alpha):
    # int (e^{-u} - e^{-alpha u})^2 du/u = log((1 + alpha)^2 / (4 alpha))
    r = lps.semigroup_difference_functional(two_point, np.array([1.0, -1.0]), L2, alpha)
    assert r.value == pytest.approx(math.sqrt(math.log((1 + alpha) ** 2 / (4 * alpha))), abs=1e-9)
    assert r.bound == pytest.approx(math.sqrt(math.log(alpha)), rel=1e-14)


def test_hn_alpha_three_value(two_point):
    r = lps.semigroup_difference_functional(two_point, np.array([1.0, -1.0]), L2, 3.0)
    assert r.value == pytest.approx(math.sqrt(math.log(4 / 3)), abs=1e-6)
    assert r.value <= math.sqrt(math.log(3))


def test_hn_constant_is_zero(random_chain):
    r = lps.semigroup_difference_functional(random_chain, np.ones(random_chain.n), L2, 2.0)
    assert r.value == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        lps.semigroup_difference_functional(random_chain, np.ones(random_chain.n), L2, 1.0)


@pytest.mark.parametrize("alpha", [2.5, 1.0, 0.5, 0.1, 0.0, -0.3, -1.0, -1.5, -2.0, 0.7 + 0.4j, -0.5 - 1.2j])
def test_fractional_factors_against_mittag_leffler(alpha):
    xs = np.array([0.0, -0.01, -0.7, -3.0, -25.0, -400.0])
    got = lps.fractional_factors(xs, alpha)
    expect = np.array([ml_factor(alpha, x) for x in xs])
    assert np.allclose(got, expect, rtol=1e-9, atol=1e-12)


def test_fractional_running_average(random_chain):
    t = 0.8
    f = np.random.default_rng(3).standard_normal(random_chain.n)
    M1 = lps.fractional_average(random_chain, f, 1.0, t)
    lam = -random_chain.eigenvalues
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(lam > 0, (1 - np.exp(-lam * t)) / (lam * t), 1.0)
    assert np.allclose(M1[:, 0], random_chain.spectral(fac) @ f, atol=1e-10)


def test_fractional_zero_and_negative_integers(random_chain):
    t = 1.3
    f = np.random.default_rng(4).standard_normal((random_chain.n, 2))
    A = random_chain.generator
    Tt = semigroup_at(random_chain, t)
    assert np.allclose(lps.fractional_average(random_chain, f, 0.0, t), Tt @ f, atol=1e-8)
    assert np.allclose(lps.fractional_average(random_chain, f, -1.0, t), t * A @ Tt @ f, atol=1e-8)
    assert np.allclose(lps.fractional_average(random_chain, f, -2.0, t), t * t * A @ A @ Tt @ f, atol=1e-8)


def test_fractional_derivative_order(two_point):
    # t d/dt M^1_t on the eigenvector: t d/dt (1 - e^{-2t})/(2t)
    t = 0.9
    f = np.array([1.0, -1.0])
    got = lps.fractional_average(two_point, f, 1.0, t, k=1)[0, 0]
    g = lambda s: (1 - math.exp(-2 * s)) / (2 * s)
    h = 1e-5
    assert got == pytest.approx(t * (g(t + h) - g(t - h)) / (2 * h), abs=1e-8)


def _phi(G, f):
    return lambda s: np.stack([semigroup_at(G, si) @ f for si in np.atleast_1d(s)])


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (0.5, 0.5), (0.3, 1.2)])
def test_semigroup_law_of_fractional_integrals(random_chain, a, b):
    G, t = random_chain, 1.1
    f = np.random.default_rng(5).standard_normal(G.n)
    phi = _phi(G, f)
    # I^b phi(s) = s^b g(s) with g smooth: pass g to the outer rule through endpoint_power
    inner = lambda s: np.stack([lps.fractional_integral(phi, b, si) / si ** b for si in s])
    lhs = lps.fractional_integral(inner, a, t, endpoint_power=b)
    rhs = lps.fractional_integral(phi, a + b, t)
    assert np.allclose(lhs, rhs, atol=1e-10)
    # spectral oracle I^c e^{lam s}(t) = t^c E_{1,c+1}(lam t)
    c = a + b
    oracle = G.spectral(np.array([t ** c * ml_factor(c, t * x).real for x in G.eigenvalues])) @ f
    assert np.allclose(rhs, oracle, atol=1e-10)


def test_fractional_integral_domain():
    with pytest.raises(DomainError):
        lps.fractional_integral(lambda s: s, 0.0, 1.0)


def test_analyticity_two_point(two_point):
    val = lps.analyticity_constant(two_point, L2, math.pi / 4)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_analyticity_zero_generator():
    G = DiffusionSemigroup(two_point_chain().space, np.zeros((2, 2)))
    assert lps.analyticity_constant(G, L2, 0.3, n_angles=4, n_radii=5) == pytest.approx(1.0, abs=1e-14)


def test_analyticity_domain(two_point):
    with pytest.raises(DomainError):
        lps.analyticity_constant(two_point, L2, math.pi / 2)
