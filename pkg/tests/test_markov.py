import math

import numpy as np
import pytest
from scipy.linalg import expm

from semigroup_lab.errors import ConvergenceError, DomainError, StructuralError
from semigroup_lab.markov import (DiffusionSemigroup, MarkovOperator, build_chain, build_rota_dilation,
                                  complete_graph_chain, cycle_chain, poisson_spectral,
                                  random_reversible_chain, random_reversible_kernel, rota_deviation,
                                  semigroup_at, subordinated_poisson, two_point_chain, validate_markov)
from semigroup_lab.spaces import FiniteMeasureSpace


def two_point_closed_form(t, lam=2.0):
    e = math.exp(-lam * t)
    return 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]])


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 5.0])
def test_two_point_semigroup_closed_form(two_point, t):
    assert np.allclose(semigroup_at(two_point, t), two_point_closed_form(t), atol=1e-15)


def test_semigroup_matches_expm(random_chain):
    for z in (0.5, 2.0, 1 + 0.3j):
        assert np.allclose(semigroup_at(random_chain, z), expm(z * random_chain.generator), atol=1e-13)


def test_semigroup_real_dtype(random_chain):
    assert semigroup_at(random_chain, 1.0).dtype == np.float64
    assert np.iscomplexobj(semigroup_at(random_chain, 1.0 + 1e-3j))


def test_spectrum_and_gap():
    assert cycle_chain(4).spectral_gap == pytest.approx(1.0)
    assert complete_graph_chain(5).spectral_gap == pytest.approx(5 / 4)
    G = two_point_chain(3.0)
    assert G.spectral_gap == pytest.approx(6.0)
    assert G.spectral_radius == pytest.approx(6.0)
    assert G.ergodic


def test_kernel_projection_is_mean(random_chain):
    mu = random_chain.space.weights
    P = random_chain.kernel_projection
    assert np.allclose(P, np.outer(np.ones(random_chain.n), mu), atol=1e-13)


def test_random_kernel_is_valid(random_chain):
    rep = validate_markov(random_chain, tol=1e-12)
    assert rep.valid and str(rep) == "valid"
    assert rep.l1_norm == pytest.approx(1.0) and rep.linf_norm == pytest.approx(1.0)


def test_validate_reports_violations():
    sp = FiniteMeasureSpace(np.array([0.5, 0.5]))
    bad = MarkovOperator(sp, np.array([[0.5, 0.6], [0.4, 0.6]]))
    rep = validate_markov(bad)
    assert not rep.valid
    assert "row_sums" in rep.violations and "detailed_balance" in rep.violations
    assert str(rep).startswith("invalid")
    neg = MarkovOperator(sp, np.array([[1.1, -0.1], [-0.1, 1.1]]))
    assert "positivity" in validate_markov(neg).violations


def test_generator_checks():
    sp = FiniteMeasureSpace.uniform(2)
    with pytest.raises(StructuralError):
        DiffusionSemigroup(sp, np.array([[-1.0, 0.5], [1.0, -1.0]]))
    with pytest.raises(StructuralError):
        DiffusionSemigroup(sp, np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_build_chain_dispatch():
    assert build_chain("cycle", n=6).n == 6
    assert build_chain("random", n=5, seed=3).n == 5
    with pytest.raises(DomainError):
        build_chain("torus", n=4)


def test_rota_dilation_factorization(random_chain):
    S = random_chain.kernel
    bundle = build_rota_dilation(S)
    assert bundle.big_space.total_mass == pytest.approx(1.0)
    # conditional expectations are idempotent
    assert np.allclose(bundle.E_A @ bundle.E_A, bundle.E_A, atol=1e-14)
    assert np.allclose(bundle.E_B @ bundle.E_B, bundle.E_B, atol=1e-14)
    assert rota_deviation(S, bundle) <= 1e-12


def test_rota_rejects_non_markov():
    sp = FiniteMeasureSpace.uniform(2)
    with pytest.raises(StructuralError):
        build_rota_dilation(MarkovOperator(sp, np.array([[0.5, 0.6], [0.4, 0.6]])))


@pytest.mark.parametrize("t", [0.01, 1.0, 100.0])
def test_subordination_two_point(two_point, t):
    e = math.exp(-t * math.sqrt(2.0))
    oracle = 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]])
    P = subordinated_poisson(two_point, t)
    assert np.allclose(P, oracle, rtol=1e-7, atol=1e-9)


def test_subordination_eigenvalue_four():
    G = two_point_chain(2.0)
    P = subordinated_poisson(G, 1.0)
    assert P[0, 0] - P[0, 1] == pytest.approx(math.exp(-2.0), rel=1e-7)


def test_subordination_random(random_chain):
    for t in (0.01, 1.0, 100.0):
        P = subordinated_poisson(random_chain, t)
        ref = poisson_spectral(random_chain, t)
        assert np.abs(P - ref).max() <= 1e-6 * np.abs(ref).max()


def test_subordination_errors(two_point):
    with pytest.raises(DomainError):
        subordinated_poisson(two_point, 0.0)
    with pytest.raises(ConvergenceError):
        subordinated_poisson(two_point, 1.0, tol=1e-30, max_panels=64)


def test_random_kernel_reproducible():
    a = random_reversible_kernel(6, seed=9).matrix
    b = random_reversible_kernel(6, seed=9).matrix
    assert np.array_equal(a, b)
