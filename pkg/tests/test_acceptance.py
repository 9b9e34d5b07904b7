"""Acceptance suite: one test and one PASS/FAIL line per criterion."""

import math

import numpy as np
from scipy.linalg import expm

from semigroup_lab import bounds, lps
from semigroup_lab.holo import (contour_exp, hille_yosida_check, kato_epsilon, max_t_derivative,
                                neumann_partial_sums, resolvent)
from semigroup_lab.markov import (cycle_chain, poisson_spectral, random_reversible_chain, rota_deviation,
                                  semigroup_at, subordinated_poisson, two_point_chain)
from semigroup_lab.spaces import MixedNormConfig, mixed_norm, operator_norm_lower

L2 = MixedNormConfig(2, 2, 1)
FIVE_CHAINS = [random_reversible_chain(n, seed) for n, seed in zip((3, 5, 7, 9, 10), range(5))]


def rel_err(a, b):
    return float(np.abs(a - b).max() / np.abs(b).max())


def test_contour_exponential(criterion):
    chains = [two_point_chain(1.0)] + FIVE_CHAINS
    worst = 0.0
    for G in chains:
        for z in (1.0, 2.0, 1 + 0.1j, 1 - 0.1j):
            worst = max(worst, rel_err(contour_exp(G, z), semigroup_at(G, z)))
            # expm is an oracle independent of the eigendecomposition
            worst = max(worst, rel_err(contour_exp(G, z), expm(z * G.generator)))
    criterion(1, worst <= 1e-8, f"contour exp vs spectral/expm, worst relative error {worst:.2e} (<= 1e-8)")


def test_rota_factorization(criterion):
    devs = [rota_deviation(random_reversible_chain(2 + seed % 19, 100 + seed).kernel) for seed in range(20)]
    worst = max(devs)
    criterion(2, worst <= 1e-12, f"Rota E_A E_B = S^2 on 20 chains, worst deviation {worst:.2e} (<= 1e-12)")


def test_elementary_inequality(criterion):
    violations, margin = 0, math.inf
    for q in (1.5, 2, 3, 4, 8):
        for delta in (0.05, 0.1, 0.25, 0.5, 1):
            m, bad = bounds.elem_ineq_bruteforce(q, delta, 4001)
            violations += bad
            margin = min(margin, m)
    criterion(3, violations == 0, f"x <= 2 - eps over 25 (q, delta) pairs: {violations} violations, min margin {margin:.3g}")


def test_kato_two_point(criterion):
    G = two_point_chain(1.0)
    eps = kato_epsilon(G, L2).value
    td = max_t_derivative(G, L2).value
    ok = abs(eps - 1) <= 1e-6 and abs(td - math.exp(-1)) <= 1e-6
    criterion(4, ok, f"two-point eps = {eps:.12f} (1), sup ||t T'|| = {td:.12f} (1/e = {math.exp(-1):.12f})")


def test_uniformly_convex_gap(criterion):
    worst_slack = math.inf
    for G in FIVE_CHAINS:
        S = G.kernel.matrix
        T = S @ S
        I_T = np.eye(G.n) - T
        for q in (2.0, 3.0, 4.0):
            for d in (1, 3):
                est = operator_norm_lower(I_T, G.space, MixedNormConfig(q, q, d), restarts=16)
                worst_slack = min(worst_slack, 2 - 2 / (3 * q) + 1e-9 - est.value)
    criterion(5, worst_slack >= 0, f"||I - S^2|| <= 2 - 2/(3q) on L_q(l_q^d), least slack {worst_slack:.4g}")


def test_semigroup_difference(criterion):
    rng = np.random.default_rng(6)
    worst = -math.inf
    for G in FIVE_CHAINS:
        for alpha in (2.0, 3.0, 10.0):
            for _ in range(20):
                r = lps.semigroup_difference_functional(G, rng.standard_normal(G.n), L2, alpha)
                worst = max(worst, r.value - r.bound)
    r = lps.semigroup_difference_functional(two_point_chain(1.0), np.array([1.0, -1.0]), L2, 3.0)
    exact = math.sqrt(math.log(4 / 3))
    ok = worst <= 1e-8 and abs(r.value - exact) <= 1e-6
    criterion(6, ok, f"difference functional - bound <= {worst:.3g}; two-point alpha = 3 gives {r.value:.10f}, "
                     f"sqrt(log(4/3)) = {exact:.10f}")


def test_hilbert_g_function(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for G in FIVE_CHAINS:
        for _ in range(20):
            f = rng.standard_normal(G.n)
            r = lps.g_function(G, f, L2)
            target = 0.5 * mixed_norm(f - G.kernel_projection @ f, G.space, L2)
            worst = max(worst, abs(r.lp_norm - target) / max(1e-6, r.quad_error))
    ratios = [lps.lps_ratio(G, L2).value for G in FIVE_CHAINS]
    ratio_dev = max(abs(v - 0.5) for v in ratios)
    ok = worst <= 1 and ratio_dev <= 1e-4
    criterion(7, ok, f"||G f|| = ||f - Pi f||/2 (error/tolerance <= {worst:.3g}); lps_ratio within {ratio_dev:.2e} of 1/2")


def test_fractional_calculus(criterion):
    G = FIVE_CHAINS[2]
    t = 0.7
    f = np.random.default_rng(8).standard_normal(G.n)
    A, Tt = G.generator, semigroup_at(G, t)
    errs = {}
    errs["M^0 = T_t"] = np.abs(lps.fractional_average(G, f, 0.0, t)[:, 0] - Tt @ f).max()
    lam = -G.eigenvalues
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = np.where(lam > 0, (1 - np.exp(-lam * t)) / (lam * t), 1.0)
    errs["M^1 running average"] = np.abs(lps.fractional_average(G, f, 1.0, t)[:, 0] - G.spectral(avg) @ f).max()
    errs["M^-1 = t dT_t"] = np.abs(lps.fractional_average(G, f, -1.0, t)[:, 0] - t * A @ Tt @ f).max()
    phi = lambda s: np.stack([semigroup_at(G, si) @ f for si in s])
    inner = lambda s: np.stack([lps.fractional_integral(phi, 1.0, si) / si for si in s])
    errs["I^1 I^1 = I^2"] = np.abs(lps.fractional_integral(inner, 1.0, t, endpoint_power=1.0)
                                    - lps.fractional_integral(phi, 2.0, t)).max()
    worst = max(errs.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    criterion(8, worst <= 1e-6, detail)


def test_subordination(criterion):
    worst = max(rel_err(subordinated_poisson(G, t), poisson_spectral(G, t))
                for G in FIVE_CHAINS for t in (0.01, 1.0, 100.0))
    criterion(9, worst <= 1e-6, f"subordinated P_t vs e^(-t sqrt(-A)), worst relative error {worst:.2e} (<= 1e-6)")


def test_hille_yosida(criterion):
    grid = [complex(a, b) for a in (0.1, 1.0, 10.0) for b in np.linspace(-10, 10, 21)]
    chains = [two_point_chain(1.0)] + FIVE_CHAINS
    hy = max(hille_yosida_check(G, L2, grid).rows[0].value for G in chains)
    ident, neumann = 0.0, 0.0
    for G in chains:
        a, b = 0.3 + 2j, 5.0 - 1j
        Ra, Rb = resolvent(G, a), resolvent(G, b)
        ident = max(ident, np.abs(Ra - Rb - (b - a) * Ra @ Rb).max())
        lam, mu = 1.0 + 0.5j, 1.3 + 0.5j
        neumann = max(neumann, np.abs(neumann_partial_sums(G, lam, mu, 80)[-1] - resolvent(G, lam)).max())
    ok = hy <= 1 + 1e-9 and ident <= 1e-11 and neumann <= 1e-11
    criterion(10, ok, f"max ||R^n|| (Re lam)^n = {hy:.15f}; resolvent identity {ident:.1e}; Neumann {neumann:.1e}")


def _hand_row(q, m):
    # closed forms evaluated independently of the bounds module
    L = 1 + math.log(q) + q * math.log(m)
    B = q * q * m ** (2 * q + 1) * L
    return {
        "eps_delta1": 2 / (3 * q),
        "B": B,
        "sector_angle": 1 / (q * m ** q),
        "Tz_bound": q * m ** (q + 1) * L,
        "heat_constant_k1": B * B * m,
        "heat_constant_sharp": B * m,
        "xu_specialized": (q * m ** q) ** 2 * B * m,
    }


def test_bounds_table(criterion):
    worst, ratio_ulps = 0.0, 0.0
    for row in bounds.bounds_table([2, 3], [1, 2]):
        hand = _hand_row(row["q"], row["m"])
        for key, val in hand.items():
            worst = max(worst, abs(row[key] - val) / max(1.0, abs(val)))
        formula = (row["q"] * row["m"] ** row["q"]) ** 2
        ratio_ulps = max(ratio_ulps, abs(row["approach_ratio"] - formula) / (np.finfo(float).eps * formula))
    # spot values: B(2,1) = 4(1 + log 2), B(2,2) = 128(1 + 3 log 2)
    spot = abs(bounds.B_constant(2, 1) - 6.772588722239782) + abs(bounds.B_constant(2, 2) - 394.168517335019)
    ok = worst <= 1e-10 and spot <= 1e-10 and ratio_ulps <= 4
    criterion(11, ok, f"table vs hand values {worst:.1e} (<= 1e-10); ratio column within {ratio_ulps:.0f} ulp of (q m^q)^2")


def test_dimension_free(criterion):
    G = cycle_chain(16)
    vals = [lps.lps_ratio(G, MixedNormConfig(2, 2, d)).value for d in (1, 2, 4, 8)]
    spread = (max(vals) - min(vals)) / min(vals)
    criterion(12, spread < 0.01, "cycle(16) lps_ratio over d = 1, 2, 4, 8: "
                                  + ", ".join(f"{v:.8f}" for v in vals) + f" (spread {spread:.1e})")
