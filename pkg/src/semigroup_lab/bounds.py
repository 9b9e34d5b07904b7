"""Closed-form constants of the quantitative analyticity and Littlewood-Paley-Stein
bounds, plus a brute-force check of the elementary inequality behind eps(delta, q).

Every formula stated with an unspecified absolute constant is evaluated with
that constant set to 1. Logarithms are natural. Evaluators reject arguments
outside the range of the underlying statement unless ``unchecked=True``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError


def _require(ok, message, unchecked):
    if not ok and not unchecked:
        raise DomainError(message)


@dataclass(frozen=True)
class BoundInputs:
    M: float = 1.0
    C: float = 1.0
    q_conv: float = 0.5
    u: float = 0.5
    eps: float = 1.0
    delta: float = 1.0
    q_exp: float = 2.0
    m: float = 1.0
    k: int = 1
    p: float = 2.0
    alpha: complex = 0.0
    beta0: float = math.pi / 4
    T_beta0: float = 1.0

    def __post_init__(self):
        checks = [
            (self.M >= 1, "M >= 1"),
            (self.C >= 1, "C >= 1"),
            (0 < self.q_conv < 1, "q_conv in (0, 1)"),
            (0 < self.u < 1, "u in (0, 1)"),
            (0 < self.eps <= 2, "eps in (0, 2]"),
            (0 < self.delta <= 1, "delta in (0, 1]"),
            (self.q_exp >= 2, "q_exp >= 2"),
            (self.m >= 1, "m >= 1"),
            (int(self.k) == self.k and self.k >= 1, "k positive integer"),
            (1 < self.p < math.inf, "p in (1, inf)"),
            (0 < self.beta0 <= math.pi / 2, "beta0 in (0, pi/2]"),
            (self.T_beta0 >= 1, "T_beta0 >= 1"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise DomainError("invalid bound inputs: " + ", ".join(bad))


def resolvent_sector_bound(C, M, q_conv, unchecked=False):
    """sqrt(C^2 + M^2)/(1 - q): bound on ||lambda R(lambda, A)|| in the enlarged sector."""
    if q_conv >= 1:
        raise DomainError("q_conv must be < 1")
    _require(C >= 1 and M >= 1 and q_conv > 0, "need C >= 1, M >= 1, q in (0, 1)", unchecked)
    return math.sqrt(C * C + M * M) / (1.0 - q_conv)


def holo_semigroup_bound(C, M, u, unchecked=False):
    """sqrt(C^2 + M^2)/(1 - u) * (1 + log(C/(1 - u))), up to an absolute constant."""
    if u >= 1:
        raise DomainError("u must be < 1")
    _require(C >= 1 and M >= 1 and u > 0, "need C >= 1, M >= 1, u in (0, 1)", unchecked)
    return math.sqrt(C * C + M * M) / (1.0 - u) * (1.0 + math.log(C / (1.0 - u)))


def kato_bounds(M, eps, unchecked=False):
    """(theta, ||T(z)|| bound, sup_t ||t T'(t)|| bound) from ||I - T_t|| <= 2 - eps.

    theta = eps/M^2 is the sector half-angle; both norm bounds hold up to an
    absolute constant.
    """
    if not (0 < eps <= 2):
        raise DomainError(f"eps must lie in (0, 2], got {eps}")
    _require(M >= 1, "need M >= 1", unchecked)
    Ct = M * M / eps
    log_term = 1.0 + math.log(M / eps)
    return eps / (M * M), Ct * log_term, Ct * Ct * log_term


def epsilon_from_delta(delta, q_exp, unchecked=False):
    """eps = 2 delta / ((1 + 2 delta) q), the gap in ||I - S^2|| <= 2 - eps."""
    _require(0 < delta <= 1, "delta must lie in (0, 1]", unchecked)
    _require(q_exp > 1, "q must exceed 1", unchecked)
    return 2.0 * delta / ((1.0 + 2.0 * delta) * q_exp)


def elem_ineq_bruteforce(q_exp, delta, grid_size=4001):
    """Scan x in [0, 2]: wherever x^q + delta 2^q (x-1)_+^q <= 2^q holds, check x <= 2 - eps.

    Returns (margin, violations): the least value of 2 - eps - x over the
    admissible grid points and the number of admissible points with x > 2 - eps.
    """
    if grid_size < 1000:
        raise DomainError("grid_size must be >= 1000")
    if not (1 < q_exp < math.inf) or not (0 < delta <= 1):
        raise DomainError("need q in (1, inf) and delta in (0, 1]")
    x = np.linspace(0.0, 2.0, int(grid_size))
    eps = epsilon_from_delta(delta, q_exp)
    # divided by 2^q to keep large q finite
    lhs = (x / 2.0) ** q_exp + delta * np.maximum(x - 1.0, 0.0) ** q_exp
    admissible = lhs <= 1.0
    slack = (2.0 - eps) - x[admissible]
    return float(slack.min()), int(np.count_nonzero(slack < 0))


def B_constant(q_exp, m, unchecked=False):
    """q^2 m^(2q+1) (1 + log q + q log m): the bound on sup_t ||t dT_t|| on L_q(X)."""
    _require(q_exp >= 2 and m >= 1, "need q >= 2 and m >= 1", unchecked)
    return q_exp ** 2 * m ** (2 * q_exp + 1) * (1.0 + math.log(q_exp) + q_exp * math.log(m))


def analytic_sector_bound_cotype(q_exp, m, unchecked=False):
    """(sector angle 1/(q m^q), ||T(z)|| bound q m^(q+1) (1 + log q + q log m))."""
    _require(q_exp >= 2 and m >= 1, "need q >= 2 and m >= 1", unchecked)
    angle = 1.0 / (q_exp * m ** q_exp)
    return angle, q_exp * m ** (q_exp + 1) * (1.0 + math.log(q_exp) + q_exp * math.log(m))


def theorem_heat_constant(k, p, q_exp, m, sharp_case=False, unchecked=False):
    """Explicit factor of the order-k g-function bound: k^(k-1) B^2 m, or B m when p = q, k = 1."""
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    _require(1 < p < math.inf, "p must lie in (1, inf)", unchecked)
    B = B_constant(q_exp, m, unchecked)
    if sharp_case:
        if k != 1:
            raise DomainError("the sharp case requires k = 1")
        _require(p == q_exp, "the sharp case requires p = q", unchecked)
        return B * m
    return k ** (k - 1) * B * B * m


def _conjugate(r):
    return r / (r - 1.0)


def xu_constant(p, q_exp, beta0, T_beta0, m, unchecked=False):
    """beta_q^-3 T^min(p/q, p'/q') max(p^(2/q), p'^(1 + 1/q')) m with beta_q = beta0 min(p/q, p'/q')."""
    _require(1 < p < math.inf and q_exp >= 2, "need p in (1, inf), q >= 2", unchecked)
    _require(0 < beta0 <= math.pi / 2, "beta0 must lie in (0, pi/2]", unchecked)
    pc, qc = _conjugate(p), _conjugate(q_exp)
    e = min(p / q_exp, pc / qc)
    beta_q = beta0 * e
    return beta_q ** -3 * T_beta0 ** e * max(p ** (2.0 / q_exp), pc ** (1.0 + 1.0 / qc)) * m


def xu_specialized(q_exp, m, unchecked=False):
    """(q m^q)^2 B m: the second-approach constant at p = q, beta0 = 1/(q m^q), T = beta0 B."""
    return (q_exp * m ** q_exp) ** 2 * B_constant(q_exp, m, unchecked) * m


def N_alpha(re_alpha):
    """0 if Re alpha > 0, else the smallest integer n >= 0 with n > -Re alpha."""
    if re_alpha > 0:
        return 0
    return int(math.floor(-re_alpha)) + 1


def bounds_row(q_exp, m):
    """All tabulated constants for one (q, m) pair."""
    B = B_constant(q_exp, m)
    angle, tz = analytic_sector_bound_cotype(q_exp, m)
    first = theorem_heat_constant(1, q_exp, q_exp, m, sharp_case=True)
    second = xu_specialized(q_exp, m)
    return {
        "q": q_exp,
        "m": m,
        "eps_delta1": epsilon_from_delta(1.0, q_exp),
        "B": B,
        "sector_angle": angle,
        "Tz_bound": tz,
        "heat_constant_k1": theorem_heat_constant(1, 2.0, q_exp, m),
        "heat_constant_sharp": first,
        "xu_specialized": second,
        "approach_ratio": second / first,
        "approach_ratio_formula": (q_exp * m ** q_exp) ** 2,
    }


def bounds_table(q_list, m_list):
    return [bounds_row(q, m) for q in q_list for m in m_list]
