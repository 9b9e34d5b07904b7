"""Littlewood-Paley-Stein functionals of a finite diffusion semigroup.

Time integrals against dt/t are computed in u = log t with composite
Gauss-Legendre panels. Every time derivative t^k d^k T_t f is exact
spectral calculus; only the integrals are discretized.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.special import exp1, gamma, gammaincc, loggamma

from .errors import ConvergenceError, DomainError
from .holo import estimate_norm
from .markov import semigroup_at
from .quadrature import composite_gauss_legendre, gauss_jacobi, gauss_legendre
from .spaces import NestedNorm, NormEstimate, as_values, mixed_norm, mixed_norm_operator, norm_ascent


@dataclass(frozen=True)
class TimeGrid:
    """Quadrature for int_0^inf (.) dt/t on [t_min, t_max] in the variable log t.

    `tail_bound` is int_{t_max}^inf e^{-gap t} dt/t, the weight of the
    slowest decaying mode beyond the grid; it enters error budgets only.
    """

    t_min: float
    t_max: float
    panels: int = 24
    order: int = 16
    tail_bound: float = 0.0
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise DomainError("need 0 < t_min < t_max")
        u, w = composite_gauss_legendre(math.log(self.t_min), math.log(self.t_max), self.panels, self.order)
        object.__setattr__(self, "nodes", np.exp(u))
        object.__setattr__(self, "weights", w)

    @classmethod
    def for_semigroup(cls, G, panels=24, order=16, head=1e-6, tail=50.0):
        gap = G.spectral_gap or 1.0
        top = G.spectral_radius or 1.0
        return cls(head / top, tail / gap, panels, order, float(exp1(tail)))

    def refined(self):
        return replace(self, panels=2 * self.panels)


@dataclass
class GFunctionResult:
    per_point: np.ndarray
    lp_norm: float
    quad_error: float
    grid: TimeGrid = field(repr=False, default=None)


def _derivative_factors(G, t, k):
    # eigenvalue factors of t^k A^k exp(tA) at each node: shape (M, n)
    tw = np.outer(t, G.eigenvalues)
    return tw ** k * np.exp(tw)


def _is_constant(v):
    # constants are annihilated exactly; rounding in the eigenbasis would leave ~1e-16
    return bool(np.all(v == v[:1]))


def _g_values(G, coeff, cfg, q_time, k, grid):
    phi = _derivative_factors(G, grid.nodes, k)
    h = np.einsum("ik,mk,kj->imj", G.eigvecs, phi, coeff)
    inner = NestedNorm([cfg.q]).norms(h)
    return (inner ** q_time) @ grid.weights


def _g_tail(G, coeff, cfg, q_time, k, grid):
    """Analytic bound on the neglected part of int ||t^k A^k T_t f||^q dt/t."""
    nz = G.eigenvalues != 0.0
    if not nz.any():
        return np.zeros(G.n)
    cn = NestedNorm([cfg.q]).norms(coeff[nz])
    K = np.abs(G.eigvecs[:, nz]) @ cn
    s_tail = G.spectral_gap * grid.t_max
    a = k * q_time
    if s_tail > k:
        tail = gamma(a) * gammaincc(a, q_time * s_tail) / q_time ** a
    else:
        tail = math.inf
    head = (G.spectral_radius * grid.t_min) ** a / a
    return K ** q_time * (tail + head)


def g_function(G, f, cfg, q_time=2.0, k=1, grid=None, rtol=1e-8, max_panels=1536):
    """Order-k g-function (int_0^inf ||t^k d^k T_t f||_X^q dt/t)^(1/q) at each point.

    Panels are doubled until the per-point values change by less than rtol;
    quad_error adds that change to the analytic tail and head bounds.
    """
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    if q_time < 2:
        raise DomainError("time exponent must be >= 2")
    v = as_values(f, G.space, cfg)
    grid = TimeGrid.for_semigroup(G) if grid is None else grid
    if _is_constant(v):
        return GFunctionResult(np.zeros(G.n), 0.0, 0.0, grid)
    coeff = G.coefficients @ v
    prev = _g_values(G, coeff, cfg, q_time, k, grid)
    while True:
        fine = grid.refined()
        cur = _g_values(G, coeff, cfg, q_time, k, fine)
        scale = max(float(cur.max()), 1e-300)
        delta = float(np.abs(cur - prev).max()) / scale
        if delta < rtol:
            break
        if fine.panels >= max_panels:
            raise ConvergenceError(f"g-function quadrature stalled at {delta:.3g}", achieved=delta)
        grid, prev = fine, cur
    per_point = cur ** (1.0 / q_time)
    tail = _g_tail(G, coeff, cfg, q_time, k, fine)
    err_pts = (cur + tail) ** (1.0 / q_time) - per_point
    quad_error = float(np.abs(prev ** (1.0 / q_time) - per_point).max() + err_pts.max())
    point_cfg_norm = NestedNorm([cfg.p], [G.space.weights])(per_point)
    return GFunctionResult(per_point, point_cfg_norm, quad_error, fine)


def lps_ratio(G, cfg, q_time=2.0, k=1, restarts=8, grid=None, seed=0, tol=1e-9, patience=50):
    """Lower bound on sup_f ||G_{q,k} f||_{L_p} / ||f||_{L_p(X)} by norm ascent.

    The g-function is the norm of a linear map into L_p(Omega; L_q(dt/t; X)),
    so the duality-map iteration of `spaces.norm_ascent` applies directly.
    """
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    grid = TimeGrid.for_semigroup(G) if grid is None else grid
    V, W = G.eigvecs, G.coefficients
    phi = _derivative_factors(G, grid.nodes, k)
    source = mixed_norm_operator(G.space, cfg)
    target = NestedNorm([cfg.p, q_time, cfg.q], [G.space.weights, grid.weights, None])

    def apply(x):
        c = np.einsum("kn,...nj->...kj", W, x)
        return np.einsum("ik,mk,...kj->...imj", V, phi, c)

    def adjoint(h):
        c = np.einsum("ik,mk,...imj->...kj", V, phi, h)
        return np.einsum("kn,...kj->...nj", W, c)

    est = norm_ascent(apply, adjoint, source, target, (G.n, cfg.d), restarts=restarts,
                      tol=tol, patience=patience, seed=seed)
    if G.ergodic:
        x = est.maximizer - G.kernel_projection @ est.maximizer
        nx = source(x)
        if nx > 0:
            val = target(apply(x)) / nx
            if val > est.value:
                est = NormEstimate(float(val), x / nx, est.converged, est.iterations, est.restarts)
    return est


@dataclass
class DifferenceResult:
    value: float
    bound: float
    quad_error: float


def semigroup_difference_functional(G, f, cfg, alpha_ratio, q_time=2.0, m=1.0, grid=None,
                                    rtol=1e-10, max_panels=1536):
    """(int_0^inf ||(T_t - T_{alpha t}) f||^q dt/t)^(1/q) with the bound (log alpha)^(1/q) m ||f||."""
    if not alpha_ratio > 1:
        raise DomainError("alpha_ratio must exceed 1")
    v = as_values(f, G.space, cfg)
    bound = math.log(alpha_ratio) ** (1.0 / q_time) * m * mixed_norm(v, G.space, cfg)
    if _is_constant(v):
        return DifferenceResult(0.0, bound, 0.0)
    coeff = G.coefficients @ v
    norm = mixed_norm_operator(G.space, cfg)
    grid = TimeGrid.for_semigroup(G) if grid is None else grid

    def integral(gr):
        tw = np.outer(gr.nodes, G.eigenvalues)
        fac = np.exp(tw) - np.exp(alpha_ratio * tw)
        h = np.einsum("ik,mk,kj->mij", G.eigvecs, fac, coeff)
        return float((norm.norms(h) ** q_time) @ gr.weights)

    prev = integral(grid)
    while True:
        fine = grid.refined()
        cur = integral(fine)
        delta = abs(cur - prev) / max(cur, 1e-300)
        if delta < rtol:
            break
        if fine.panels >= max_panels:
            raise ConvergenceError(f"difference functional stalled at {delta:.3g}", achieved=delta)
        grid, prev = fine, cur
    value = cur ** (1.0 / q_time)
    # beyond t_max the integrand is at most (2 ||f - Pi f||)^q e^{-q gap t}
    rest = v - G.kernel_projection @ v
    tail = (2.0 * norm(rest)) ** q_time * float(exp1(q_time * G.spectral_gap * fine.t_max)) if G.spectral_gap else 0.0
    err = abs(prev ** (1.0 / q_time) - value) + (cur + tail) ** (1.0 / q_time) - value
    return DifferenceResult(value, bound, err)


def _direct_factors(lams_t, alpha, k, order):
    """(1/Gamma(alpha)) int_0^1 (1-v)^(alpha-1) (x v)^k e^(x v) dv for x = t * eigenvalue.

    [0, 1/2] uses Gauss-Legendre panels graded toward v = 0, where e^(x v)
    has a layer of width 1/|x|. On [1/2, 1] a real alpha goes into a
    Gauss-Jacobi weight; a complex alpha uses 1 - v = e^(-y), which turns the
    oscillating endpoint factor into the smooth decay e^(-alpha y).
    """
    xs = np.asarray(lams_t, dtype=float)
    g = lambda v: np.outer(xs, v) ** k * np.exp(np.outer(xs, v))
    xmax = max(1.0, float(np.abs(xs).max()))
    first = min(0.25, 1.0 / xmax)
    cuts = np.concatenate([[0.0], np.geomspace(first, 0.5, max(2, int(math.ceil(math.log2(0.5 / first))) + 1))])
    v, w = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        vi, wi = gauss_legendre(a, b, order)
        v.append(vi)
        w.append(wi)
    v, w = np.concatenate(v), np.concatenate(w)
    total = g(v) @ (w * (1.0 - v) ** (alpha - 1.0))
    if alpha.imag == 0.0:
        a = alpha.real - 1.0
        xg, wg = gauss_jacobi(order, a, 0.0)
        vj = 0.75 + 0.25 * xg
        total = total + 0.25 ** alpha.real * (g(vj) @ wg)
    else:
        y_hi = math.log(2.0) + 40.0 / alpha.real
        panels = int(math.ceil((y_hi - math.log(2.0)) * max(1.0, abs(alpha.imag)) / 2.0))
        y, wy = composite_gauss_legendre(math.log(2.0), y_hi, panels, order)
        total = total + g(1.0 - np.exp(-y)) @ (wy * np.exp(-alpha * y))
    return total / _gamma(alpha)


def _gamma(alpha):
    if alpha.imag == 0.0:
        return float(gamma(alpha.real))
    return complex(np.exp(loggamma(alpha)))


def fractional_factors(lams_t, alpha, k=0, tol=1e-12, order=16, max_order=256):
    """Scalar factors of t^k d^k M^alpha_t on eigenfunctions, x = t * (signed eigenvalue).

    Real alpha >= 1/2 and complex alpha with Re alpha >= 1 are integrated
    directly; 0 < Re alpha below that takes one step of the recursion
    and Re alpha <= 0 takes several:
        t^j d^j M^(b-1) = (j + b) t^j d^j M^b + t^(j+1) d^(j+1) M^b
    is applied from b0 = alpha + n, n = ceil(-Re alpha) + 1.
    """
    alpha = complex(alpha)
    lams_t = np.asarray(lams_t, dtype=float)
    # direct quadrature needs Re alpha away from 0: the weight exponent
    # alpha - 1 must stay clear of -1, and complex alpha needs decay in e^(-alpha y)
    threshold = 0.5 if alpha.imag == 0.0 else 1.0
    if alpha.real <= 0:
        steps = int(math.ceil(-alpha.real)) + 1
    elif alpha.real < threshold:
        steps = 1
    else:
        steps = 0
    base = alpha + steps
    table = []
    for j in range(k, k + steps + 1):
        n = order
        prev = _direct_factors(lams_t, base, j, n)
        while True:
            n *= 2
            cur = _direct_factors(lams_t, base, j, n)
            diff = float(np.abs(cur - prev).max())
            if diff <= tol * max(1.0, float(np.abs(cur).max())):
                break
            if n >= max_order:
                raise ConvergenceError(f"fractional quadrature stalled at {diff:.3g}", achieved=diff)
            prev = cur
        table.append(cur)
    b = base
    for _ in range(steps):
        table = [(k + j + b) * table[j] + table[j + 1] for j in range(len(table) - 1)]
        b = b - 1
    out = table[0]
    if alpha.imag == 0.0:
        out = out.real
    return out


def fractional_average(G, f, alpha, t, k=0, tol=1e-12):
    """t^k d^k M^alpha_t f, where M^alpha_t f = t^(-alpha) I^alpha (s -> T_s f)(t)."""
    if not t > 0:
        raise DomainError("t must be > 0")
    v = as_values(f, G.space)
    fac = fractional_factors(t * G.eigenvalues, alpha, k, tol)
    return G.spectral(fac) @ v


def fractional_integral(phi, alpha, t, endpoint_power=0.0, nodes=64):
    """I^alpha phi(t) = (1/Gamma(alpha)) int_0^t (t-s)^(alpha-1) phi(s) ds for real alpha > 0.

    `phi` maps an array of s to an array with s along axis 0. If
    phi(s) = s^b g(s) with g smooth, pass g and endpoint_power=b so that both
    endpoint singularities sit in the Gauss-Jacobi weight.
    """
    if not alpha > 0:
        raise DomainError("direct fractional integration needs alpha > 0")
    b = endpoint_power
    xg, wg = gauss_jacobi(nodes, alpha - 1.0, b)
    s = 0.5 * t * (1.0 + xg)
    vals = np.asarray(phi(s))
    scale = (0.5 * t) ** (alpha + b) / gamma(alpha)
    return scale * np.tensordot(wg, vals, axes=(0, 0))


def analyticity_constant(G, cfg, beta0, n_angles=24, n_radii=40, method="auto", restarts=4, seed=0,
                         radii=None):
    """Empirical lower bound for sup{||T_z|| : |arg z| < beta0} on a polar grid.

    Angles run over [0, beta0] in both half-planes (the supremum over the
    open sector equals that over its closure); radii are log-spaced.
    """
    if not (0 < beta0 < math.pi / 2):
        raise DomainError("beta0 must lie in (0, pi/2)")
    if radii is None:
        gap = G.spectral_gap or 1.0
        radii = np.logspace(math.log10(1e-3 / gap), math.log10(1e3 / gap), n_radii)
    angles = np.linspace(0.0, beta0, n_angles)
    best, start = 1.0, ()
    for sign in (1, -1):
        for th in angles:
            for r in radii:
                z = r * complex(math.cos(th), sign * math.sin(th))
                est = estimate_norm(semigroup_at(G, z), G, cfg, method, restarts, seed, starts=start)
                if est.maximizer is not None:
                    start = (est.maximizer.astype(complex),)
                best = max(best, est.value)
    return best
