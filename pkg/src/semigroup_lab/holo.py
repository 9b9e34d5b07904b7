"""Resolvent estimates and the holomorphic extension of a diffusion semigroup.

`contour_exp` evaluates exp(zA) as a Cauchy integral of the resolvent over an
arc of radius 1/|z| joined to two rays of angle pi/2 + arctan(q/C). It uses
linear solves only, so it is an independent check of `semigroup_at`.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, DomainError, SingularityError
from .markov import semigroup_at
from .quadrature import gauss_legendre
from .report import BoundReport
from .spaces import NormEstimate, l2_operator_norm, operator_norm_lower


@dataclass
class ResolventSample:
    lam: complex
    norm_bound: float
    exact_l2: float = None


def _check_resolvent_point(G, lam, atol=1e-12):
    dist = float(np.min(np.abs(lam - G.eigenvalues)))
    if dist <= atol * max(1.0, G.spectral_radius):
        raise SingularityError(f"lambda = {lam} is within {dist:.3g} of the spectrum")
    return dist


def resolvent(G, lam):
    """R(lam, A) = (lam - A)^{-1} by a dense linear solve."""
    lam = complex(lam)
    _check_resolvent_point(G, lam)
    n = G.n
    return np.linalg.solve(lam * np.eye(n) - G.generator, np.eye(n, dtype=complex))


def _batched_resolvent(G, mus):
    n = G.n
    mats = mus[:, None, None] * np.eye(n)[None] - G.generator[None]
    rhs = np.broadcast_to(np.eye(n, dtype=complex), mats.shape)
    return np.linalg.solve(mats, rhs)


def resolvent_l2_norm(G, lam):
    """Exact L_2(mu) norm of R(lam, A): max_k 1/|lam - lam_k|."""
    return float(1.0 / np.min(np.abs(complex(lam) - G.eigenvalues)))


def estimate_norm(T, G, cfg, method="auto", restarts=4, seed=0, starts=()):
    """Operator norm of T on L_p(Omega; l_q^d).

    method 'exact_l2' (only for p = q = 2) uses the singular values of the
    mu-symmetrized matrix; 'ascent' runs the lower-bound power iteration.
    """
    if method == "auto":
        method = "exact_l2" if (cfg.p == 2 and cfg.q == 2) else "ascent"
    if method == "exact_l2":
        if not (cfg.p == 2 and cfg.q == 2):
            raise DomainError("exact L_2 norms need p = q = 2")
        return NormEstimate(l2_operator_norm(T, G.space), None)
    if method != "ascent":
        raise DomainError(f"unknown norm method {method!r}")
    return operator_norm_lower(T, G.space, cfg, restarts=restarts, seed=seed, starts=starts)


def hille_yosida_check(G, cfg, lambda_grid, n_max=5, tol=1e-9, method="auto", restarts=4, seed=0):
    """max over the grid and 1 <= n <= n_max of ||R(lam)^n|| (Re lam)^n with M = 1, omega = 0."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    lambda_grid = [complex(l) for l in lambda_grid]
    if any(l.real <= 0 for l in lambda_grid):
        raise DomainError("Hille-Yosida grid must lie in Re lambda > 0")
    worst, arg = 0.0, None
    for lam in lambda_grid:
        R = resolvent(G, lam)
        P = np.eye(G.n)
        for k in range(1, n_max + 1):
            P = P @ R
            val = estimate_norm(P, G, cfg, method, restarts, seed).value * lam.real ** k
            if val > worst:
                worst, arg = val, (lam, k)
    rep = BoundReport("hille-yosida")
    rep.add("max ||R(lam)^n|| (Re lam)^n", worst, inputs={"argmax": str(arg), "n_max": n_max},
            formula=1.0, provenance="Hille-Yosida resolvent bound, M = 1, omega = 0",
            check=worst <= 1.0 + tol)
    return rep


def neumann_partial_sums(G, lam, mu, terms):
    """Partial sums of sum_n (mu - lam)^n R(mu)^(n+1), which converge to R(lam)."""
    Rm = resolvent(G, mu)
    out, term, sums = np.zeros_like(Rm), Rm.copy(), []
    for _ in range(terms):
        out = out + term
        sums.append(out.copy())
        term = (mu - lam) * term @ Rm
    return sums


def sector_constant(G, cfg, r_grid, s_grid, method="auto", restarts=4, seed=0):
    """Empirical smallest C with ||R(r + is)|| <= C / |s| on the grid."""
    if len(r_grid) == 0 or len(s_grid) == 0:
        raise DomainError("grids must be nonempty")
    if any(s == 0 for s in s_grid):
        raise DomainError("s = 0 is not allowed in the sector scan")
    best = 0.0
    for r in r_grid:
        for s in s_grid:
            lam = complex(r, s)
            R = resolvent(G, lam)
            best = max(best, abs(s) * estimate_norm(R, G, cfg, method, restarts, seed).value)
    return best


def contour_q_param(C, arg_z):
    """q = (1 + C u)/(1 + C) with u = C tan|arg z|."""
    u = C * math.tan(abs(arg_z))
    if u >= 1:
        raise DomainError(f"|arg z| = {abs(arg_z):.4g} is outside the sector arctan(1/C)")
    return (1.0 + C * u) / (1.0 + C)


@dataclass
class Contour:
    z: complex
    q_param: float
    C: float
    angle: float
    radius: float
    r_max: float
    eps_prime: float
    nodes: int


def _contour_pieces(G, contour, nodes):
    z, psi, rho = contour.z, contour.angle, contour.radius
    theta, wt = gauss_legendre(-psi, psi, nodes)
    mu_arc = rho * np.exp(1j * theta)
    # (1/2 pi i) int e^{mu z} R(mu) i mu dtheta
    arc = np.einsum("k,kij->ij", wt * np.exp(mu_arc * z) * mu_arc / (2 * math.pi),
                    _batched_resolvent(G, mu_arc))
    U = math.log(contour.r_max * abs(z))
    uu, wu = gauss_legendre(0.0, U, nodes)
    r = np.exp(uu) / abs(z)
    total = arc
    for sign in (1, -1):
        e = np.exp(sign * 1j * psi)
        mu = r * e
        coeff = sign * wu * r * np.exp(mu * z) * e / (2j * math.pi)
        total = total + np.einsum("k,kij->ij", coeff, _batched_resolvent(G, mu))
    return total


def build_contour(z, C, q_param=None, tol=1e-8):
    z = complex(z)
    if z == 0:
        raise DomainError("z = 0: T(0) is the identity, no contour needed")
    arg = abs(math.atan2(z.imag, z.real))
    if q_param is None:
        q_param = contour_q_param(C, arg)
    if not (0 < q_param < 1):
        raise DomainError("q_param must lie in (0, 1)")
    half = math.atan(q_param / C)
    if not arg < half:
        raise DomainError(f"|arg z| = {arg:.4g} not below arctan(q/C) = {half:.4g}")
    eps_prime = math.sin(half - arg)
    M_est = math.sqrt(C * C + 1.0) / (1.0 - q_param)
    r_max = max(2.0 / abs(z), math.log(10.0 * M_est / tol) / (eps_prime * abs(z)))
    return Contour(z, q_param, C, math.pi / 2 + half, 1.0 / abs(z), r_max, eps_prime, 0)


def contour_exp(G, z, C=1.0, q_param=None, tol=1e-8, nodes=64, max_nodes=4096, return_contour=False):
    """exp(zA) from the Cauchy integral of e^{mu z} R(mu, A) over arc + two rays.

    Gauss-Legendre nodes on the arc (in angle) and on each ray (in
    log(r|z|)) are doubled until two successive results differ by < tol/2.
    """
    contour = build_contour(z, C, q_param, tol)
    prev = _contour_pieces(G, contour, nodes)
    while True:
        nodes *= 2
        cur = _contour_pieces(G, contour, nodes)
        diff = float(np.abs(cur - prev).max())
        scale = max(1.0, float(np.abs(cur).max()))
        if diff < 0.5 * tol * scale:
            contour.nodes = nodes
            return (cur, contour) if return_contour else cur
        if nodes >= max_nodes:
            raise ConvergenceError(f"contour quadrature stalled at {diff:.3g}", achieved=diff)
        prev = cur


def default_time_grid(G, points=400):
    gap = G.spectral_gap or 1.0
    return np.logspace(math.log10(1e-4 / gap), math.log10(1e2 / gap), points)


@dataclass
class TimeScan:
    value: float
    argmax_t: float
    grid_sup: float
    limit: float = None
    converged: bool = True


def _scan(G, cfg, t_grid, op_at, method, restarts, seed, refine):
    t_grid = np.asarray(t_grid, dtype=float)
    vals, start, converged = [], (), True
    for t in t_grid:
        est = estimate_norm(op_at(t), G, cfg, method, restarts, seed, starts=start)
        if est.maximizer is not None:
            start = (est.maximizer,)
        converged &= est.converged
        vals.append(est.value)
    vals = np.array(vals)
    k = int(np.argmax(vals))
    best, arg = float(vals[k]), float(t_grid[k])
    if refine and 0 < k < len(t_grid) - 1:
        f = lambda lt: -estimate_norm(op_at(math.exp(lt)), G, cfg, method, restarts, seed).value
        res = minimize_scalar(f, bounds=(math.log(t_grid[k - 1]), math.log(t_grid[k + 1])),
                              method="bounded", options={"xatol": 1e-10})
        if -res.fun > best:
            best, arg = float(-res.fun), float(math.exp(res.x))
    return best, arg, converged


def kato_epsilon(G, cfg, t_grid=None, method="auto", restarts=4, seed=0, refine=True):
    """eps = 2 - sup_t ||I - T_t||, the sup including the t -> inf limit ||I - Pi||.

    Returns a TimeScan whose `value` is eps and `argmax_t` the maximizing t
    (math.inf when the limit dominates).
    """
    t_grid = default_time_grid(G) if t_grid is None else t_grid
    I = np.eye(G.n)
    sup, arg, conv = _scan(G, cfg, t_grid, lambda t: I - semigroup_at(G, t), method, restarts, seed, refine)
    grid_sup = sup
    limit = None
    if G.ergodic:
        limit = estimate_norm(I - G.kernel_projection, G, cfg, method, restarts, seed).value
        if limit >= sup:
            sup, arg = limit, math.inf
    else:
        warnings.warn("chain is not ergodic (no spectral gap); eps uses the grid only")
    return TimeScan(2.0 - sup, arg, grid_sup, limit, conv)


def kato_criterion_check(T, zeta, space, cfg, restarts=32, seed=0, cond_max=1e13):
    """Smallest K with ||(zeta I - T) x|| >= ||x|| / K, i.e. ||(zeta I - T)^{-1}||.

    Returns math.inf when zeta I - T is numerically singular.
    """
    zeta = complex(zeta)
    if abs(abs(zeta) - 1.0) > 1e-12:
        raise DomainError("|zeta| must be 1")
    T = np.asarray(T)
    M = zeta * np.eye(T.shape[0]) - T
    if zeta.imag == 0 and not np.iscomplexobj(T):
        M = M.real
    if np.linalg.cond(M) > cond_max:
        return math.inf
    inv = np.linalg.inv(M)
    return operator_norm_lower(inv, space, cfg, restarts=restarts, seed=seed).value


def max_t_derivative(G, cfg, t_grid=None, method="auto", restarts=4, seed=0, refine=True):
    """sup_t ||t T'(t)|| = sup_t ||t A exp(tA)|| over the grid (refined near the argmax)."""
    t_grid = default_time_grid(G) if t_grid is None else t_grid
    w = G.eigenvalues
    sup, arg, conv = _scan(G, cfg, t_grid, lambda t: G.spectral(t * w * np.exp(t * w)),
                           method, restarts, seed, refine)
    return TimeScan(sup, arg, sup, None, conv)
