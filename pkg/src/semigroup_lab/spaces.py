"""Finite measure spaces, the mixed norms of L_p(Omega; l_q^d), and norm probes.

Operator norms are estimated from below by a duality-map power iteration and
from above by Riesz-Thorin interpolation of the exact L_1 and L_inf norms.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, NumericError, StructuralError


@dataclass(frozen=True)
class FiniteMeasureSpace:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise StructuralError("weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("all atom weights must be finite and > 0")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n, total=1.0):
        return cls(np.full(int(n), total / int(n)))

    @property
    def n(self):
        return self.weights.size

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def normalized(self):
        return FiniteMeasureSpace(self.weights / self.weights.sum())

    def mean(self, f):
        """mu-average of f over the atoms (rows of f)."""
        f = np.asarray(f)
        return np.tensordot(self.weights, f, axes=(0, 0)) / self.total_mass


@dataclass(frozen=True)
class MixedNormConfig:
    p: float = 2.0
    q: float = 2.0
    d: int = 1

    def __post_init__(self):
        if not (1 < self.p < math.inf):
            raise DomainError(f"outer exponent p must lie in (1, inf), got {self.p}")
        if not (2 <= self.q < math.inf):
            raise DomainError(f"inner exponent q must lie in [2, inf), got {self.q}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"inner dimension d must be a positive integer, got {self.d}")


@dataclass(frozen=True)
class FunctionField:
    """An X-valued function on a finite space: row i is f(omega_i) in R^d (or C^d)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise StructuralError("a function field is an n x d array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


def as_values(f, space=None, cfg=None):
    """Return f as an n x d array, checking it against `space` and `cfg`."""
    v = f.values if isinstance(f, FunctionField) else np.asarray(f)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise StructuralError(f"expected an n x d array, got shape {v.shape}")
    if space is not None and v.shape[0] != space.n:
        raise StructuralError(f"field has {v.shape[0]} rows, space has {space.n} atoms")
    if cfg is not None and v.shape[1] != cfg.d:
        raise StructuralError(f"field has inner dimension {v.shape[1]}, config says {cfg.d}")
    if not np.all(np.isfinite(v)):
        raise NumericError("field contains non-finite entries")
    return v


class NestedNorm:
    """Weighted iterated l_e norm over the axes of an array.

    ``NestedNorm([p, q], [mu, None])`` is the norm of L_p(mu; l_q^d) on n x d
    arrays: axis 0 is reduced last with exponent p and weights mu. The dual
    norm is taken with respect to the plain bilinear pairing sum(x * y).
    Leading axes beyond the norm's own are treated as a batch.
    """

    def __init__(self, exponents, weights=None):
        self.exponents = tuple(float(e) for e in exponents)
        if weights is None:
            weights = [None] * len(self.exponents)
        if len(weights) != len(self.exponents):
            raise StructuralError("one weight vector (or None) per exponent")
        self.weights = tuple(None if w is None else np.asarray(w, dtype=float) for w in weights)
        for e in self.exponents:
            if not (1 <= e <= math.inf):
                raise DomainError(f"norm exponent {e} outside [1, inf]")

    @property
    def ndim(self):
        return len(self.exponents)

    def _prepare(self, x):
        x = np.asarray(x)
        b = x.ndim - self.ndim
        if b < 0:
            raise StructuralError(f"norm expects {self.ndim} axes, got {x.ndim}")
        a = np.abs(x)
        axes = tuple(range(b, x.ndim))
        scale = a.max(axis=axes, keepdims=True) if a.size else np.zeros(a.shape[:b] + (1,) * self.ndim)
        safe = np.where(scale > 0, scale, 1.0)
        return x, a / safe, scale, b

    def _levels(self, a, b):
        # levels[l] holds the level-l partial norms, shape a.shape[:b + l]
        levels = [a]
        cur = a
        for k in range(self.ndim - 1, -1, -1):
            e, w = self.exponents[k], self.weights[k]
            axis = b + k
            if e == math.inf:
                cur = cur.max(axis=axis)
            else:
                terms = cur ** e
                if w is not None:
                    shape = [1] * cur.ndim
                    shape[axis] = -1
                    terms = terms * w.reshape(shape)
                cur = terms.sum(axis=axis) ** (1.0 / e)
            levels.append(cur)
        levels.reverse()
        return levels

    def norms(self, x):
        x, a, scale, b = self._prepare(x)
        return self._levels(a, b)[0] * scale.reshape(scale.shape[:b])

    def __call__(self, x):
        out = self.norms(x)
        return float(out) if np.ndim(out) == 0 else out

    def dual(self):
        exps, ws = [], []
        for e, w in zip(self.exponents, self.weights):
            if e in (1.0, math.inf):
                raise DomainError("dual maps are only provided for exponents in (1, inf)")
            ec = e / (e - 1.0)
            exps.append(ec)
            ws.append(None if w is None else w ** (1.0 - ec))
        return NestedNorm(exps, ws)

    def duality_map(self, x):
        """Unit dual vector J with sum(J * x) = ||x|| (the gradient of the norm)."""
        x, a, scale, b = self._prepare(x)
        levels = self._levels(a, b)
        grad = np.ones(a.shape[:b])
        for k, (e, w) in enumerate(zip(self.exponents, self.weights)):
            outer = levels[k][..., None]
            inner = levels[k + 1]
            pos = outer > 0
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(pos, (inner / np.where(pos, outer, 1.0)) ** (e - 1.0), 0.0)
            if w is not None:
                shape = [1] * (b + k + 1)
                shape[b + k] = -1
                factor = factor * w.reshape(shape)
            grad = grad[..., None] * factor
        nz = a > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.where(nz, np.conj(x) / np.where(nz, np.abs(x), 1.0), 0.0)
        return grad * phase


def mixed_norm(f, space, cfg):
    """(sum_i mu_i ||f(omega_i)||_q^p)^(1/p) for f in L_p(Omega; l_q^d)."""
    v = as_values(f, space, cfg)
    return NestedNorm([cfg.p, cfg.q], [space.weights, None])(v)


def mixed_norm_operator(space, cfg):
    return NestedNorm([cfg.p, cfg.q], [space.weights, None])


@dataclass
class NormEstimate:
    """Result of a norm-ascent run: a certified lower bound and its witness."""

    value: float
    maximizer: np.ndarray = field(repr=False)
    converged: bool = True
    iterations: int = 0
    restarts: int = 1

    def __float__(self):
        return float(self.value)


def norm_ascent(apply, adjoint, source, target, shape, *, restarts=32, tol=1e-9,
                patience=50, max_iter=5000, seed=0, complex_valued=False, starts=()):
    """Maximize target(apply(x)) / source(x) by duality-map power iteration.

    Each step x -> J*(adjoint(J(apply x))) does not decrease the ratio, so the
    returned value is a lower bound for the operator norm attained at an
    explicit iterate. `adjoint` is the transpose for the bilinear pairing.
    All restarts run as one batch along a leading axis, which `apply` and
    `adjoint` must broadcast over.
    """
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    if tol <= 0:
        raise DomainError("tol must be > 0")
    rng = np.random.default_rng(seed)
    source_dual = source.dual()
    dtype = complex if complex_valued else float
    shape = tuple(shape)

    # a complex warm start for a real operator keeps its real part
    candidates = [np.asarray(s if complex_valued else np.real(s), dtype=dtype).reshape(shape)
                  for s in starts][:restarts]
    while len(candidates) < restarts:
        x = rng.standard_normal(shape)
        if complex_valued:
            x = x + 1j * rng.standard_normal(shape)
        candidates.append(x.astype(dtype))
    x = np.stack(candidates)
    nx = source.norms(x)
    live = nx > 0
    x = x / np.where(live, nx, 1.0).reshape((-1,) + (1,) * len(shape))
    val = np.where(live, target.norms(apply(x)), 0.0)
    stall = np.zeros(len(x), dtype=int)
    done = ~live
    it = 0
    expand = (-1,) + (1,) * len(shape)
    while not done.all() and it < max_iter:
        it += 1
        g = adjoint(target.duality_map(apply(x)))
        x_new = source_dual.duality_map(g)
        n_new = source.norms(x_new)
        ok = n_new > 0
        x_new = x_new / np.where(ok, n_new, 1.0).reshape(expand)
        val_new = np.where(ok, target.norms(apply(x_new)), -np.inf)
        gain = (val_new - val) / np.maximum(val, 1e-300)
        better = (val_new >= val) & ~done
        x = np.where(better.reshape(expand), x_new, x)
        val = np.where(better, val_new, val)
        stall = np.where(gain < tol, stall + 1, 0)
        done |= (stall >= patience) | ~ok
    k = int(np.argmax(val))
    return NormEstimate(float(val[k]), x[k], bool(done[k]), it, len(candidates))


def operator_norm_lower(T, space, cfg, restarts=32, tol=1e-9, seed=0, patience=50,
                        max_iter=5000, starts=()):
    """Lower bound on ||T (x) Id_X|| on L_p(Omega; l_q^d), X = l_q^d.

    Returns a `NormEstimate`; `converged` is False when some restart hit the
    iteration cap before the stall criterion was met.
    """
    T = np.asarray(T)
    if T.shape != (space.n, space.n):
        raise StructuralError(f"operator shape {T.shape} does not match {space.n} atoms")
    if not np.all(np.isfinite(T)):
        raise NumericError("operator has non-finite entries")
    norm = mixed_norm_operator(space, cfg)
    Tt = np.ascontiguousarray(T.T)
    return norm_ascent(lambda x: T @ x, lambda h: Tt @ h, norm, norm, (space.n, cfg.d),
                       restarts=restarts, tol=tol, patience=patience, max_iter=max_iter,
                       seed=seed, complex_valued=np.iscomplexobj(T), starts=starts)


def endpoint_norms(T, space):
    """Exact (||T||_{L_1(mu)}, ||T||_{L_inf}) of a matrix acting on functions."""
    A = np.abs(np.asarray(T))
    if A.shape != (space.n, space.n):
        raise StructuralError(f"operator shape {A.shape} does not match {space.n} atoms")
    mu = space.weights
    l1 = float(np.max((mu @ A) / mu))
    linf = float(np.max(A.sum(axis=1)))
    return l1, linf


def operator_norm_upper(T, space, p):
    """Riesz-Thorin bound ||T||_1^(1/p) ||T||_inf^(1-1/p), valid on every L_p(Omega; X)."""
    if not (1 <= p <= math.inf):
        raise DomainError(f"p must lie in [1, inf], got {p}")
    l1, linf = endpoint_norms(T, space)
    if p == math.inf:
        return linf
    return l1 ** (1.0 / p) * linf ** (1.0 - 1.0 / p)


def l2_operator_norm(T, space):
    """Exact L_2(mu) norm via the similarity D^(1/2) T D^(-1/2)."""
    s = np.sqrt(space.weights)
    return float(np.linalg.norm(s[:, None] * np.asarray(T) / s[None, :], 2))


def _convexity_gap(norm, x, y, q, delta):
    nx, ny = norm(x), norm(y)
    scale = max(nx, ny)
    if scale == 0.0:
        return 0.0
    x, y = x / scale, y / scale
    return (norm((x + y) / 2) ** q + delta * norm((x - y) / 2) ** q
            - 0.5 * (norm(x) ** q + norm(y) ** q))


def uniform_convexity_deficit(q, delta, sample_count=2000, seed=0, d=4, n=5):
    """Largest observed violation of the power-type-q uniform convexity inequality.

    Pairs are drawn both in l_q^d and in L_q(Omega; l_q^d) over an n-atom
    probability space; a nonpositive result means no violation was found.
    """
    if q < 2:
        raise DomainError("power type requires q >= 2")
    if not (0 < delta <= 1):
        raise DomainError("delta must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.1, 1.0, n)
    spaces = [NestedNorm([q]), NestedNorm([q, q], [weights / weights.sum(), None])]
    shapes = [(d,), (n, d)]
    worst = -math.inf
    for k in range(int(sample_count)):
        which = k % 2
        norm, shape = spaces[which], shapes[which]
        x = rng.standard_normal(shape)
        if k < sample_count // 2:
            y = rng.standard_normal(shape)
        elif k % 4 < 2:
            y = -x
        else:
            y = x * (1.0 + rng.uniform(-0.1, 0.1))
        worst = max(worst, _convexity_gap(norm, x, y, q, delta))
    return float(worst)


@dataclass
class CotypeEstimate:
    value: float
    f0: np.ndarray = field(repr=False)
    increments: list = field(repr=False)
    converged: bool = True


def _walsh_paths(depth):
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * depth), indexing="ij")).reshape(depth, -1).T
    # index of the history (eps_1..eps_{k-1}) for each path at each step
    bits = (signs > 0).astype(int)
    hist = []
    for k in range(depth):
        idx = np.zeros(signs.shape[0], dtype=int)
        for j in range(k):
            idx = 2 * idx + bits[:, j]
        hist.append(idx)
    return signs, hist


def martingale_ratio(f0, increments, q, inner_norm):
    """(sum_k E||df_k||^q)^(1/q) / sup_k (E||f_k||^q)^(1/q) for a Paley-Walsh martingale."""
    depth = len(increments)
    signs, hist = _walsh_paths(depth)
    f = np.broadcast_to(np.asarray(f0, dtype=float), (signs.shape[0], len(f0))).copy()
    sup = float(inner_norm(np.asarray(f0, dtype=float)) ** q)
    num = 0.0
    for k, v in enumerate(increments):
        step = signs[:, k, None] * v[hist[k]]
        f = f + step
        num += float(np.mean([inner_norm(r) ** q for r in step]))
        sup = max(sup, float(np.mean([inner_norm(r) ** q for r in f])))
    if sup == 0.0:
        return 0.0
    return (num / sup) ** (1.0 / q)


def cotype_lower_bound(q, d, depth, restarts=8, seed=0, inner_q=None, maxiter=2000):
    """Lower bound for the martingale cotype-q constant of X = l_{inner_q}^d.

    Maximizes the cotype ratio over X-valued Paley-Walsh martingales on
    {-1, 1}^depth. The first start has f_0 = 0.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if q < 2:
        raise DomainError("martingale cotype needs q >= 2")
    inner_q = q if inner_q is None else inner_q
    inner = NestedNorm([inner_q])
    sizes = [2 ** k for k in range(depth)]
    n_par = d * (1 + sum(sizes))

    def unpack(theta):
        f0 = theta[:d]
        out, pos = [], d
        for s in sizes:
            out.append(theta[pos:pos + s * d].reshape(s, d))
            pos += s * d
        return f0, out

    def objective(theta):
        f0, incs = unpack(theta)
        return -martingale_ratio(f0, incs, q, inner)

    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        theta = rng.standard_normal(n_par)
        if r == 0:
            theta[:d] = 0.0
        res = minimize(objective, theta, method="L-BFGS-B", options={"maxiter": maxiter})
        cand_theta = res.x if res.fun <= objective(theta) else theta
        val = -objective(cand_theta)
        if best is None or val > best.value:
            f0, incs = unpack(cand_theta)
            best = CotypeEstimate(val, f0, incs, bool(res.success))
    return best
