"""Reversible Markov kernels, the diffusion semigroups they generate, Rota's
two-coordinate dilation of S^2 and the subordinated Poisson semigroup.

Generator convention: the stored matrix is the signed generator A (A 1 = 0,
spectrum in (-inf, 0]) so that T_t = exp(tA). Stein's positive operator is -A.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import ConvergenceError, DomainError, StructuralError
from .quadrature import composite_gauss_legendre
from .spaces import FiniteMeasureSpace, endpoint_norms


@dataclass(frozen=True)
class MarkovOperator:
    space: FiniteMeasureSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.space.n, self.space.n):
            raise StructuralError(f"kernel shape {m.shape} does not match {self.space.n} atoms")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self):
        return self.space.n


@dataclass
class MarkovReport:
    valid: bool
    violations: dict
    l1_norm: float
    linf_norm: float

    def __str__(self):
        if self.valid:
            return "valid"
        return "invalid: " + ", ".join(f"{k}={v:.3g}" for k, v in self.violations.items())


def validate_markov(S, tol=1e-12):
    """Check positivity, S1 = 1, detailed balance and unit endpoint norms.

    Accepts a MarkovOperator or a DiffusionSemigroup built from a kernel.
    Violations larger than `tol` are listed with their magnitude.
    """
    if isinstance(S, DiffusionSemigroup):
        if S.kernel is None:
            raise StructuralError("semigroup has no jump kernel; validate semigroup_at(G, t) instead")
        S = S.kernel
    m, mu = S.matrix, S.space.weights
    found = {
        "positivity": float(max(0.0, -m.min())),
        "row_sums": float(np.abs(m.sum(axis=1) - 1.0).max()),
        "detailed_balance": float(np.abs(mu[:, None] * m - (mu[:, None] * m).T).max()),
    }
    l1, linf = endpoint_norms(m, S.space)
    found["l1_norm"] = abs(l1 - 1.0)
    found["linf_norm"] = abs(linf - 1.0)
    violations = {k: v for k, v in found.items() if v > tol}
    return MarkovReport(not violations, violations, l1, linf)


class DiffusionSemigroup:
    """T_t = exp(tA) for a mu-self-adjoint generator with A 1 = 0.

    The spectral decomposition is computed once through the symmetric matrix
    D^(1/2) A D^(-1/2). Columns of `eigvecs` are mu-orthonormal, and
    `coefficients @ f` expands f in that basis.
    """

    def __init__(self, space, generator, kernel=None, check=True, tol=1e-10):
        A = np.array(generator, dtype=float)
        if A.shape != (space.n, space.n):
            raise StructuralError(f"generator shape {A.shape} does not match {space.n} atoms")
        A.setflags(write=False)
        self.space = space
        self.generator = A
        self.kernel = kernel
        mu = space.weights
        s = np.sqrt(mu)
        B = s[:, None] * A / s[None, :]
        asym = np.abs(B - B.T).max()
        scale = max(1.0, np.abs(A).max())
        if asym > tol * scale:
            raise StructuralError(f"generator is not mu-self-adjoint (asymmetry {asym:.3g})")
        w, U = np.linalg.eigh(0.5 * (B + B.T))
        order = np.argsort(w)[::-1]
        w, U = w[order], U[:, order]
        if check:
            if np.abs(A.sum(axis=1)).max() > tol * scale:
                raise StructuralError("generator must annihilate constants (A 1 = 0)")
            if w.max() > tol * scale:
                raise StructuralError(f"generator has a positive eigenvalue {w.max():.3g}")
            off = A - np.diag(np.diag(A))
            if off.min() < -tol * scale:
                raise StructuralError("generator has a negative off-diagonal rate")
        self._zero_tol = 1e-12 * scale
        w = np.where(np.abs(w) < self._zero_tol, 0.0, w)
        self.eigenvalues = w
        self.eigvecs = U / s[:, None]
        self.coefficients = U.T * s[None, :]
        for arr in (self.eigenvalues, self.eigvecs, self.coefficients):
            arr.setflags(write=False)

    @classmethod
    def from_kernel(cls, S, rate=1.0):
        """Semigroup generated by rate * (S - I)."""
        return cls(S.space, rate * (S.matrix - np.eye(S.n)), kernel=S)

    @property
    def n(self):
        return self.space.n

    @cached_property
    def spectral_gap(self):
        """Smallest nonzero |eigenvalue| (0.0 if the generator is zero)."""
        nz = np.abs(self.eigenvalues[self.eigenvalues != 0.0])
        return float(nz.min()) if nz.size else 0.0

    @cached_property
    def spectral_radius(self):
        return float(np.abs(self.eigenvalues).max())

    @property
    def ergodic(self):
        return int(np.count_nonzero(self.eigenvalues == 0.0)) == 1

    @cached_property
    def kernel_projection(self):
        """Spectral projection onto ker A (the mean projection for ergodic chains)."""
        zero = self.eigenvalues == 0.0
        return self.eigvecs[:, zero] @ self.coefficients[zero, :]

    def spectral(self, values):
        """Matrix with eigenvalues `values` on the cached eigenbasis."""
        values = np.asarray(values)
        return (self.eigvecs * values[None, :]) @ self.coefficients


def semigroup_at(G, z):
    """exp(zA) from the spectral decomposition; real dtype for real z."""
    z = complex(z)
    if z.imag == 0.0:
        return G.spectral(np.exp(z.real * G.eigenvalues))
    return G.spectral(np.exp(z * G.eigenvalues))


@dataclass
class DilationBundle:
    """Two-coordinate dilation on Omega x Omega with weights mu_i S_ij.

    `atoms` lists the kept (i, j) pairs, `embed` lifts functions of the first
    coordinate, and `E_A`, `E_B` are the conditional expectations onto the
    first- and second-coordinate sigma-algebras.
    """

    big_space: FiniteMeasureSpace
    atoms: np.ndarray
    embed: np.ndarray = field(repr=False)
    E_A: np.ndarray = field(repr=False)
    E_B: np.ndarray = field(repr=False)

    def factor(self):
        return self.E_A @ self.E_B @ self.embed


def build_rota_dilation(S, tol=1e-12):
    """Realize T = S^2 as E_A E_B restricted to embedded functions."""
    report = validate_markov(S, tol=max(tol, 1e-10))
    if not report.valid:
        raise StructuralError(f"not a symmetric Markovian kernel: {report}")
    mu, m = S.space.weights, S.matrix
    big = mu[:, None] * m
    ii, jj = np.nonzero(big > 0)
    w = big[ii, jj]
    N = w.size
    embed = np.zeros((N, S.n))
    embed[np.arange(N), ii] = 1.0
    same_i = ii[:, None] == ii[None, :]
    same_j = jj[:, None] == jj[None, :]
    row_mass = np.bincount(ii, weights=w, minlength=S.n)
    col_mass = np.bincount(jj, weights=w, minlength=S.n)
    E_A = np.where(same_i, w[None, :] / row_mass[ii][:, None], 0.0)
    E_B = np.where(same_j, w[None, :] / col_mass[jj][:, None], 0.0)
    return DilationBundle(FiniteMeasureSpace(w), np.stack([ii, jj], axis=1), embed, E_A, E_B)


def rota_deviation(S, bundle=None):
    """max |E_A E_B embed f - embed S^2 f| over the standard basis of functions on Omega."""
    bundle = build_rota_dilation(S) if bundle is None else bundle
    return float(np.abs(bundle.factor() - bundle.embed @ (S.matrix @ S.matrix)).max())


def _subordination_factors(lams, t, panels, lo, hi):
    # (1/sqrt(pi)) int exp(-s) s^(-1/2) exp(-lam t^2/(4s)) ds with s = e^u
    u, w = composite_gauss_legendre(lo, hi, panels)
    s = np.exp(u)
    expo = 0.5 * u[None, :] - s[None, :] - np.asarray(lams)[:, None] * t * t / (4.0 * s[None, :])
    return (np.exp(expo) * w[None, :]).sum(axis=1) / math.sqrt(math.pi)


def subordinated_poisson(G, t, tol=1e-8, max_panels=4096):
    """P_t = (1/sqrt(pi)) int_0^inf e^{-s} s^{-1/2} T_{t^2/(4s)} ds by quadrature.

    The s = e^u substitution removes the endpoint singularity; the u-range is
    cut where the neglected tails are below tol/10 and the composite
    Gauss-Legendre panels are doubled until successive results agree.
    """
    if not t > 0:
        raise DomainError("subordination time must be > 0")
    lams = -G.eigenvalues
    lo = 2.0 * math.log(tol / 20.0)
    a_max = float(lams.max()) * t * t / 4.0
    hi = max(math.log(math.log(10.0 / tol) + 10.0), 0.5 * math.log(max(a_max, 1.0)) + 3.0)
    panels = max(8, int(math.ceil((hi - lo) / 0.5)))
    prev = _subordination_factors(lams, t, panels, lo, hi)
    while True:
        panels *= 2
        cur = _subordination_factors(lams, t, panels, lo, hi)
        err = float(np.abs(cur - prev).max())
        if err < tol / 10.0:
            return G.spectral(cur)
        if panels >= max_panels:
            raise ConvergenceError(f"subordination quadrature stalled at {err:.3g}", achieved=err)
        prev = cur


def poisson_spectral(G, t):
    """exp(-t sqrt(-A)) evaluated spectrally."""
    return G.spectral(np.exp(-t * np.sqrt(np.maximum(-G.eigenvalues, 0.0))))


def two_point_chain(rate=1.0):
    A = rate * np.array([[-1.0, 1.0], [1.0, -1.0]])
    space = FiniteMeasureSpace.uniform(2)
    c = max(1.0, rate)
    return DiffusionSemigroup(space, A, kernel=MarkovOperator(space, np.eye(2) + A / c))


def cycle_chain(n):
    """Simple random walk on the n-cycle, generator S - I."""
    if n < 2:
        raise DomainError("need n >= 2")
    S = 0.5 * (np.roll(np.eye(n), 1, axis=1) + np.roll(np.eye(n), -1, axis=1))
    return DiffusionSemigroup.from_kernel(MarkovOperator(FiniteMeasureSpace.uniform(n), S))


def complete_graph_chain(n):
    if n < 2:
        raise DomainError("need n >= 2")
    S = (np.ones((n, n)) - np.eye(n)) / (n - 1)
    return DiffusionSemigroup.from_kernel(MarkovOperator(FiniteMeasureSpace.uniform(n), S))


def random_reversible_kernel(n, seed=0):
    """Random kernel reversible for a random probability measure.

    A symmetric positive conductance matrix W is normalized against mu:
    S_ij = W_ij / (c mu_i) off the diagonal, with the holding probability
    filling each row, so mu_i S_ij = W_ij / c is symmetric.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.2, 1.0, n)
    mu = mu / mu.sum()
    W = rng.uniform(0.0, 1.0, (n, n))
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    c = 1.25 * float((W.sum(axis=1) / mu).max())
    S = W / (c * mu[:, None])
    S = S + np.diag(1.0 - S.sum(axis=1))
    return MarkovOperator(FiniteMeasureSpace(mu), S)


def random_reversible_chain(n, seed=0):
    return DiffusionSemigroup.from_kernel(random_reversible_kernel(n, seed))


CHAIN_BUILDERS = {
    "two_point": lambda n=2, seed=0, rate=1.0: two_point_chain(rate),
    "cycle": lambda n, seed=0, rate=1.0: cycle_chain(n),
    "complete": lambda n, seed=0, rate=1.0: complete_graph_chain(n),
    "random": lambda n, seed=0, rate=1.0: random_reversible_chain(n, seed),
}


def build_chain(kind, n=2, seed=0, rate=1.0):
    try:
        builder = CHAIN_BUILDERS[kind]
    except KeyError:
        raise DomainError(f"unknown chain kind {kind!r}; choose from {sorted(CHAIN_BUILDERS)}") from None
    return builder(n=n, seed=seed, rate=rate)
