"""Gauss rules used throughout: composite Gauss-Legendre panels and Gauss-Jacobi
rules with the endpoint singularity carried by the weight."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=64)
def _legendre(order):
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def _jacobi(order, a, b):
    x, w = roots_jacobi(order, a, b)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, order):
    """Nodes and weights of the `order`-point Gauss-Legendre rule on [a, b]."""
    x, w = _legendre(int(order))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(a, b, panels, order=16):
    """Composite Gauss-Legendre rule with `panels` equal panels on [a, b].

    Returns
    -------
    nodes, weights : ndarray
        Flattened, strictly increasing nodes and their weights.
    """
    edges = np.linspace(a, b, int(panels) + 1)
    x, w = _legendre(int(order))
    half = 0.5 * np.diff(edges)[:, None]
    nodes = edges[:-1, None] + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def gauss_jacobi(order, a, b):
    """Rule for weight (1 - x)^a (1 + x)^b on [-1, 1]; requires a, b > -1."""
    if a <= -1 or b <= -1:
        raise ValueError(f"Jacobi exponents must exceed -1, got ({a}, {b})")
    return _jacobi(int(order), float(a), float(b))
