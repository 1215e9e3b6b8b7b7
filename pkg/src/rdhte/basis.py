"""Polynomial and interacted regression bases, scaling matrices, extractors.

The interacted basis stacks a main polynomial block of order p with one
order-s polynomial block per heterogeneity covariate:

    r(u, w) = (1, u, ..., u^p,  w_1*(1, u, ..., u^s),  ...,  w_d*(...))'

so its length is 1 + p + d*(1 + s). All downstream index arithmetic
(extractors, bias-channel positions) follows this layout.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonPositiveBandwidth, NuOutOfRange

__all__ = [
    "poly_basis",
    "interacted_basis",
    "design_rows",
    "scaling_matrix",
    "extractor_vector",
    "n_params",
]


def n_params(p: int, s: int, d: int) -> int:
    """Length of the interacted basis vector."""
    return 1 + p + d * (1 + s)


def poly_basis(u, q: int):
    """Polynomial basis (1, u, ..., u^q)'.

    Parameters
    ----------
    u : float or array-like
        Evaluation point(s).
    q : int
        Polynomial order, >= 0.

    Returns
    -------
    ndarray
        Shape (q+1,) for scalar input, (len(u), q+1) for vector input.
    """
    if q < 0:
        raise ValueError("polynomial order must be >= 0")
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return arr ** np.arange(q + 1, dtype=float)
    return arr[:, None] ** np.arange(q + 1, dtype=float)


def interacted_basis(u: float, w, p: int, s: int) -> np.ndarray:
    """Interacted basis vector r(u, w) at a single point.

    Concatenates poly_basis(u, p) with w_l * poly_basis(u, s) for each
    covariate l in order. Length 1 + p + d*(1+s).
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    main = poly_basis(u, p)
    if w.size == 0:
        return main
    inter = np.kron(w, poly_basis(u, s))
    return np.concatenate([main, inter])


def design_rows(u, w, p: int, s: int) -> np.ndarray:
    """Interacted basis rows for many observations at once.

    Parameters
    ----------
    u : ndarray, shape (m,)
        Scaled running-variable distances.
    w : ndarray, shape (m, d)
        Heterogeneity covariates (d may be 0).
    p, s : int
        Main and interaction polynomial orders.

    Returns
    -------
    ndarray, shape (m, 1 + p + d*(1+s))
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    m, d = w.shape[0], w.shape[1]
    main = poly_basis(u, p)
    if d == 0:
        return main
    base_s = poly_basis(u, s)
    # row-wise Kronecker of w (m,d) with base_s (m,s+1) -> (m, d*(s+1))
    inter = (w[:, :, None] * base_s[:, None, :]).reshape(m, d * (s + 1))
    return np.hstack([main, inter])


def scaling_matrix(h: float, p: int, s: int, d: int) -> np.ndarray:
    """Diagonal scaling H(h) = blockdiag(diag(h^0..h^p), I_d x diag(h^0..h^s)).

    Multiplying a coefficient vector in normalized powers u = (x-c)/h by
    H(h)^{-1} converts it to raw (x-c) powers.
    """
    if h <= 0:
        raise NonPositiveBandwidth(f"bandwidth must be > 0, got {h}")
    diag = np.concatenate(
        [h ** np.arange(p + 1, dtype=float)]
        + [h ** np.arange(s + 1, dtype=float)] * d
    )
    return np.diag(diag)


def scaling_diag(h: float, p: int, s: int, d: int) -> np.ndarray:
    """Diagonal of scaling_matrix as a vector (cheaper in hot paths)."""
    if h <= 0:
        raise NonPositiveBandwidth(f"bandwidth must be > 0, got {h}")
    return np.concatenate(
        [h ** np.arange(p + 1, dtype=float)]
        + [h ** np.arange(s + 1, dtype=float)] * d
    )


def extractor_vector(nu: int, p: int, s: int, w, lead: float = 1.0) -> np.ndarray:
    """Extractor contracting a coefficient vector to a scalar estimand.

    Entries are nu!*lead at position nu of the main block and nu!*w_l at
    position nu of covariate block l; zero elsewhere. Contracting the
    unscaled coefficients of a side fit yields the nu-th derivative of the
    fitted conditional-mean surface at the cutoff, evaluated at covariate
    value w (with lead=1), or any linear functional (s0, sw) via lead=s0,
    w=sw.

    Parameters
    ----------
    nu : int
        Derivative order, 0 <= nu <= min(p, s).
    p, s : int
        Polynomial orders of the fit being contracted.
    w : array-like, shape (d,)
        Covariate evaluation point (or the covariate part of a selector).
    lead : float
        Weight on the main block (the intercept part of a selector).

    Returns
    -------
    ndarray, shape (1 + p + d*(1+s),)
    """
    if not 0 <= nu <= min(p, s):
        raise NuOutOfRange(f"nu={nu} outside [0, min(p,s)={min(p, s)}]")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    d = w.size
    fact = float(math.factorial(nu))
    vec = np.zeros(n_params(p, s, d))
    vec[nu] = fact * lead
    for ell in range(d):
        vec[1 + p + ell * (1 + s) + nu] = fact * w[ell]
    return vec
