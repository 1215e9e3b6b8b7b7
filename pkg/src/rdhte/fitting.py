"""One-sided kernel-weighted least squares on the interacted basis.

Conventions shared by every formula downstream:

    u_i  = (x_i - c) / h
    Gram = (1/(n h)) sum_i 1(side) K(u_i) r(u_i, W_i) r(u_i, W_i)'
    score= (1/(n h)) sum_i 1(side) K(u_i) r(u_i, W_i) y_i

with n the TOTAL sample size (both sides), so constants match across the
bias, variance, and bandwidth formulas. Coefficients are solved from an
orthogonal decomposition of the square-root-weighted design, never by
inverting the Gram; the Gram is still materialized for sandwich formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import design_rows, n_params, scaling_diag
from .errors import SingularGram
from .kernels import kernel_eval
from .model import RdSample

__all__ = [
    "SideFit",
    "side_design",
    "fit_side",
    "long_short_max_relative_error",
    "long_short_equivalence_check",
]

#: Gram reciprocal-condition threshold below which the fit is refused
RCOND_MIN = 1e-12


@dataclass(frozen=True)
class SideFit:
    """Result of a one-sided weighted least squares fit.

    Attributes
    ----------
    side : str
        "left" or "right".
    h : float
        Bandwidth used.
    gram : ndarray (k, k)
        Scaled Gram matrix (see module docstring).
    score : ndarray (k,)
        Scaled score vector.
    theta : ndarray (k,)
        Coefficients on raw powers of (x - c) and their covariate
        interactions (the scaling matrix is already applied).
    theta_norm : ndarray (k,)
        Coefficients on normalized powers u = (x-c)/h; theta_norm equals
        scaling_diag(h) * theta.
    residuals : ndarray (m,)
        In-window residuals y_i - r(x_i - c, W_i)' theta.
    leverages : ndarray (m,)
        Diagonal of the weighted projection matrix for in-window rows.
    eff_n : int
        Number of observations with positive kernel weight.
    idx : ndarray (m,)
        Row indices of in-window observations in the original sample.
    u : ndarray (m,)
        Scaled distances of in-window observations.
    kvals : ndarray (m,)
        Kernel values K(u_i) (without the 1/h factor).
    design : ndarray (m, k)
        Basis rows r(u_i, W_i) for in-window observations.
    n_total : int
        Full sample size entering the 1/(n h) normalizations.
    p, s, d : int
        Basis layout parameters.
    kernel : str
        Kernel name used.
    """

    side: str
    h: float
    gram: np.ndarray
    score: np.ndarray
    theta: np.ndarray
    theta_norm: np.ndarray
    residuals: np.ndarray
    leverages: np.ndarray
    eff_n: int
    idx: np.ndarray
    u: np.ndarray
    kvals: np.ndarray
    design: np.ndarray
    n_total: int
    p: int
    s: int
    d: int
    kernel: str

    @property
    def n_coef(self) -> int:
        return self.theta.shape[0]

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        """Solve gram @ z = rhs (rhs may be a matrix)."""
        return np.linalg.solve(self.gram, rhs)


def _window(sample: RdSample, side: str, h: float, kernel: str):
    """Indices, scaled distances, and kernel values of one side's window."""
    mask = sample.side_mask(side)
    u_all = (sample.x - sample.cutoff) / h
    kv = kernel_eval(u_all, kernel)
    mask &= kv > 0.0
    idx = np.nonzero(mask)[0]
    return idx, u_all[idx], kv[idx]


def side_design(
    sample: RdSample, side: str, h: float, p: int, s: int, kernel: str
):
    """Design rows and kernel weights for one side's window.

    Returns
    -------
    (rows, weights, idx)
        rows : ndarray (m, k), interacted basis at (u_i, W_i)
        weights : ndarray (m,), K(u_i)/h (strictly positive)
        idx : ndarray (m,), original row indices

    The window may be empty (zero rows). A boundary observation with
    |x - c| = h is included iff its kernel weight is strictly positive,
    so the triangular kernel excludes it while the uniform includes it.
    """
    if h <= 0:
        from .errors import NonPositiveBandwidth

        raise NonPositiveBandwidth(f"bandwidth must be > 0, got {h}")
    idx, u, kv = _window(sample, side, h, kernel)
    rows = design_rows(u, sample.w[idx], p, s)
    return rows, kv / h, idx


def fit_side(
    sample: RdSample, side: str, h: float, p: int, s: int, kernel: str
) -> SideFit:
    """Fit the one-sided interacted local polynomial by weighted least squares.

    Parameters
    ----------
    sample : RdSample
    side : {"left", "right"}
    h : float
        Bandwidth (> 0).
    p, s : int
        Main and interaction polynomial orders.
    kernel : str
        Kernel name.

    Returns
    -------
    SideFit

    Raises
    ------
    SingularGram
        If the Gram's reciprocal condition estimate falls below 1e-12
        (too few effective observations or collinear covariates within
        the window).
    """
    rows, weights, idx = side_design(sample, side, h, p, s, kernel)
    n = sample.n
    kv = weights * h  # K(u_i) without the 1/h
    u = (sample.x[idx] - sample.cutoff) / h

    k_dim = n_params(p, s, sample.d)
    gram = (rows * (kv / (n * h))[:, None]).T @ rows
    score = rows.T @ (kv / (n * h) * sample.y[idx])

    sv = np.linalg.svd(gram, compute_uv=False) if k_dim else np.array([1.0])
    rcond = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    if rcond < RCOND_MIN:
        raise SingularGram(side, rcond)

    sqw = np.sqrt(kv)
    beta, *_ = np.linalg.lstsq(rows * sqw[:, None], sample.y[idx] * sqw, rcond=None)

    theta = beta / scaling_diag(h, p, s, sample.d)
    resid = sample.y[idx] - rows @ beta
    ginv_rt = np.linalg.solve(gram, rows.T)
    leverages = np.einsum("ij,ji->i", rows, ginv_rt) * kv / (n * h)

    return SideFit(
        side=side,
        h=float(h),
        gram=gram,
        score=score,
        theta=theta,
        theta_norm=beta,
        residuals=resid,
        leverages=leverages,
        eff_n=int(idx.size),
        idx=idx,
        u=u,
        kvals=kv,
        design=rows,
        n_total=n,
        p=p,
        s=s,
        d=sample.d,
        kernel=kernel,
    )


def long_short_max_relative_error(
    sample: RdSample, h: float, p: int, s: int, kernel: str
) -> float:
    """Max relative gap between the long interacted regression and the
    two short one-sided fits.

    The long regression puts Y on
        (r_p(u)', T r_p(u)', W' x r_s(u)', T W' x r_s(u)')
    with the combined kernel weights of both windows. By the partitioned
    regression theorem its non-T blocks equal the left fit and its
    T-interacted blocks equal the right-minus-left coefficient differences;
    this function measures how far the two solve paths actually are.

    Raises SingularGram if either short fit (or the long solve) fails.
    """
    left = fit_side(sample, "left", h, p, s, kernel)
    right = fit_side(sample, "right", h, p, s, kernel)

    idx = np.concatenate([left.idx, right.idx])
    u = np.concatenate([left.u, right.u])
    kv = np.concatenate([left.kvals, right.kvals])
    t = np.concatenate(
        [np.zeros(left.idx.size), np.ones(right.idx.size)]
    )
    base = design_rows(u, sample.w[idx], p, s)
    long_design = np.hstack([base, base * t[:, None]])

    sqw = np.sqrt(kv)
    coef, *_ = np.linalg.lstsq(
        long_design * sqw[:, None], sample.y[idx] * sqw, rcond=None
    )
    k_dim = base.shape[1]
    short = np.concatenate(
        [left.theta_norm, right.theta_norm - left.theta_norm]
    )
    long_blocks = np.concatenate([coef[:k_dim], coef[k_dim:]])
    scale = max(float(np.max(np.abs(short))), 1e-300)
    return float(np.max(np.abs(long_blocks - short))) / scale


def long_short_equivalence_check(
    sample: RdSample,
    h: float,
    p: int,
    s: int,
    kernel: str,
    tol: float = 1e-10,
) -> bool:
    """True iff the long-regression coefficients reproduce the short-fit
    levels and differences within relative tolerance."""
    return long_short_max_relative_error(sample, h, p, s, kernel) < tol
