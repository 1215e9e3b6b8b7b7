"""Bias and variance constants and MSE-optimal bandwidth selection.

The selection pipeline per side is:

    pilot bandwidth b (rule of thumb, clamped)
      -> pilot fit of order (p+1, s+1) at b, giving the curvature
         coefficients that enter the bias formula
      -> Gram and kernel moment vectors of the main-order basis at b
      -> bias constants (two channels: running-variable curvature and
         covariate-coefficient curvature)
      -> variance constants: sandwich contraction of the main-order fit
         at b with the requested heteroskedasticity weighting

and the optimal bandwidth trades the squared bias contraction against the
variance contraction at the rate implied by the polynomial orders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import design_rows, extractor_vector, n_params, scaling_diag
from .errors import BiasDegenerate, TooFewObservations
from .fitting import SideFit, fit_side, side_design
from .model import Common, Fixed, FitSpec, RdSample, Select

__all__ = [
    "BiasConstants",
    "VarianceConstants",
    "BandwidthSelection",
    "moment_vectors",
    "pilot_bandwidth",
    "bias_constants",
    "variance_constants",
    "mse_bandwidth",
]

#: minimum observations per side before any pilot fit is attempted
MIN_SIDE_OBS = 10

#: relative weight of the variance-based regularizer guarding near-zero bias
BIAS_REG_EPS = 1e-2


def moment_vectors(
    sample: RdSample,
    side: str,
    h: float,
    p: int,
    s: int,
    a: int,
    kernel: str,
):
    """Kernel moment vectors of the interacted basis against powers of u.

    Returns the pair

        zeta = (1/(n h)) sum_i 1(side) K(u_i) r(u_i, W_i) u_i^(a+1)
        phi  = (1/(n h)) sum_i 1(side) K(u_i) r(u_i, W_i) W_i' u_i^(a+1)

    with u_i = (x_i - c)/h and n the total sample size. Empty windows give
    zero arrays.

    Returns
    -------
    (zeta, phi) : (ndarray (k,), ndarray (k, d))
    """
    if a < 0:
        raise ValueError("moment order a must be >= 0")
    rows, weights, idx = side_design(sample, side, h, p, s, kernel)
    k_dim = n_params(p, s, sample.d)
    n = sample.n
    if idx.size == 0:
        return np.zeros(k_dim), np.zeros((k_dim, sample.d))
    u = (sample.x[idx] - sample.cutoff) / h
    kv = weights * h
    common = kv / (n * h) * u ** (a + 1)
    zeta = rows.T @ common
    phi = (rows * common[:, None]).T @ sample.w[idx]
    return zeta, phi


def pilot_bandwidth(sample: RdSample, side: str, p: int, s: int) -> float:
    """Rule-of-thumb pilot bandwidth for one side.

    b = 2.576 * min(sd(X_side), IQR(X_side)/1.349) * n_side^(-1/(2 max(p,s)+5)),
    then raised if necessary so the pilot window holds at least
    min(5*(p+2), n_side) observations.

    Raises
    ------
    TooFewObservations
        If the side holds fewer than 10 observations.
    """
    x_side = sample.x[sample.side_mask(side)]
    n_side = x_side.size
    if n_side < MIN_SIDE_OBS:
        raise TooFewObservations(
            f"{side} side has {n_side} observations; need >= {MIN_SIDE_OBS}"
        )
    sd = float(np.std(x_side, ddof=1))
    iqr = float(np.quantile(x_side, 0.75) - np.quantile(x_side, 0.25))
    spread = min(sd, iqr / 1.349)
    b = 2.576 * spread * n_side ** (-1.0 / (2 * max(p, s) + 5))
    # clamp from below so the window keeps enough points for the pilot fit
    dist = np.sort(np.abs(x_side - sample.cutoff))
    m_min = min(5 * (p + 2), n_side)
    b_floor = dist[m_min - 1] * (1.0 + 1e-9)
    return max(b, b_floor)


@dataclass(frozen=True)
class BiasConstants:
    """Estimated smoothing-bias constants for one side.

    b0 is the running-variable curvature channel Gram^-1 zeta * t0 and b1
    the covariate-coefficient channel Gram^-1 phi @ t1, where t0 and t1 are
    the top-degree coefficients of the higher-order pilot fit (t0 estimates
    the (p+1)-th derivative of the main regression function over (p+1)!,
    t1 the (s+1)-th derivatives of the covariate coefficient functions over
    (s+1)!). The contraction combines the channels with the order
    indicators: the p<=s channel and the p>=s channel both fire at p=s.
    """

    side: str
    pilot_b: float
    b0: np.ndarray
    b1: np.ndarray
    zeta_route: np.ndarray
    phi_route: np.ndarray
    t0: float
    t1: np.ndarray
    p: int
    s: int

    def contraction(self, extractor: np.ndarray) -> float:
        """Bias contraction for a given extractor vector."""
        out = 0.0
        if self.p <= self.s:
            out += float(extractor @ self.b0)
        if self.p >= self.s:
            out += float(extractor @ self.b1)
        return out

    def channel_weights(self, extractor: np.ndarray):
        """Scalars multiplying the pilot coefficients in the contraction.

        Returns (g0, g1) with g0 the weight on t0 and g1 the per-covariate
        weights on t1; used to propagate pilot estimation error into the
        bias-corrected variance.
        """
        g0 = float(extractor @ self.zeta_route) if self.p <= self.s else 0.0
        if self.p >= self.s and self.phi_route.shape[1] > 0:
            g1 = extractor @ self.phi_route
        else:
            g1 = np.zeros(self.phi_route.shape[1])
        return g0, np.asarray(g1, dtype=float)


def bias_constants(
    sample: RdSample,
    side: str,
    p: int,
    s: int,
    nu: int,
    kernel: str,
    pilot_b: float,
    pilot_fit: Optional[SideFit] = None,
) -> BiasConstants:
    """Estimate the smoothing-bias constants for one side.

    A pilot fit of order (p+1, s+1) at the pilot bandwidth supplies the
    curvature coefficients; the Gram and moment vectors of the main-order
    basis are evaluated at the same bandwidth.

    Parameters
    ----------
    pilot_fit : SideFit, optional
        Reuse an existing pilot fit of order (p+1, s+1) at pilot_b.

    Raises
    ------
    SingularGram
        If the pilot fit or main-order Gram at pilot_b is singular.
    """
    d = sample.d
    if pilot_fit is None:
        pilot_fit = fit_side(sample, side, pilot_b, p + 1, s + 1, kernel)
    if pilot_fit.p != p + 1 or pilot_fit.s != s + 1:
        raise ValueError("pilot fit must have orders (p+1, s+1)")

    # top-degree pilot coefficients, unscaled (raw (x-c) powers)
    t0 = float(pilot_fit.theta[p + 1])
    t1 = np.array(
        [
            pilot_fit.theta[(p + 2) + ell * (s + 2) + (s + 1)]
            for ell in range(d)
        ],
        dtype=float,
    )

    main_fit_gram = fit_side(sample, side, pilot_b, p, s, kernel).gram
    # the running-variable channel needs the a=p moment, the covariate
    # channel the a=s moment; one call covers both when p == s
    zeta, phi_s = moment_vectors(sample, side, pilot_b, p, s, p, kernel)
    if s != p:
        _, phi_s = moment_vectors(sample, side, pilot_b, p, s, s, kernel)
    zeta_route = np.linalg.solve(main_fit_gram, zeta)
    phi_route = (
        np.linalg.solve(main_fit_gram, phi_s)
        if d > 0
        else np.zeros((n_params(p, s, d), 0))
    )
    b0 = zeta_route * t0
    b1 = phi_route @ t1 if d > 0 else np.zeros_like(zeta_route)
    return BiasConstants(
        side=side,
        pilot_b=float(pilot_b),
        b0=b0,
        b1=b1,
        zeta_route=zeta_route,
        phi_route=phi_route,
        t0=t0,
        t1=t1,
        p=p,
        s=s,
    )


@dataclass(frozen=True)
class VarianceConstants:
    """Sandwich variance pieces for one side at a given bandwidth."""

    side: str
    h: float
    meat: np.ndarray
    gram: np.ndarray
    bread_meat_bread: np.ndarray

    def contraction(self, extractor: np.ndarray) -> float:
        return float(extractor @ self.bread_meat_bread @ extractor)


def variance_constants(
    sample: RdSample,
    side: str,
    h: float,
    p: int,
    s: int,
    nu: int,
    kernel: str,
    vce: str,
    fit: Optional[SideFit] = None,
) -> VarianceConstants:
    """Sandwich variance constants for one side at bandwidth h.

    The meat uses the requested HC or cluster weighting on the residuals of
    the main-order fit at h; the result's contraction method evaluates
    extractor' Gram^-1 meat Gram^-1' extractor.
    """
    from .inference import cluster_meat, hc_weights, meat_matrix

    if fit is None:
        fit = fit_side(sample, side, h, p, s, kernel)
    if vce == "cluster":
        meat, _ = cluster_meat(fit, sample.cluster)
    else:
        meat = meat_matrix(fit, hc_weights(vce, fit))
    ginv_meat = np.linalg.solve(fit.gram, meat)
    bmb = np.linalg.solve(fit.gram, ginv_meat.T).T
    return VarianceConstants(
        side=side, h=float(h), meat=meat, gram=fit.gram, bread_meat_bread=bmb
    )


@dataclass(frozen=True)
class BandwidthSelection:
    """Outcome of MSE-optimal bandwidth selection.

    Carries the selected bandwidths, the pilot bandwidths and fits they
    were derived from, the estimated constants, and a degeneracy flag set
    when the bias denominator needed regularization.
    """

    mode: str
    h_left: float
    h_right: float
    pilot_left: float
    pilot_right: float
    v_left: float
    v_right: float
    b_left: float
    b_right: float
    bias_degenerate: bool
    pilot_fit_left: SideFit
    pilot_fit_right: SideFit
    bias_const_left: BiasConstants
    bias_const_right: BiasConstants


def _h_bounds(sample: RdSample, side: str, k_dim: int):
    dist = np.sort(np.abs(sample.x[sample.side_mask(side)] - sample.cutoff))
    m = min(k_dim + 2, dist.size)
    h_min = dist[m - 1] * (1.0 + 1e-9)
    h_max = dist[-1] * (1.0 + 1e-9)
    return h_min, h_max


def mse_bandwidth(
    sample: RdSample,
    spec: FitSpec,
    target=None,
    mode: Optional[str] = None,
) -> BandwidthSelection:
    """MSE-optimal bandwidth(s) for a selector target.

    Parameters
    ----------
    sample : RdSample
    spec : FitSpec
        Supplies p, s, nu, kernel, and the variance kind.
    target : tuple (lead, w), optional
        The linear functional whose MSE drives the choice: lead weights the
        main block, w the covariate blocks. Defaults to (1, all-ones), the
        natural evaluation point when covariates are orthogonal indicators.
    mode : {"one_sided", "two_sided"}, optional
        Defaults to the mode in spec.bandwidth when that is Select, else
        "two_sided".

    Returns
    -------
    BandwidthSelection

    Raises
    ------
    TooFewObservations, SingularGram, BiasDegenerate
    """
    p, s, nu, kernel = spec.p, spec.s, spec.nu, spec.kernel
    d = sample.d
    if mode is None:
        mode = (
            spec.bandwidth.mode
            if isinstance(spec.bandwidth, Select)
            else "two_sided"
        )
    if target is None:
        target = (1.0, np.ones(d))
    lead, w_t = float(target[0]), np.atleast_1d(np.asarray(target[1], float))
    extractor = extractor_vector(nu, p, s, w_t, lead=lead)

    n = sample.n
    q = min(p, s)
    sides = ("left", "right")
    pilots, pfits, bconsts, vconsts = {}, {}, {}, {}
    for side in sides:
        b = pilot_bandwidth(sample, side, p, s)
        pilots[side] = b
        pfits[side] = fit_side(sample, side, b, p + 1, s + 1, kernel)
        bconsts[side] = bias_constants(
            sample, side, p, s, nu, kernel, b, pilot_fit=pfits[side]
        )
        vconsts[side] = variance_constants(
            sample, side, b, p, s, nu, kernel, spec.vce
        )

    v_val = {sd: vconsts[sd].contraction(extractor) for sd in sides}
    b_val = {sd: bconsts[sd].contraction(extractor) for sd in sides}

    factor = (1 + 2 * nu) / (2.0 * (1 + q - nu) * n)
    expo = 1.0 / (3 + 2 * q)
    k_dim = n_params(p, s, d)
    bounds = {sd: _h_bounds(sample, sd, k_dim) for sd in sides}

    def _solve(v_sum: float, b_sq: float, h_ref: float) -> tuple[float, bool]:
        if v_sum == 0.0:
            return 0.0, True
        reg = BIAS_REG_EPS * v_sum / (n * h_ref) if h_ref > 0 else 0.0
        denom = b_sq + reg
        degenerate = b_sq < reg
        if denom <= 0.0:
            raise BiasDegenerate(
                "bias denominator non-positive after regularization"
            )
        raw = (factor * v_sum / denom) ** expo
        if not np.isfinite(raw):
            raise BiasDegenerate(
                "bandwidth non-finite after regularization"
            )
        return raw, degenerate

    if mode == "one_sided":
        h_out, degen = {}, False
        for side in sides:
            raw, dg = _solve(v_val[side], b_val[side] ** 2, pilots[side])
            degen = degen or dg
            lo, hi = bounds[side]
            h_out[side] = float(np.clip(raw, lo, hi))
        h_left, h_right = h_out["left"], h_out["right"]
    else:
        v_sum = v_val["left"] + v_val["right"]
        b_diff = b_val["right"] - b_val["left"]
        h_ref = float(np.sqrt(pilots["left"] * pilots["right"]))
        raw, degen = _solve(v_sum, b_diff**2, h_ref)
        lo = max(bounds["left"][0], bounds["right"][0])
        hi = max(bounds["left"][1], bounds["right"][1])
        h_common = float(np.clip(raw, lo, hi))
        h_left = h_right = h_common

    return BandwidthSelection(
        mode=mode,
        h_left=h_left,
        h_right=h_right,
        pilot_left=pilots["left"],
        pilot_right=pilots["right"],
        v_left=v_val["left"],
        v_right=v_val["right"],
        b_left=b_val["left"],
        b_right=b_val["right"],
        bias_degenerate=degen,
        pilot_fit_left=pfits["left"],
        pilot_fit_right=pfits["right"],
        bias_const_left=bconsts["left"],
        bias_const_right=bconsts["right"],
    )
