"""Treatment-effect estimands built from paired side fits.

The two one-sided fits are mapped to the long-form coefficient vector
(baseline jump, per-covariate coefficient jumps) through an explicit
mapping matrix; every reported estimand is a linear functional of that
vector, carrying a plug-in standard error and a robust bias-corrected
point estimate, interval, and p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bandwidth import (
    BandwidthSelection,
    BiasConstants,
    mse_bandwidth,
    pilot_bandwidth,
)
from .basis import extractor_vector
from .errors import DimensionMismatch
from .fitting import SideFit, fit_side
from .inference import ci_pvalue, coef_variance, rbc_variance
from .model import FitSpec, RdSample, Select

__all__ = [
    "Selector",
    "EstimandRecord",
    "HteResult",
    "extractor",
    "long_map_matrix",
    "fit_hte",
    "cate_at",
    "contrast",
]


def extractor(nu: int, w, p: int, s: int) -> np.ndarray:
    """Short-form extractor vector for the order-nu effect at covariate w.

    Entries are nu! at position nu of the main block and nu!*w_l at
    position nu of covariate block l; contracting it against the
    difference of the side coefficient vectors yields the CATE (nu = 0)
    or its derivative jump (nu >= 1) at w.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    return extractor_vector(nu, p, s, w, lead=1.0)


def long_map_matrix(p: int, s: int, d: int, nu: int) -> np.ndarray:
    """Matrix sending stacked side coefficients to the long-form vector.

    Rows select nu! times the order-nu entry of each block, right side
    minus left: row 0 is the baseline jump, row 1+l the jump in covariate
    l's coefficient.
    """
    k = 1 + p + d * (1 + s)
    fac = float(math.factorial(nu))
    m = np.zeros((1 + d, 2 * k))
    m[0, nu] = -fac
    m[0, k + nu] = fac
    for ell in range(d):
        pos = 1 + p + ell * (1 + s) + nu
        m[1 + ell, pos] = -fac
        m[1 + ell, k + pos] = fac
    return m


@dataclass(frozen=True)
class Selector:
    """Linear functional of the long-form vector (theta, xi')'.

    vector has length 1+d: the first entry weights the baseline jump, the
    rest weight the covariate-coefficient jumps. nu picks the derivative
    order; None defers to the fitted specification.
    """

    vector: np.ndarray
    nu: Optional[int] = None
    label: str = "contrast"

    def __post_init__(self):
        vec = np.atleast_1d(np.asarray(self.vector, dtype=float))
        object.__setattr__(self, "vector", vec)
        if not self.label:
            raise ValueError("selector label must be nonempty")


@dataclass(frozen=True)
class EstimandRecord:
    """One reported estimand with plug-in and bias-corrected inference."""

    label: str
    lead: float
    w: tuple
    nu: int
    point: float
    se: float
    variance: float
    bias_estimate: float
    rbc_point: float
    rbc_se: float
    rbc_variance: float
    ci_low: float
    ci_high: float
    z: float
    p_value: float
    level: float
    zero_se: bool
    extrapolated: bool
    eff_n: int
    h_left: float
    h_right: float


@dataclass(frozen=True)
class HteResult:
    """Paired side fits with the derived heterogeneity estimands.

    varsigma stacks the baseline jump and the covariate-coefficient jumps
    at the requested derivative order; records hold the default report set
    plus any requested evaluation points.
    """

    sample: RdSample
    spec: FitSpec
    left: SideFit
    right: SideFit
    pilot_left: SideFit
    pilot_right: SideFit
    bias_left: BiasConstants
    bias_right: BiasConstants
    selection: Optional[BandwidthSelection]
    varsigma: np.ndarray
    records: tuple[EstimandRecord, ...] = field(default_factory=tuple)
    labels: tuple[str, ...] = ()
    kinds: tuple[str, ...] = ()

    @property
    def h_left(self) -> float:
        return self.left.h

    @property
    def h_right(self) -> float:
        return self.right.h

    @property
    def eff_n(self) -> int:
        return self.left.eff_n + self.right.eff_n

    def record(self, label: str) -> EstimandRecord:
        """Look up a record by its label."""
        for rec in self.records:
            if rec.label == label:
                return rec
        raise KeyError(label)


def _infer_kinds(w: np.ndarray) -> tuple[str, ...]:
    kinds = []
    for ell in range(w.shape[1]):
        vals = np.unique(w[:, ell])
        kinds.append(
            "indicator" if np.all(np.isin(vals, (0.0, 1.0))) else "continuous"
        )
    return tuple(kinds)


def _make_record(
    sample: RdSample,
    spec: FitSpec,
    left: SideFit,
    right: SideFit,
    pilot_left: SideFit,
    pilot_right: SideFit,
    bias_left: BiasConstants,
    bias_right: BiasConstants,
    label: str,
    lead: float,
    w: np.ndarray,
    nu: int,
    extrapolated: bool,
) -> EstimandRecord:
    p, s = spec.p, spec.s
    evec = extractor_vector(nu, p, s, w, lead=lead)
    point = float(evec @ (right.theta - left.theta))
    var_est = coef_variance(
        left, right, evec, nu, spec.vce, sample.cluster
    )
    power = 1 + min(p, s) - nu
    bias_term = right.h**power * bias_right.contraction(
        evec
    ) - left.h**power * bias_left.contraction(evec)
    rbc = point - bias_term
    rbc_var = rbc_variance(
        sample,
        left,
        right,
        pilot_left,
        pilot_right,
        bias_left,
        bias_right,
        evec,
        nu,
        spec.vce,
        sample.cluster,
    )
    rbc_se = float(np.sqrt(max(rbc_var, 0.0)))
    lo, hi, z, p_val, zero = ci_pvalue(rbc, rbc_se, spec.level)
    return EstimandRecord(
        label=label,
        lead=float(lead),
        w=tuple(float(v) for v in np.atleast_1d(w)),
        nu=nu,
        point=point,
        se=var_est.se,
        variance=var_est.variance,
        bias_estimate=bias_term,
        rbc_point=rbc,
        rbc_se=rbc_se,
        rbc_variance=rbc_var,
        ci_low=lo,
        ci_high=hi,
        z=z,
        p_value=p_val,
        level=spec.level,
        zero_se=zero,
        extrapolated=extrapolated,
        eff_n=left.eff_n + right.eff_n,
        h_left=left.h,
        h_right=right.h,
    )


def _default_plan(d, nu, labels, kinds):
    """Default report set: (label, lead, w) triples."""
    if d == 0:
        name = "RD effect" if nu == 0 else f"RD derivative (order {nu})"
        return [(name, 1.0, np.zeros(0))]
    plan = [("Baseline (w=0)", 1.0, np.zeros(d))]
    for ell in range(d):
        unit = np.zeros(d)
        unit[ell] = 1.0
        if kinds[ell] == "indicator":
            plan.append((f"CATE: {labels[ell]}", 1.0, unit))
            plan.append((f"Diff: {labels[ell]}", 0.0, unit))
        else:
            plan.append((f"Slope: {labels[ell]}", 0.0, unit))
    return plan


def _is_extrapolated(sample: RdSample, w: np.ndarray) -> bool:
    if sample.d == 0 or sample.w.shape[0] == 0:
        return False
    lo = sample.w.min(axis=0)
    hi = sample.w.max(axis=0)
    return bool(np.any(w < lo) or np.any(w > hi))


def fit_hte(
    sample: RdSample,
    spec: FitSpec,
    at: Optional[Sequence] = None,
    labels: Optional[Sequence[str]] = None,
    kinds: Optional[Sequence[str]] = None,
) -> HteResult:
    """Estimate heterogeneous RD effects on both sides of the cutoff.

    Resolves bandwidths (running MSE-optimal selection when the
    specification asks for it), fits the interacted local polynomial on
    each side, and builds the default estimand report plus any requested
    covariate evaluation points.

    Parameters
    ----------
    sample : RdSample
    spec : FitSpec
        Orders, kernel, bandwidth rule, variance kind, and level.
    at : sequence of covariate vectors, optional
        Extra CATE evaluation points; each must have length d. Points
        outside the observed covariate range are flagged, not rejected.
    labels : sequence of str, optional
        Display names of the covariate columns; defaults to w1..wd.
    kinds : sequence of str, optional
        "indicator" or "continuous" per column, controlling the default
        report set; inferred from the data when omitted.

    Returns
    -------
    HteResult

    Raises
    ------
    TooFewObservations, SingularGram, BiasDegenerate, DimensionMismatch
    """
    p, s, nu, kernel = spec.p, spec.s, spec.nu, spec.kernel
    d = sample.d
    if labels is None:
        labels = tuple(f"w{ell + 1}" for ell in range(d))
    else:
        labels = tuple(labels)
    if len(labels) != d:
        raise DimensionMismatch(f"expected {d} labels, got {len(labels)}")
    if kinds is None:
        kinds = _infer_kinds(sample.w)
    else:
        kinds = tuple(kinds)
    if len(kinds) != d:
        raise DimensionMismatch(f"expected {d} kinds, got {len(kinds)}")

    selection: Optional[BandwidthSelection] = None
    if isinstance(spec.bandwidth, Select):
        selection = mse_bandwidth(sample, spec)
        h_left, h_right = selection.h_left, selection.h_right
        pilot_left = selection.pilot_fit_left
        pilot_right = selection.pilot_fit_right
        bias_left = selection.bias_const_left
        bias_right = selection.bias_const_right
    else:
        h_left, h_right = spec.resolved_bandwidths()
        pilot_left = fit_side(
            sample, "left", pilot_bandwidth(sample, "left", p, s),
            p + 1, s + 1, kernel,
        )
        pilot_right = fit_side(
            sample, "right", pilot_bandwidth(sample, "right", p, s),
            p + 1, s + 1, kernel,
        )
        from .bandwidth import bias_constants

        bias_left = bias_constants(
            sample, "left", p, s, nu, kernel, pilot_left.h,
            pilot_fit=pilot_left,
        )
        bias_right = bias_constants(
            sample, "right", p, s, nu, kernel, pilot_right.h,
            pilot_fit=pilot_right,
        )

    left = fit_side(sample, "left", h_left, p, s, kernel)
    right = fit_side(sample, "right", h_right, p, s, kernel)

    stacked = np.concatenate([left.theta, right.theta])
    varsigma = long_map_matrix(p, s, d, nu) @ stacked

    plan = [
        (label, lead, w, False)
        for label, lead, w in _default_plan(d, nu, labels, kinds)
    ]
    for w_pt in at or ():
        w_arr = np.atleast_1d(np.asarray(w_pt, dtype=float))
        if w_arr.shape != (d,):
            raise DimensionMismatch(
                f"evaluation point has {w_arr.size} entries, expected {d}"
            )
        pretty = ", ".join(f"{v:g}" for v in w_arr)
        plan.append(
            (f"CATE at w=({pretty})", 1.0, w_arr,
             _is_extrapolated(sample, w_arr))
        )

    records = tuple(
        _make_record(
            sample, spec, left, right, pilot_left, pilot_right,
            bias_left, bias_right, label, lead, w, nu, extrap,
        )
        for label, lead, w, extrap in plan
    )
    return HteResult(
        sample=sample,
        spec=spec,
        left=left,
        right=right,
        pilot_left=pilot_left,
        pilot_right=pilot_right,
        bias_left=bias_left,
        bias_right=bias_right,
        selection=selection,
        varsigma=varsigma,
        records=records,
        labels=labels,
        kinds=kinds,
    )


def cate_at(result: HteResult, w) -> EstimandRecord:
    """CATE record at a covariate point, with full inference.

    The point estimate is the baseline jump plus the coefficient jumps
    contracted with w; variance, bias correction, and interval come from
    the stored fits. Points outside the observed covariate range are
    flagged as extrapolated.
    """
    d = result.sample.d
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    if w_arr.shape != (d,):
        raise DimensionMismatch(
            f"evaluation point has {w_arr.size} entries, expected {d}"
        )
    pretty = ", ".join(f"{v:g}" for v in w_arr)
    return _make_record(
        result.sample,
        result.spec,
        result.left,
        result.right,
        result.pilot_left,
        result.pilot_right,
        result.bias_left,
        result.bias_right,
        f"CATE at w=({pretty})",
        1.0,
        w_arr,
        result.spec.nu,
        _is_extrapolated(result.sample, w_arr),
    )


def contrast(result: HteResult, selector: Selector) -> EstimandRecord:
    """Estimand record for an arbitrary long-form selector.

    The selector's first entry weights the baseline jump and the rest
    weight the covariate-coefficient jumps; a selector of zeros yields a
    zero point estimate with zero variance.
    """
    d = result.sample.d
    vec = selector.vector
    if vec.shape != (1 + d,):
        raise DimensionMismatch(
            f"selector has {vec.size} entries, expected {1 + d}"
        )
    nu = result.spec.nu if selector.nu is None else int(selector.nu)
    return _make_record(
        result.sample,
        result.spec,
        result.left,
        result.right,
        result.pilot_left,
        result.pilot_right,
        result.bias_left,
        result.bias_right,
        selector.label,
        float(vec[0]),
        vec[1:].copy(),
        nu,
        False,
    )
