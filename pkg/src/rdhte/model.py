"""Domain types, input validation, and heterogeneity-design expansion.

RdSample is the validated in-memory representation of an RD dataset.
CovariateSpec describes how raw columns become the heterogeneity matrix W:
categorical columns expand into one indicator per non-baseline level,
continuous columns into powers, quantile_bins columns into indicators for
empirical-quantile bins with the lowest bin as the dropped baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateQuantiles,
    DimensionMismatch,
    EmptySample,
    LengthMismatch,
    NonFinite,
    NonPositiveBandwidth,
    NuOutOfRange,
    UnknownLevel,
)
from .kernels import resolve_kernel

__all__ = [
    "RdSample",
    "ColumnSpec",
    "CovariateSpec",
    "FitSpec",
    "Fixed",
    "Common",
    "Select",
    "validate_sample",
    "expand_covariates",
]


@dataclass(frozen=True)
class RdSample:
    """A sharp RD dataset: outcome, running variable, cutoff, covariates.

    Attributes
    ----------
    y : ndarray, shape (n,)
        Outcome.
    x : ndarray, shape (n,)
        Running variable; treatment is 1(x >= cutoff).
    cutoff : float
        Threshold c.
    w : ndarray, shape (n, d)
        Heterogeneity covariates (d may be 0).
    cluster : ndarray of int, shape (n,), optional
        Cluster labels for cluster-robust variance.
    """

    y: np.ndarray
    x: np.ndarray
    cutoff: float
    w: np.ndarray
    cluster: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]

    def side_mask(self, side: str) -> np.ndarray:
        """Boolean mask for one side: right is x >= cutoff, left is x < cutoff."""
        if side == "right":
            return self.x >= self.cutoff
        if side == "left":
            return self.x < self.cutoff
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        if arr.ndim == 1:
            row = int(np.argmax(bad))
            raise NonFinite(row, name)
        rows, cols = np.nonzero(bad)
        raise NonFinite(int(rows[0]), f"{name}[{int(cols[0])}]")


def validate_sample(
    y,
    x,
    cutoff: float,
    w=None,
    cluster=None,
) -> RdSample:
    """Build a validated RdSample from array-likes.

    Parameters
    ----------
    y, x : array-like, shape (n,)
        Outcome and running variable.
    cutoff : float
        Threshold; must be finite.
    w : array-like, shape (n, d), optional
        Heterogeneity covariates; omitted or empty means d = 0.
    cluster : array-like, shape (n,), optional
        Integer-codeable cluster labels.

    Returns
    -------
    RdSample

    Raises
    ------
    EmptySample, LengthMismatch, NonFinite
    """
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    x = np.ascontiguousarray(np.asarray(x, dtype=float))
    if y.ndim != 1 or x.ndim != 1:
        raise LengthMismatch("y and x must be one-dimensional")
    n = y.shape[0]
    if n == 0:
        raise EmptySample("sample has no observations")
    if x.shape[0] != n:
        raise LengthMismatch(f"y has length {n}, x has length {x.shape[0]}")
    if w is None:
        w_arr = np.empty((n, 0))
    else:
        w_arr = np.asarray(w, dtype=float)
        if w_arr.ndim == 1:
            w_arr = w_arr[:, None]
        if w_arr.shape[0] != n:
            raise LengthMismatch(
                f"y has length {n}, w has {w_arr.shape[0]} rows"
            )
    cl = None
    if cluster is not None:
        cl_raw = np.asarray(cluster)
        if cl_raw.shape[0] != n:
            raise LengthMismatch(
                f"y has length {n}, cluster has length {cl_raw.shape[0]}"
            )
        # relabel to dense integer codes; preserves grouping only
        _, cl = np.unique(cl_raw, return_inverse=True)
    if not np.isfinite(cutoff):
        raise NonFinite(-1, "cutoff")
    _check_finite("y", y)
    _check_finite("x", x)
    _check_finite("w", w_arr)
    return RdSample(y=y, x=x, cutoff=float(cutoff), w=w_arr, cluster=cl)


# -- covariate expansion -------------------------------------------------------

@dataclass(frozen=True)
class ColumnSpec:
    """Expansion rule for one raw covariate column.

    kind:
        "continuous"    -> columns value, value^2, ..., value^power_max
        "binary"        -> single 0/1 column, passed through
        "categorical"   -> one indicator per non-baseline level
        "quantile_bins" -> indicators for empirical-quantile bins, lowest
                           bin dropped as baseline
    """

    name: str
    kind: str
    power_max: int = 1
    baseline: Optional[str] = None
    bins: int = 0

    def __post_init__(self):
        kinds = ("continuous", "binary", "categorical", "quantile_bins")
        if self.kind not in kinds:
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.kind == "continuous" and self.power_max < 1:
            raise ValueError("continuous power_max must be >= 1")
        if self.kind == "quantile_bins" and self.bins < 2:
            raise ValueError("quantile_bins requires bins >= 2")


@dataclass(frozen=True)
class CovariateSpec:
    """Ordered expansion rules for the heterogeneity covariates."""

    columns: tuple[ColumnSpec, ...]


def _expand_categorical(name: str, values, baseline: Optional[str]):
    labels = np.asarray([str(v) for v in values])
    levels = sorted(set(labels.tolist()))
    base = levels[0] if baseline is None else str(baseline)
    if base not in levels:
        raise UnknownLevel(
            f"baseline level {base!r} not observed in column {name!r}"
        )
    cols, names = [], []
    for lev in levels:
        if lev == base:
            continue
        cols.append((labels == lev).astype(float))
        names.append(f"{name}={lev}")
    return cols, names


def _expand_quantile_bins(name: str, values, k: int):
    vals = np.asarray(values, dtype=float)
    if np.unique(vals).size < k:
        raise DegenerateQuantiles(
            f"column {name!r}: need >= {k} distinct values for {k} bins"
        )
    probs = np.arange(1, k) / k
    cuts = np.quantile(vals, probs, method="linear")
    if np.unique(cuts).size < k - 1:
        raise DegenerateQuantiles(
            f"column {name!r}: fewer distinct cut points than bins"
        )
    # left-closed bins: bin j iff cuts[j-1] <= v < cuts[j]; bin 0 (baseline)
    # is v < cuts[0]
    assignment = np.searchsorted(cuts, vals, side="right")
    cols, names = [], []
    for j in range(1, k):
        cols.append((assignment == j).astype(float))
        names.append(f"{name}:q{j + 1}")
    return cols, names


def expand_covariates(raw: dict, spec: CovariateSpec):
    """Expand raw columns into the heterogeneity design W.

    Parameters
    ----------
    raw : dict
        Maps column name to a sequence of raw values (numeric for
        continuous/binary/quantile_bins, anything string-codeable for
        categorical).
    spec : CovariateSpec
        Per-column expansion rules; output columns follow spec order.

    Returns
    -------
    (w, labels, kinds) : (ndarray (n, d_expanded), list of str, list of str)
        The design matrix, one label per expanded column, and the source
        kind of each expanded column ("indicator" for categorical/
        quantile_bins/binary columns, "continuous" for power columns).

    Raises
    ------
    UnknownLevel, DegenerateQuantiles, LengthMismatch, NonFinite
    """
    cols: list[np.ndarray] = []
    labels: list[str] = []
    kinds: list[str] = []
    n_ref = None
    for cs in spec.columns:
        if cs.name not in raw:
            raise LengthMismatch(f"column {cs.name!r} missing from raw table")
        values = raw[cs.name]
        n_here = len(values)
        if n_ref is None:
            n_ref = n_here
        elif n_here != n_ref:
            raise LengthMismatch(
                f"column {cs.name!r} has {n_here} rows, expected {n_ref}"
            )
        if cs.kind == "categorical":
            new_cols, new_names = _expand_categorical(
                cs.name, values, cs.baseline
            )
            cols.extend(new_cols)
            labels.extend(new_names)
            kinds.extend(["indicator"] * len(new_cols))
        elif cs.kind == "quantile_bins":
            new_cols, new_names = _expand_quantile_bins(
                cs.name, values, cs.bins
            )
            cols.extend(new_cols)
            labels.extend(new_names)
            kinds.extend(["indicator"] * len(new_cols))
        elif cs.kind == "binary":
            vals = np.asarray(values, dtype=float)
            _check_finite(cs.name, vals)
            observed = set(np.unique(vals).tolist())
            if not observed <= {0.0, 1.0}:
                raise UnknownLevel(
                    f"binary column {cs.name!r} has values outside {{0, 1}}"
                )
            cols.append(vals)
            labels.append(cs.name)
            kinds.append("indicator")
        else:
            vals = np.asarray(values, dtype=float)
            _check_finite(cs.name, vals)
            for power in range(1, cs.power_max + 1):
                cols.append(vals**power)
                labels.append(
                    cs.name if power == 1 else f"{cs.name}^{power}"
                )
                kinds.append("continuous")
    if not cols:
        return np.empty((n_ref or 0, 0)), labels, kinds
    w = np.column_stack(cols)
    _check_finite("w", w)
    return w, labels, kinds


# -- fit specification ---------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    """Per-side fixed bandwidths."""

    h_left: float
    h_right: float


@dataclass(frozen=True)
class Common:
    """One bandwidth shared by both sides."""

    h: float


@dataclass(frozen=True)
class Select:
    """Data-driven MSE-optimal selection: one bandwidth per side or a
    single two-sided bandwidth."""

    mode: str = "two_sided"

    def __post_init__(self):
        if self.mode not in ("one_sided", "two_sided"):
            raise ValueError(f"unknown selection mode {self.mode!r}")


@dataclass(frozen=True)
class FitSpec:
    """Estimation settings for an interacted local polynomial RD fit.

    Attributes
    ----------
    p : int
        Main polynomial order (>= 0).
    s : int
        Interaction polynomial order (>= 0).
    nu : int
        Derivative order of the target, 0 <= nu <= min(p, s); 0 for level
        effects, 1 for kink designs.
    kernel : str
        "triangular" (default), "uniform", or "epanechnikov".
    bandwidth : Fixed | Common | Select
    vce : str
        "hc0" | "hc1" | "hc2" | "hc3" | "cluster".
    level : float
        Confidence level in (0, 1).
    """

    p: int = 1
    s: int = 1
    nu: int = 0
    kernel: str = "triangular"
    bandwidth: Fixed | Common | Select = field(default_factory=Select)
    vce: str = "hc3"
    level: float = 0.95

    def __post_init__(self):
        if self.p < 0 or self.s < 0:
            raise ValueError("polynomial orders must be >= 0")
        if not 0 <= self.nu <= min(self.p, self.s):
            raise NuOutOfRange(
                f"nu={self.nu} outside [0, min(p,s)={min(self.p, self.s)}]"
            )
        object.__setattr__(self, "kernel", resolve_kernel(self.kernel))
        if self.vce not in ("hc0", "hc1", "hc2", "hc3", "cluster"):
            raise ValueError(f"unknown vce {self.vce!r}")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        if isinstance(self.bandwidth, Fixed):
            if self.bandwidth.h_left <= 0 or self.bandwidth.h_right <= 0:
                raise NonPositiveBandwidth("fixed bandwidths must be > 0")
        elif isinstance(self.bandwidth, Common):
            if self.bandwidth.h <= 0:
                raise NonPositiveBandwidth("common bandwidth must be > 0")

    def resolved_bandwidths(self) -> tuple[float, float]:
        """Return (h_left, h_right) for fixed-bandwidth specs."""
        if isinstance(self.bandwidth, Fixed):
            return self.bandwidth.h_left, self.bandwidth.h_right
        if isinstance(self.bandwidth, Common):
            return self.bandwidth.h, self.bandwidth.h
        from .errors import BandwidthUnresolved

        raise BandwidthUnresolved(
            "bandwidth mode is Select; run bandwidth selection first"
        )
