"""Heterogeneous treatment effects in sharp regression discontinuity
designs.

Interacted local polynomial estimation of conditional effects at a
cutoff, with MSE-optimal bandwidth selection, heteroskedasticity- and
cluster-robust sandwich variances, and robust bias-corrected confidence
intervals. Supports level (sharp) and derivative (kink) estimands.

Typical use::

    from rdhte import FitSpec, fit_hte, validate_sample

    sample = validate_sample(y, x, cutoff, w)
    result = fit_hte(sample, FitSpec())
    for rec in result.records:
        print(rec.label, rec.point, (rec.ci_low, rec.ci_high))
"""

from .bandwidth import (
    BandwidthSelection,
    BiasConstants,
    VarianceConstants,
    bias_constants,
    mse_bandwidth,
    moment_vectors,
    pilot_bandwidth,
    variance_constants,
)
from .basis import (
    design_rows,
    extractor_vector,
    interacted_basis,
    n_params,
    poly_basis,
    scaling_matrix,
)
from .errors import (
    AllReplicationsFailed,
    BandwidthUnresolved,
    BiasDegenerate,
    DegenerateQuantiles,
    DimensionMismatch,
    EmptySample,
    EstimationError,
    InputError,
    LengthMismatch,
    LeverageOne,
    MissingColumn,
    NonFinite,
    NonPositiveBandwidth,
    NuOutOfRange,
    ParseError,
    RankDeficient,
    RdhteError,
    SingularGram,
    TooFewClusters,
    TooFewObservations,
    UnknownLevel,
)
from .estimands import (
    EstimandRecord,
    HteResult,
    Selector,
    cate_at,
    contrast,
    extractor,
    fit_hte,
    long_map_matrix,
)
from .fitting import SideFit, fit_side, long_short_equivalence_check
from .inference import (
    VarianceEstimate,
    ci_pvalue,
    cluster_meat,
    coef_variance,
    hc_weights,
    meat_matrix,
    rbc_point,
    rbc_variance,
)
from .kernels import KERNELS, kernel_eval, resolve_kernel
from .model import (
    ColumnSpec,
    Common,
    CovariateSpec,
    Fixed,
    FitSpec,
    RdSample,
    Select,
    expand_covariates,
    validate_sample,
)
from .render import render_csv, render_json, render_table, result_payload
from .simulate import (
    DgpConfig,
    McReport,
    TargetReport,
    canonical_preset,
    gen_sample,
    inflated_curvature_preset,
    monte_carlo,
    oracle_wls,
    true_cate,
)

__version__ = "0.1.0"

__all__ = [
    "AllReplicationsFailed",
    "BandwidthSelection",
    "BandwidthUnresolved",
    "BiasConstants",
    "BiasDegenerate",
    "ColumnSpec",
    "Common",
    "CovariateSpec",
    "DegenerateQuantiles",
    "DgpConfig",
    "DimensionMismatch",
    "EmptySample",
    "EstimandRecord",
    "EstimationError",
    "Fixed",
    "FitSpec",
    "HteResult",
    "InputError",
    "KERNELS",
    "LengthMismatch",
    "LeverageOne",
    "McReport",
    "MissingColumn",
    "NonFinite",
    "NonPositiveBandwidth",
    "NuOutOfRange",
    "ParseError",
    "RankDeficient",
    "RdSample",
    "RdhteError",
    "Select",
    "Selector",
    "SideFit",
    "SingularGram",
    "TargetReport",
    "TooFewClusters",
    "TooFewObservations",
    "UnknownLevel",
    "VarianceConstants",
    "VarianceEstimate",
    "bias_constants",
    "canonical_preset",
    "cate_at",
    "ci_pvalue",
    "cluster_meat",
    "coef_variance",
    "contrast",
    "design_rows",
    "expand_covariates",
    "extractor",
    "extractor_vector",
    "fit_hte",
    "fit_side",
    "gen_sample",
    "hc_weights",
    "inflated_curvature_preset",
    "interacted_basis",
    "kernel_eval",
    "long_map_matrix",
    "long_short_equivalence_check",
    "meat_matrix",
    "monte_carlo",
    "moment_vectors",
    "mse_bandwidth",
    "n_params",
    "oracle_wls",
    "pilot_bandwidth",
    "poly_basis",
    "rbc_point",
    "rbc_variance",
    "render_csv",
    "render_json",
    "render_table",
    "resolve_kernel",
    "result_payload",
    "scaling_matrix",
    "true_cate",
    "validate_sample",
    "variance_constants",
    "__version__",
]
