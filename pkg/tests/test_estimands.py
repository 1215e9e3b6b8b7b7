from __future__ import annotations

import numpy as np
import pytest
from conftest import random_instance

from rdhte.basis import design_rows, scaling_diag
from rdhte.errors import DimensionMismatch, NuOutOfRange
from rdhte.estimands import (
    Selector,
    cate_at,
    contrast,
    extractor,
    fit_hte,
    long_map_matrix,
)
from rdhte.fitting import fit_side
from rdhte.model import Common, FitSpec, validate_sample
from rdhte.simulate import oracle_wls


# ---------------------------------------------------------------------------
# extractor and the long-form map


def test_extractor_binary_cate():
    assert np.array_equal(extractor(0, [1.0], 1, 1), [1, 0, 1, 0])


def test_extractor_baseline_two_covariates():
    assert np.array_equal(extractor(0, [0.0, 0.0], 1, 1), [1, 0, 0, 0, 0, 0])


def test_extractor_slope_target():
    w0 = 0.37
    assert np.array_equal(extractor(1, [w0], 1, 1), [0, 1, 0, w0])


def test_extractor_rejects_out_of_range_order():
    with pytest.raises(NuOutOfRange):
        extractor(2, [1.0], 1, 1)
    with pytest.raises(NuOutOfRange):
        extractor(-1, [1.0], 1, 1)


def test_long_map_reproduces_varsigma():
    sample = random_instance(30)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    stacked = np.concatenate([result.left.theta, result.right.theta])
    m = long_map_matrix(1, 1, sample.d, 0)
    assert result.varsigma == pytest.approx(m @ stacked, rel=1e-14)


def test_varsigma_contracts_match_extractor_differences():
    sample = random_instance(31, d=2, binary=False)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.7)))
    delta = result.right.theta - result.left.theta
    rng = np.random.default_rng(32)
    for _ in range(5):
        w = rng.uniform(-1, 1, 2)
        lhs = float(np.concatenate([[1.0], w]) @ result.varsigma)
        rhs = float(extractor(0, w, 1, 1) @ delta)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# fit_hte


def test_no_covariates_reduces_to_classical_rd():
    for seed in range(3):
        sample = random_instance(seed, d=0)
        result = fit_hte(sample, FitSpec(bandwidth=Common(0.65)))
        assert result.labels == ()
        assert len(result.records) == 1
        rec = result.records[0]
        assert rec.label == "RD effect"
        jump = result.right.theta[0] - result.left.theta[0]
        assert rec.point == pytest.approx(jump, rel=1e-14)
        # independent solver route for the same classical estimand
        expect = 0.0
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            fit = fit_side(sample, side, 0.65, 1, 1, "triangular")
            beta = oracle_wls(fit.design, fit.kvals, sample.y[fit.idx])
            expect += sgn * beta[0]
        assert rec.point == pytest.approx(expect, rel=1e-9)


def test_derivative_order_record_label_and_point():
    sample = random_instance(33, d=0)
    result = fit_hte(sample, FitSpec(nu=1, bandwidth=Common(0.7)))
    rec = result.record("RD derivative (order 1)")
    slope_jump = result.right.theta[1] - result.left.theta[1]
    assert rec.point == pytest.approx(slope_jump, rel=1e-12)


def test_noiseless_groupwise_linear_recovers_exact_jumps():
    rng = np.random.default_rng(34)
    n = 300
    x = rng.uniform(-1, 1, n)
    g = rng.binomial(1, 0.5, n).astype(float)
    t = (x >= 0).astype(float)
    y = np.where(
        g == 0,
        0.2 + 0.5 * x + t * (0.9 - 0.3 * x),
        -0.1 + 0.8 * x + t * (0.4 + 0.6 * x),
    )
    sample = validate_sample(y, x, 0.0, g[:, None])
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.8)), labels=["grp"])
    assert result.record("Baseline (w=0)").point == pytest.approx(0.9, abs=1e-10)
    assert result.record("CATE: grp").point == pytest.approx(0.4, abs=1e-10)
    assert result.record("Diff: grp").point == pytest.approx(-0.5, abs=1e-10)


def test_fit_hte_matches_long_regression_oracle():
    sample = random_instance(35, n=200, d=2)
    h = 0.7
    result = fit_hte(sample, FitSpec(bandwidth=Common(h)))
    left, right = result.left, result.right
    idx = np.concatenate([left.idx, right.idx])
    u = np.concatenate([left.u, right.u])
    kv = np.concatenate([left.kvals, right.kvals])
    t = np.concatenate([np.zeros(left.idx.size), np.ones(right.idx.size)])
    base = design_rows(u, sample.w[idx], 1, 1)
    long_design = np.hstack([base, base * t[:, None]])
    beta = oracle_wls(long_design, kv, sample.y[idx])
    delta = beta[base.shape[1] :] / scaling_diag(h, 1, 1, sample.d)
    for w in (np.zeros(2), np.array([1.0, 0.0]), np.array([1.0, 1.0])):
        expect = float(extractor(0, w, 1, 1) @ delta)
        assert cate_at(result, w).point == pytest.approx(expect, rel=1e-9)


def test_subgroup_dummies_equal_per_group_classical_fits():
    rng = np.random.default_rng(36)
    n = 400
    x = rng.uniform(-1, 1, n)
    g = rng.integers(0, 3, n)
    w = np.column_stack([(g == 1).astype(float), (g == 2).astype(float)])
    t = (x >= 0).astype(float)
    jumps = (0.9, 0.4, -0.5)
    y = 0.3 * x + t * np.choose(g, jumps) + 0.2 * rng.standard_normal(n)
    sample = validate_sample(y, x, 0.0, w)
    h = 0.75
    result = fit_hte(sample, FitSpec(bandwidth=Common(h)), labels=["g1", "g2"])

    def group_jump(mask):
        sub = validate_sample(y[mask], x[mask], 0.0)
        l = fit_side(sub, "left", h, 1, 1, "triangular")
        r = fit_side(sub, "right", h, 1, 1, "triangular")
        return r.theta[0] - l.theta[0]

    assert result.record("Baseline (w=0)").point == pytest.approx(
        group_jump(g == 0), abs=1e-10
    )
    assert result.record("CATE: g1").point == pytest.approx(
        group_jump(g == 1), abs=1e-10
    )
    assert result.record("CATE: g2").point == pytest.approx(
        group_jump(g == 2), abs=1e-10
    )


def test_label_and_kind_length_validation():
    sample = random_instance(37)
    spec = FitSpec(bandwidth=Common(0.6))
    with pytest.raises(DimensionMismatch):
        fit_hte(sample, spec, labels=["a", "b"])
    with pytest.raises(DimensionMismatch):
        fit_hte(sample, spec, kinds=["indicator", "indicator"])
    with pytest.raises(DimensionMismatch):
        fit_hte(sample, spec, at=[(0.5, 0.5)])


def test_result_record_lookup_and_counts():
    sample = random_instance(38)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    with pytest.raises(KeyError):
        result.record("nope")
    assert result.eff_n == result.left.eff_n + result.right.eff_n
    assert result.h_left == result.h_right == 0.6
    for rec in result.records:
        assert rec.ci_low <= rec.rbc_point <= rec.ci_high
        assert 0.0 <= rec.p_value <= 1.0


# ---------------------------------------------------------------------------
# cate_at


def test_cate_at_zero_returns_baseline():
    sample = random_instance(39)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    rec = cate_at(result, [0.0])
    assert rec.point == pytest.approx(
        result.record("Baseline (w=0)").point, rel=1e-14
    )


def test_cate_at_one_adds_group_difference():
    sample = random_instance(40)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    base = result.record("Baseline (w=0)").point
    diff = [r for r in result.records if r.label.startswith("Diff")][0].point
    assert cate_at(result, [1.0]).point == pytest.approx(base + diff, rel=1e-12)


def test_cate_selector_arithmetic_on_published_pair():
    # intercept 0.471, slope -0.217, evaluated one unit above baseline
    varsigma = np.array([0.471, -0.217])
    point = float(np.array([1.0, 1.0]) @ varsigma)
    assert point == pytest.approx(0.254, abs=1e-12)


def test_cate_at_wrong_dimension():
    sample = random_instance(41)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    with pytest.raises(DimensionMismatch):
        cate_at(result, [0.5, 0.5])


def test_requested_points_become_records():
    sample = random_instance(42)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)), at=[(0.5,)])
    rec = result.record("CATE at w=(0.5)")
    assert rec.point == pytest.approx(cate_at(result, [0.5]).point, rel=1e-14)


# ---------------------------------------------------------------------------
# contrast


def test_contrast_unit_selectors_match_records():
    sample = random_instance(43)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    theta_hat = contrast(result, Selector(np.array([1.0, 0.0]), label="level"))
    assert theta_hat.point == pytest.approx(
        result.record("Baseline (w=0)").point, rel=1e-14
    )
    xi_hat = contrast(result, Selector(np.array([0.0, 1.0]), label="difference"))
    diff = [r for r in result.records if r.label.startswith("Diff")][0]
    assert xi_hat.point == pytest.approx(diff.point, rel=1e-14)
    assert xi_hat.se == pytest.approx(diff.se, rel=1e-12)


def test_contrast_is_linear_in_the_selector():
    sample = random_instance(44)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    s1 = np.array([1.0, 0.0])
    s2 = np.array([0.0, 1.0])
    combo = contrast(result, Selector(2.0 * s1 - 3.0 * s2, label="combo"))
    p1 = contrast(result, Selector(s1, label="a")).point
    p2 = contrast(result, Selector(s2, label="b")).point
    assert combo.point == pytest.approx(2.0 * p1 - 3.0 * p2, rel=1e-12)


def test_null_selector_degenerates_cleanly():
    sample = random_instance(45)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    rec = contrast(result, Selector(np.zeros(2), label="null"))
    assert rec.point == 0.0
    assert rec.variance == 0.0
    assert rec.zero_se
    assert rec.p_value == 1.0
    assert rec.ci_low == rec.ci_high == rec.rbc_point


def test_contrast_wrong_dimension():
    sample = random_instance(46)
    result = fit_hte(sample, FitSpec(bandwidth=Common(0.6)))
    with pytest.raises(DimensionMismatch):
        contrast(result, Selector(np.array([1.0, 0.0, 0.0]), label="bad"))


def test_selector_label_must_be_nonempty():
    with pytest.raises(ValueError):
        Selector(np.array([1.0, 0.0]), label="")


# ---------------------------------------------------------------------------
# extrapolation flag


def test_extrapolation_flagged_outside_observed_range():
    rng = np.random.default_rng(47)
    n = 250
    x = rng.uniform(-1, 1, n)
    w = rng.uniform(0.0, 1.0, (n, 1))
    y = 0.5 * x + (x >= 0) * (0.7 + 0.2 * w[:, 0]) + 0.3 * rng.standard_normal(n)
    sample = validate_sample(y, x, 0.0, w)
    result = fit_hte(
        sample,
        FitSpec(bandwidth=Common(0.7)),
        labels=["inc"],
        kinds=["continuous"],
        at=[(0.5,), (2.0,)],
    )
    assert result.record("Slope: inc") is not None
    assert not result.record("CATE at w=(0.5)").extrapolated
    assert result.record("CATE at w=(2)").extrapolated
    assert not cate_at(result, [0.25]).extrapolated
    assert cate_at(result, [-0.5]).extrapolated
