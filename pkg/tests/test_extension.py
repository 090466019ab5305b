import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import exp1, gammaln

from asympto.errors import (ConfigInvalid, EmptySeries, IllConditioned,
                            Inconsistent, MomentsMissing,
                            NotShiftedEquivalent, OutsideSector,
                            PreconditionFailed)
from asympto.extension import (apply_extension, extract_asymptotic_coeffs,
                               fit_type, flat_difference_fit, formal_borel,
                               geometric_ladder, remainder_report)
from asympto.flat import FlatFunction, SectorSpec, moments
from asympto.sequences import FormalSeries, WeightSequence


@pytest.fixture(scope="module")
def euler_borel(euler_series, exp_kernel_moments, factorials):
    return formal_borel(euler_series, exp_kernel_moments, factorials)


@pytest.fixture(scope="module")
def euler_ladder(euler_borel, exp_kernel_half_sector):
    xs = geometric_ladder(0.02, 0.8, 16)
    vals = np.array([apply_extension(euler_borel, exp_kernel_half_sector, x,
                                     rtol=1e-11) for x in xs])
    return xs, vals


def test_fit_type_euler_is_unit(euler_series, factorials):
    fit = fit_type(euler_series, factorials)
    assert fit.h == pytest.approx(1.0, rel=1e-9)
    assert fit.norm == pytest.approx(1.0, rel=1e-8)


def test_fit_type_geometric_breakpoint(factorials):
    p = np.arange(41, dtype=float)
    g3 = FormalSeries.from_log(gammaln(p + 1.0) + p * math.log(3.0),
                               np.zeros(41))
    assert fit_type(g3, factorials).h == pytest.approx(3.0, rel=1e-9)


def test_fit_type_rejects_empty(factorials):
    with pytest.raises(EmptySeries):
        fit_type(FormalSeries(np.zeros(0, dtype=complex)), factorials)


def test_borel_coefficients_and_radii(euler_borel):
    B = euler_borel
    # a_{p+1} = (-1)^(p+1) (p+1)!, mu(p) = p!  =>  b_p = (-1)^(p+1) (p+1)
    ref = np.array([(-1) ** (q + 1) * (q + 1.0) for q in range(40)])
    assert_allclose(B.coeffs.real, ref, atol=2e-12)
    assert_allclose(B.coeffs.imag, 0.0, atol=2e-12)
    assert B.R0 == pytest.approx(0.5 * 3.0 ** (-1.0 / 3.0), abs=1e-9)
    assert B.radius_R == pytest.approx(2.0 * B.R0, rel=1e-15)
    assert B.a0 == 1.0 + 0.0j
    assert B.source == "euler"


def test_borel_rejects_wrong_sequence(euler_series, exp_kernel_moments):
    with pytest.raises(NotShiftedEquivalent):
        formal_borel(euler_series, exp_kernel_moments,
                     WeightSequence.gevrey(2.0))


def test_borel_rejects_understated_type(euler_series, exp_kernel_moments,
                                        factorials):
    with pytest.raises(Inconsistent):
        formal_borel(euler_series, exp_kernel_moments, factorials,
                     h=0.5, norm=1.0)


def test_borel_needs_enough_moments(euler_series, exp_kernel_half_sector,
                                    factorials):
    short = moments(exp_kernel_half_sector, 10)
    with pytest.raises(MomentsMissing):
        formal_borel(euler_series, short, factorials)
    with pytest.raises(EmptySeries):
        formal_borel(FormalSeries(np.zeros(0, dtype=complex)), short,
                     factorials)


def test_extension_closed_form_single_term(exp_kernel_half_sector,
                                           exp_kernel_moments, factorials):
    # fhat = z: g = 1 and T(z) = int_0^R0 exp(-u/z) du = z (1 - exp(-R0/z))
    delta = FormalSeries(np.array([0.0, 1.0], dtype=complex))
    B = formal_borel(delta, exp_kernel_moments, factorials, h=1.0, norm=1.0)
    for z in (0.17, 0.05 + 0.02j):
        exact = z * (1.0 - np.exp(-B.R0 / z))
        got = apply_extension(B, exp_kernel_half_sector, z)
        assert got == pytest.approx(exact, rel=1e-10)


def test_extension_near_true_borel_sum(euler_borel, exp_kernel_half_sector):
    # truncating the kernel transform at R0 costs a flat-size error
    T = apply_extension(euler_borel, exp_kernel_half_sector, 0.1)
    S = math.exp(10.0) * exp1(10.0) / 0.1
    assert abs(T - S) == pytest.approx(1.5101e-3, rel=1e-3)


def test_extension_sector_enforced(euler_borel, exp_kernel_half_sector):
    with pytest.raises(OutsideSector):
        apply_extension(euler_borel, exp_kernel_half_sector, 0.1j)
    with pytest.raises(OutsideSector):
        apply_extension(euler_borel, exp_kernel_half_sector, 0.0)


def test_remainder_report_euler(euler_borel, exp_kernel_half_sector,
                                euler_series, factorials):
    rep = remainder_report(euler_borel, exp_kernel_half_sector, euler_series,
                           factorials, p_max=12)
    assert rep.holds and rep.verdict == "pass"
    assert rep.h_prime == pytest.approx(2.289191352918215, rel=1e-6)
    assert rep.C == pytest.approx(1.0, rel=1e-9)
    assert rep.c_pred == pytest.approx(5.755332432840371, rel=1e-6)
    assert rep.h_prime <= rep.safety * rep.c_pred * rep.h
    assert list(rep.masked) == [0, 0, 0, 0, 0, 0, 33, 37, 37, 37, 37, 37, 37]
    assert rep.sup_norm[0] == pytest.approx(0.9992931462036369, rel=1e-9)
    assert rep.fitted_bound[0] == pytest.approx(1.0, rel=1e-9)
    assert rep.quad_err < 1e-8
    assert rep.norm_continuity["ok"]


def test_remainder_needs_certified_kernel(euler_borel, euler_series):
    wide = FlatFunction.gevrey_exp(2.0)
    with pytest.raises(PreconditionFailed):
        remainder_report(euler_borel, wide, euler_series,
                         WeightSequence.gevrey(1.0), p_max=6)


def test_geometric_ladder_shape():
    xs = geometric_ladder(0.02, 0.8, 16)
    assert xs[0] == 0.02 and len(xs) == 16
    assert_allclose(xs[1:] / xs[:-1], 0.8, rtol=1e-14)
    with pytest.raises(ConfigInvalid):
        geometric_ladder(0.02, 1.1, 16)


def test_extraction_recovers_euler_coefficients(euler_ladder):
    xs, vals = euler_ladder
    ext = extract_asymptotic_coeffs(xs, vals, 4)
    ref = np.array([(-1) ** k * math.gamma(k + 1.0) for k in range(5)])
    rel = np.abs(ext.coeffs - ref) / np.abs(ref)
    assert float(rel.max()) < 1e-2
    assert np.all(np.abs(ext.coeffs - ref) <= ext.errors)
    assert ext.ratio == pytest.approx(0.8, rel=1e-12)


def test_extraction_flags_unresolvable_order(euler_ladder):
    xs, vals = euler_ladder
    rng = np.random.default_rng(7)
    noisy = vals + 1e-6 * rng.standard_normal(xs.size)
    with pytest.raises(IllConditioned) as exc:
        extract_asymptotic_coeffs(xs, noisy, 6, noise=1e-6)
    partial = exc.value.partial
    assert len(partial.coeffs) >= 2
    assert partial.coeffs[0] == pytest.approx(1.0, rel=1e-4)
    assert partial.coeffs[1] == pytest.approx(-1.0, rel=1e-2)


def test_extraction_input_validation(euler_ladder):
    xs, vals = euler_ladder
    with pytest.raises(ConfigInvalid):
        extract_asymptotic_coeffs(xs[:2], vals[:2], 1)
    with pytest.raises(ConfigInvalid):
        extract_asymptotic_coeffs(np.array([0.02, 0.015, 0.013]),
                                  vals[:3], 1)


def test_flat_difference_fit_euler(euler_borel, exp_kernel_half_sector,
                                   factorials):
    xs = np.geomspace(0.02, 0.3, 25)
    S = np.exp(1.0 / xs) * exp1(1.0 / xs) / xs
    T = np.array([apply_extension(euler_borel, exp_kernel_half_sector, x,
                                  rtol=1e-11) for x in xs])
    fit = flat_difference_fit(xs, T - S, factorials)
    assert fit.h == pytest.approx(2.5118864315095824, rel=1e-6)
    assert fit.K == pytest.approx(0.04976977201161795, rel=1e-6)
    assert fit.residual <= 0.0


def test_flat_difference_fit_noise_floor(factorials):
    xs = np.geomspace(0.02, 0.3, 10)
    with pytest.raises(PreconditionFailed):
        flat_difference_fit(xs, np.full(10, 1e-18), factorials, noise=1e-12)
