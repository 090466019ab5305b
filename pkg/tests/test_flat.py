import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import gammaln

from asympto.errors import ConfigInvalid, MomentsMissing, OutsideSector
from asympto.flat import (FlatFunction, SectorSpec, moment_equiv_fit, moments,
                          verify_flatness)
from asympto.sequences import WeightSequence


def test_gevrey_exp_closed_forms():
    F = FlatFunction.gevrey_exp(1.0)
    assert F.flat_eval(0.5) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert F.kernel_eval(2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)
    s = np.array([-1.0, 0.0, 2.0])
    assert_allclose(F.log_kernel_on_axis(s), -np.exp(s), rtol=1e-15)
    F2 = FlatFunction.gevrey_exp(2.0)
    assert F2.flat_eval(4.0) == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_gevrey_exp_default_sector_and_validation():
    F = FlatFunction.gevrey_exp(1.5)
    assert F.sector.opening == 1.5
    assert F.sector.half_angle == pytest.approx(0.75 * math.pi)
    with pytest.raises(ConfigInvalid):
        FlatFunction.gevrey_exp(0.0)


def test_sector_enforcement():
    F = FlatFunction.gevrey_exp(1.0, sector=SectorSpec(0.0, 0.5))
    F.flat_eval(0.1 * np.exp(0.2j * math.pi))
    with pytest.raises(OutsideSector):
        F.flat_eval(0.1 * np.exp(0.3j * math.pi))
    with pytest.raises(OutsideSector):
        F.flat_eval(0.0)
    with pytest.raises(OutsideSector):
        F.kernel_eval(0.0)


def test_user_supplied_matches_builtin():
    F = FlatFunction.user_supplied(lambda z: np.exp(-1.0 / z),
                                   SectorSpec(0.0, 0.5), label="byhand")
    G = FlatFunction.gevrey_exp(1.0, sector=SectorSpec(0.0, 0.5))
    z = 0.3 * np.exp(0.1j * math.pi)
    assert F.flat_eval(z) == pytest.approx(G.flat_eval(z), rel=1e-14)
    x = np.array([0.1, 1.0, 10.0])
    assert_allclose(F.log_flat_abs(x), G.log_flat_abs(x), rtol=1e-14)


# -- flatness certificates ----------------------------------------------------

def test_certificate_exp_kernel_vs_factorials(exp_kernel_half_sector,
                                              factorials):
    cert = verify_flatness(exp_kernel_half_sector, factorials)
    assert cert.holds and bool(cert)
    assert cert.verdict == "certified"
    assert cert.K1 == pytest.approx(0.41332973729053096, rel=1e-9)
    assert cert.K2 == pytest.approx(0.7943282347242822, rel=1e-9)
    assert cert.K3 == pytest.approx(0.9992931431603427, rel=1e-9)
    assert cert.K4 == pytest.approx(1.584893192461114, rel=1e-9)
    assert cert.residual == 0.0
    assert len(cert.fan_args) == 9


def test_certificate_fails_lower_for_faster_weight(exp_kernel_half_sector):
    cert = verify_flatness(exp_kernel_half_sector, WeightSequence.gevrey(2.0))
    assert cert.verdict == "fails-lower"
    assert not cert.holds


def test_certificate_fails_upper_on_maximal_sector(factorials):
    # on the natural opening the edge rays stop decaying: no upper envelope
    cert = verify_flatness(FlatFunction.gevrey_exp(2.0), factorials)
    assert cert.verdict == "fails-upper"
    assert math.isinf(cert.K3)


# -- moments -------------------------------------------------------------------

def test_exp_kernel_moments_are_factorials(exp_kernel_moments):
    p = np.arange(45.0)
    assert_allclose(exp_kernel_moments.log_mu, gammaln(p + 1.0),
                    rtol=0, atol=1e-12)
    assert float(exp_kernel_moments.rel_err.max()) < 1e-10
    assert exp_kernel_moments.p_max == 44
    assert exp_kernel_moments.convexity_violation() == 0.0


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_stretched_kernel_moment_law(alpha):
    K = FlatFunction.gevrey_exp(alpha, sector=SectorSpec(0.0, alpha / 2.0))
    mu = moments(K, 20)
    p = np.arange(21.0)
    ref = math.log(alpha) + gammaln(alpha * (p + 1.0))
    assert_allclose(mu.log_mu, ref, rtol=0, atol=1e-10)


def test_moment_accessors_and_bounds(exp_kernel_moments):
    mu = exp_kernel_moments
    assert mu.moment(3) == pytest.approx(6.0, rel=1e-12)
    assert mu.log_weight(0) == 0.0
    assert mu.log_weight(4) == mu.log_moment(3)
    with pytest.raises(MomentsMissing):
        mu.log_moment(45)
    with pytest.raises(MomentsMissing):
        mu.log_moment(-1)


def test_moment_equivalence_shifted(exp_kernel_moments, factorials):
    fit = moment_equiv_fit(exp_kernel_moments, factorials, mode="shifted")
    assert fit.holds and fit.verdict == "fits"
    # mu(p) = (p+1)! exactly, so the squeeze against M_{p+1} has h2 = 1 and
    # the lower gap bottoms out at p = 2: h1 = 3^(-1/3)
    assert fit.h1 == pytest.approx(3.0 ** (-1.0 / 3.0), rel=1e-9)
    assert fit.h2 == pytest.approx(1.0, rel=1e-9)


def test_moment_equivalence_rejects_wrong_growth(exp_kernel_moments):
    fit = moment_equiv_fit(exp_kernel_moments, WeightSequence.gevrey(2.0),
                           mode="shifted")
    assert fit.verdict == "not-equivalent" and not fit

    with pytest.raises(ConfigInvalid):
        moment_equiv_fit(exp_kernel_moments, WeightSequence.gevrey(1.0),
                         mode="sideways")
    with pytest.raises(MomentsMissing):
        moment_equiv_fit(exp_kernel_moments, WeightSequence.gevrey(1.0),
                         window=99)


def test_moment_equivalence_unshifted_mode(exp_kernel_moments):
    # against M_p = p! the gap mu(p)/p! = p+1 grows subgeometrically: still fits
    fit = moment_equiv_fit(exp_kernel_moments, WeightSequence.gevrey(1.0),
                           mode="unshifted")
    assert fit.mode == "unshifted"
    assert fit.h1 >= 1.0 - 1e-9
