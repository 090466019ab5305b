import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import gamma, iv, wofz

from asympto.errors import (ConfigInvalid, GrowthCapExceeded,
                            MittagLefflerDomainExceeded, OutsideAperture)
from asympto.ramified import (BorelPath, GrowthCap, MittagLeffler,
                              analytic_alpha_borel, analytic_alpha_laplace,
                              formal_alpha_borel, formal_alpha_laplace,
                              transform_expansion_check)
from asympto.sequences import FormalSeries


def ml_reference(alpha, w, dps=60):
    """Plain high-precision series; independent of the production regimes."""
    with mp.workdps(dps):
        s, term, k = mp.mpc(0), mp.mpc(1), 0
        while k < 5000:
            term = mp.mpc(w) ** k / mp.gamma(1 + mp.mpf(alpha) * k)
            s += term
            if k > 5 and abs(term) < mp.mpf(10) ** (-dps) * max(1, abs(s)):
                break
            k += 1
        return complex(s)


def test_ml_order_one_is_exp():
    ml = MittagLeffler(1.0)
    for w in (0.3, -2.0 + 1.0j, 10.0j):
        assert ml.eval(w) == pytest.approx(cmath.exp(w), rel=1e-14)
    with pytest.raises(MittagLefflerDomainExceeded):
        ml.eval(710.0)


def test_ml_half_matches_erfc_form():
    # E_{1/2}(w) = exp(w^2) erfc(-w) = wofz(-i w), valid on the whole plane
    ml = MittagLeffler(0.5)
    for r in (0.3, 2.0, 5.0, 12.0, 20.0):
        for th in (0.0, 0.8, 2.2, math.pi):
            w = r * cmath.exp(1j * th)
            ref = complex(wofz(-1j * w))
            assert ml.eval(w) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_ml_regimes_are_glued():
    # the calibrated series radius and the asymptotic threshold bracket a
    # bridge region; straddling either seam must track the reference series
    ml = MittagLeffler(0.75)
    for seam in (ml.z_ml, ml.w_asym):
        for s in (0.999, 1.001):
            w = seam * s * cmath.exp(0.4j)
            assert ml.eval(w) == pytest.approx(ml_reference(0.75, w),
                                               rel=1e-8)


def test_ml_near_unit_order_on_negative_axis():
    # two exponential sheets coalesce at arg w = pi when alpha -> 1; the
    # asymptotic form is unusable there and evaluation must escalate
    alpha = 0.999999
    ml = MittagLeffler(alpha)
    w = -30.0
    ref = ml_reference(alpha, w)
    assert ml.eval(w) == pytest.approx(ref, rel=1e-9)


def test_ml_escalation_control():
    ml = MittagLeffler(0.5)
    w = ml.z_ml * 1.5 * cmath.exp(2.0j)  # bridge zone: series nor asymptotics
    ml.eval(w)
    with pytest.raises(MittagLefflerDomainExceeded):
        ml.eval(w, escalate=False)


def test_ml_order_validation():
    with pytest.raises(ConfigInvalid):
        MittagLeffler(0.0)
    with pytest.raises(ConfigInvalid):
        MittagLeffler(2.0)


# -- analytic Laplace -----------------------------------------------------------

def test_laplace_normalizes_constants():
    for alpha in (0.5, 1.0, 1.5):
        v = analytic_alpha_laplace(lambda u: 1.0, alpha, 0.0, 0.3,
                                   GrowthCap(1.1, 0.0))
        assert v == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_laplace_monomial_law(alpha):
    z = 0.2
    for p in range(9):
        v = analytic_alpha_laplace(lambda u, p=p: u ** p, alpha, 0.0, z,
                                   GrowthCap(1.0, 1.0), rtol=1e-10)
        assert v == pytest.approx(gamma(1.0 + alpha * p) * z ** p, rel=1e-9)


def test_laplace_stieltjes_value():
    v = analytic_alpha_laplace(lambda u: 1.0 / (1.0 + u), 1.0, 0.0, 0.1,
                               GrowthCap(1.1, 0.0), rtol=1e-10)
    assert v == pytest.approx(0.9156333393978808, rel=1e-12)


def test_laplace_domain_errors():
    f = lambda u: 1.0
    with pytest.raises(OutsideAperture):
        analytic_alpha_laplace(f, 1.0, 0.0, 0.3 * cmath.exp(1.6j),
                               GrowthCap(1.0, 0.0))
    with pytest.raises(GrowthCapExceeded):
        analytic_alpha_laplace(lambda u: np.exp(u), 1.0, 0.0, 1.5,
                               GrowthCap(1.0, 1.0))
    with pytest.raises(ConfigInvalid):
        analytic_alpha_laplace(f, 1.0, 0.0, 0.0, GrowthCap(1.0, 0.0))
    with pytest.raises(ConfigInvalid):
        GrowthCap(0.0, 1.0)


# -- analytic Borel --------------------------------------------------------------

def test_borel_of_exponential_is_bessel():
    # sum u^p / (p!)^2 = I_0(2 sqrt(u))
    v = analytic_alpha_borel(lambda z: np.exp(z), 1.0, BorelPath(0.0, 2.0), 0.3)
    assert v == pytest.approx(float(iv(0, 2.0 * math.sqrt(0.3))), rel=1e-12)


def test_borel_monomial_law():
    v = analytic_alpha_borel(lambda z: z, 0.5, BorelPath(0.0, 1.0), 0.1)
    assert v == pytest.approx(0.1 / gamma(1.5), rel=1e-12)
    v = analytic_alpha_borel(lambda z: z * z, 1.5, BorelPath(0.0, 1.0), 0.2)
    assert v == pytest.approx(0.04 / gamma(4.0), rel=1e-12)


def test_borel_at_origin_uses_proxy_point():
    v = analytic_alpha_borel(lambda z: 1.0 / (1.0 - z), 1.0,
                             BorelPath(0.0, 0.5), 0.0)
    assert v == pytest.approx(1.0, abs=5e-7)


def test_borel_aperture_and_path_validation():
    f = lambda z: z
    with pytest.raises(OutsideAperture):
        analytic_alpha_borel(f, 1.0, BorelPath(0.0, 1.0),
                             0.1 * cmath.exp(0.3j))
    with pytest.raises(ConfigInvalid):
        BorelPath(0.0, 0.0)
    with pytest.raises(ConfigInvalid):
        BorelPath(0.0, 1.0, eps=4.0)


def test_borel_escalation_budget():
    # |u|/radius far past the series radius without escalation: refused
    f = lambda z: z
    with pytest.raises(MittagLefflerDomainExceeded):
        analytic_alpha_borel(f, 0.5, BorelPath(0.0, 0.01), 1.0,
                             escalate=False)


# -- formal transforms ------------------------------------------------------------

def test_formal_round_trip_exact():
    rng = np.random.default_rng(3)
    la = rng.uniform(-50.0, 200.0, size=61)
    ph = rng.uniform(-math.pi, math.pi, size=61)
    f = FormalSeries.from_log(la, ph, label="rand")
    for alpha in (0.4, 1.0, 1.7):
        back = formal_alpha_borel(formal_alpha_laplace(f, alpha), alpha)
        assert_allclose(back.log_abs(), la, rtol=0, atol=1e-12)
        assert np.array_equal(back.phases(), ph)


def test_formal_laplace_is_gamma_weighting():
    f = FormalSeries(np.array([1.0, 1.0, 1.0], dtype=complex))
    L = formal_alpha_laplace(f, 2.0)
    assert_allclose(L.coeffs.real, [1.0, gamma(3.0), gamma(5.0)], rtol=1e-14)


def test_formal_transforms_reject_bad_order():
    f = FormalSeries(np.array([1.0], dtype=complex))
    with pytest.raises(ConfigInvalid):
        formal_alpha_laplace(f, 0.0)
    with pytest.raises(ConfigInvalid):
        formal_alpha_borel(f, -1.0)


# -- expansion functoriality -------------------------------------------------------

def test_transform_expansion_check_geometric():
    # f = 1/(1+u) carries the alternating geometric expansion; its Laplace
    # transform's asymptotic coefficients are (-1)^p p!
    p = np.arange(8, dtype=float)
    fhat = FormalSeries.from_log(np.zeros(8), math.pi * (p % 2.0))
    rep = transform_expansion_check(lambda u: 1.0 / (1.0 + u), fhat,
                                    alpha=1.0, beta=1.0, p_max=4)
    assert rep.holds and rep.verdict == "agrees"
    assert_allclose(rep.reference.real[:3], [1.0, -1.0, 2.0], rtol=1e-13)
    assert bool(np.all(rep.ok))
