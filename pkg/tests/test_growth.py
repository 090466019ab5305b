import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from asympto.errors import (ConfigInvalid, Inconsistent, NotLogConvex,
                            PreconditionFailed, WindowExceeded)
from asympto.growth import (AssociatedFunction, default_t_grid, gamma_estimate,
                            recover_log_value, recovered_log_values)
from asympto.sequences import WeightSequence, transform


def test_associated_function_point_value():
    # inf_p p! (0.1)^p is attained at p in {9, 10}: 10! * 1e-10
    A = AssociatedFunction(WeightSequence.gevrey(1.0), window=200)
    assert A.at(0.1) == pytest.approx(0.00036288, rel=1e-12)


def test_associated_function_caps_at_one():
    A = AssociatedFunction(WeightSequence.gevrey(1.0), window=50)
    t = np.array([1.0, 2.0, 10.0])
    assert_allclose(A.at(t), 1.0, atol=0)
    assert A.log_at(5.0) == 0.0


def test_matches_brute_force_minimum():
    M = WeightSequence.gevrey(1.0)
    A = AssociatedFunction(M, window=400)
    logM = M.log_values(400)
    rng = np.random.default_rng(20260814)
    t = np.exp(rng.uniform(math.log(0.003), math.log(10.0), size=100))
    brute = np.min(logM[None, :] + np.outer(np.log(t), np.arange(401)), axis=1)
    assert_allclose(A.log_at(t), np.minimum(brute, 0.0), atol=1e-12, rtol=0)


def test_t_min_and_window_exceeded():
    A = AssociatedFunction(WeightSequence.gevrey(1.0), window=50)
    assert A.t_min == pytest.approx(1.0 / 51.0, rel=1e-15)
    A.log_at(A.t_min * 1.000001)
    with pytest.raises(WindowExceeded):
        A.log_at(A.t_min * 0.999)


def test_rejects_nonpositive_t_and_short_window():
    A = AssociatedFunction(WeightSequence.gevrey(1.0), window=50)
    with pytest.raises(ConfigInvalid):
        A.log_at(0.0)
    with pytest.raises(ConfigInvalid):
        A.log_at(np.array([0.5, -1.0]))
    with pytest.raises(ConfigInvalid):
        AssociatedFunction(WeightSequence.gevrey(1.0), window=0)


def test_breakpoints_are_inverse_quotients():
    A = AssociatedFunction(WeightSequence.gevrey(1.0), window=50)
    assert_allclose(A.breakpoints(5), 1.0 / np.arange(1.0, 7.0), rtol=1e-15)


def test_staircase_requires_log_convexity():
    M = WeightSequence.from_table(np.array([0.0, 1.0, 0.5, 2.0]))
    with pytest.raises(NotLogConvex):
        AssociatedFunction(M)


@pytest.mark.parametrize("make", [
    lambda: WeightSequence.gevrey(1.0),
    lambda: WeightSequence.gevrey(2.0),
    lambda: WeightSequence.q_gevrey(2.0, 2.0),
])
def test_recovery_round_trip(make):
    M = make()
    err = recovered_log_values(M, 100) - M.log_values(100)
    assert float(np.abs(err).max()) <= 1e-12


def test_recover_single_value_consistent():
    M = WeightSequence.gevrey(1.0)
    grid = default_t_grid(M, 40)
    assert recover_log_value(M, 40, grid) == pytest.approx(
        float(M.log_value(40)), abs=1e-12)


# -- growth index --------------------------------------------------------------

def test_gamma_factorials():
    est = gamma_estimate(WeightSequence.gevrey(1.0), 600)
    assert (est.lower, est.upper) == (1.0, 1.03125)
    assert est.estimate == pytest.approx(1.015625)
    assert est.method == "almost-increasing bisection, tail-sum cross-check"
    assert est.probes and len(est.validations) == 2


def test_gamma_square_root_factorials():
    est = gamma_estimate(WeightSequence.gevrey(0.5), 600)
    assert (est.lower, est.upper) == (0.5, 0.53125)


def test_gamma_shifts_by_one_under_hat():
    base = gamma_estimate(WeightSequence.gevrey(1.0), 600)
    hat = gamma_estimate(transform(WeightSequence.gevrey(1.0), "hat"), 600)
    assert (hat.lower, hat.upper) == (2.0, 2.03125)
    assert hat.estimate - base.estimate == pytest.approx(1.0, abs=est_tol())


def est_tol():
    return 0.0625  # one bracket width on each side


def test_gamma_unbounded_above_cap():
    est = gamma_estimate(WeightSequence.q_pp(2.0), 600)
    assert est.window == (0, 60)  # clamped to the family window
    assert est.lower == 64.0 and math.isinf(est.upper)
    assert math.isinf(est.estimate)


def test_gamma_short_window_rejected():
    with pytest.raises(PreconditionFailed):
        gamma_estimate(WeightSequence.gevrey(1.0), 16)


def test_gamma_refuses_constant_sequence():
    # gamma = 0 here; the almost-increasing test alone would accept a tiny
    # positive index, and the tail-sum cross-check catches the contradiction
    C = WeightSequence.from_table(np.zeros(2001))
    with pytest.raises(Inconsistent):
        gamma_estimate(C, 500)
    est = gamma_estimate(C, 500, cross_validate=False)
    assert est.upper <= 0.05 and est.validations == []
