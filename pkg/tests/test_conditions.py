import numpy as np
import pytest

from asympto.conditions import (CONDITIONS, CheckerConfig, check_condition,
                                implication_audit, stability_audit)
from asympto.errors import (ConfigInvalid, PreconditionFailed,
                            TailTruncationDominant)
from asympto.sequences import WeightSequence, transform

# One frozen verdict per (built-in sequence, condition); True = holds-on-window.
MATRIX = [
    (lambda: WeightSequence.gevrey(0.5), 500, (True, True, True, True, True, True)),
    (lambda: WeightSequence.gevrey(1.0), 500, (True, True, True, True, True, True)),
    (lambda: WeightSequence.gevrey(2.0), 500, (True, True, True, True, True, True)),
    (lambda: WeightSequence.gevrey_log(1.0, 1.0), 500,
     (True, True, True, True, True, True)),
    (lambda: WeightSequence.q_gevrey(2.0, 2.0), 500,
     (True, True, True, False, True, True)),
    (lambda: WeightSequence.q_gevrey(2.0, 3.0), 500,
     (True, True, False, False, True, True)),
    (lambda: WeightSequence.power_sigma(1.0, 2.0), 500,
     (True, True, False, False, True, True)),
    (lambda: WeightSequence.q_pp(2.0), 60,
     (True, False, False, False, True, False)),
]


@pytest.mark.parametrize("make,window,expected", MATRIX,
                         ids=[m()._asdict()["label"] if hasattr(m(), "_asdict")
                              else m().label for m, _, _ in MATRIX])
def test_verdict_matrix(make, window, expected):
    M = make()
    got = tuple(check_condition(M, c, window).holds for c in CONDITIONS)
    assert got == expected


def test_factorial_shifted_moment_constants_are_unit():
    # m_p = p+1 gives log(m_{p+1}/m_p) < 1, so C0 = H = 1 up to the fit nudge.
    rep = check_condition(WeightSequence.gevrey(1.0), "sm", 500)
    assert rep.holds
    assert rep.constants["C0"] == pytest.approx(1.0, abs=1e-12)
    assert rep.constants["H"] == pytest.approx(1.0, abs=1e-12)
    assert rep.max_violation == 0.0


def test_factorial_derivation_closedness_constants():
    # m_p = p+1 <= C0 H^(p+1): the minimal two-point fit lands on H = 3^(1/3).
    rep = check_condition(WeightSequence.gevrey(1.0), "dc", 500)
    assert rep.holds
    assert rep.constants["H"] == pytest.approx(3.0 ** (1.0 / 3.0), rel=1e-12)
    assert rep.constants["C0"] == pytest.approx(1.0, abs=1e-12)
    assert rep.max_violation == 0.0


def test_factorial_tail_sum_constant():
    # sum_{q>=p} 1/((q+1)! / p!-scaled) stabilizes fast; frozen fitted constant.
    rep = check_condition(WeightSequence.gevrey(1.0), "snq", 500)
    assert rep.holds
    assert rep.constants["C"] == pytest.approx(1.6444344415777448, rel=1e-12)
    assert rep.warnings == []
    assert rep.max_violation == 0.0


def test_resubstituted_constants_leave_no_slack():
    M = WeightSequence.gevrey(1.0)
    for cond in CONDITIONS:
        rep = check_condition(M, cond, 300)
        assert rep.holds, cond
        assert rep.max_violation <= 1e-9, cond


def test_window_tuple_and_validation():
    M = WeightSequence.gevrey(1.0)
    a = check_condition(M, "sm", (0, 100))
    b = check_condition(M, "sm", 100)
    assert a.verdict == b.verdict and a.window == b.window == (0, 100)
    with pytest.raises(ConfigInvalid):
        check_condition(M, "sm", (1, 100))
    with pytest.raises(ConfigInvalid):
        check_condition(M, "no-such-condition", 100)


# -- snq tail handling --------------------------------------------------------

def _slow_tail():
    # quotients grow like p^0.2, so the tail terms decay only like p^(-1.2)
    return transform(WeightSequence.gevrey(1.0), "power", r=0.2)


def test_tail_truncation_raises_when_verdict_would_hold():
    cfg = CheckerConfig(tail_factor=64, tail_dominance=0.05)
    with pytest.raises(TailTruncationDominant):
        check_condition(_slow_tail(), "snq", 500, cfg=cfg)


def test_tail_truncation_tolerated_with_wider_budget():
    cfg = CheckerConfig(tail_factor=64, tail_dominance=0.35)
    rep = check_condition(_slow_tail(), "snq", 500, cfg=cfg)
    assert rep.holds
    assert rep.constants["C"] == pytest.approx(4.963617, rel=1e-5)
    assert rep.warnings == []


def test_tail_truncation_warns_on_failing_verdict():
    # with a short horizon the fitted constant still drifts -> fails, and the
    # dominant omitted tail is reported as a warning instead of an error
    rep = check_condition(_slow_tail(), "snq", 500)
    assert not rep.holds
    assert any("omitted tail" in w for w in rep.warnings)


def test_tail_horizon_clamped_to_family_window():
    rep = check_condition(WeightSequence.q_pp(2.0), "snq", 60)
    assert rep.holds
    assert any("clamped" in w for w in rep.warnings)


def test_tail_horizon_shorter_than_window_rejected():
    with pytest.raises(ConfigInvalid):
        check_condition(WeightSequence.q_pp(2.0), "snq", 60, tail_horizon=30)


def test_tail_sum_constant_monotone_in_window():
    M = WeightSequence.gevrey(1.0)
    c300 = check_condition(M, "snq", 300).constants["C"]
    c500 = check_condition(M, "snq", 500).constants["C"]
    assert c300 <= c500 * (1.0 + 1e-12)


# -- audits -------------------------------------------------------------------

def test_implication_audit_factorials_all_satisfied():
    checks = implication_audit(WeightSequence.gevrey(1.0), 500)
    assert [c.name for c in checks] == ["dc=>sm", "sm=>star", "mg=>dc"]
    assert all(c.status == "satisfied" for c in checks)


def test_implication_audit_vacuous_when_premise_fails():
    checks = implication_audit(WeightSequence.q_pp(2.0), 60)
    assert all(c.status == "vacuous" for c in checks)


def test_implication_audit_rejects_decaying_quotients():
    M = WeightSequence.from_table(-np.arange(100.0))
    with pytest.raises(PreconditionFailed):
        implication_audit(M, 99)


def test_stability_audit_contractual_combo():
    audit = stability_audit(WeightSequence.gevrey(1.0), "sm", "hat", 200)
    assert audit.contractual and audit.same_verdict and not audit.violated


def test_stability_audit_noncontractual_combo_never_violates():
    audit = stability_audit(WeightSequence.q_gevrey(2.0, 2.0), "mg", "power",
                            200, r=2.0)
    assert not audit.contractual
    assert not audit.violated


def test_stability_audit_rejects_unknown_perturbation():
    with pytest.raises(ConfigInvalid):
        stability_audit(WeightSequence.gevrey(1.0), "sm", "squeeze", 100)
