"""Finite-window checkers for weight-sequence growth conditions.

Conditions on a weight sequence M with quotients m_p:

    lc    m_p nondecreasing (log convexity)
    sm    log(m_{p+1}/m_p) <= C0 H^(p+1)     (shifted-moment condition)
    dc    m_p <= C0 H^(p+1)                  (derivation closedness)
    mg    M_{p+q} <= C0 H^(p+q) M_p M_q      (moderate growth)
    snq   sum_{q>=p} 1/((q+1) m_q) <= C/m_p  (strong non-quasianalyticity)
    star  log m_p <= C1 H^p

A window can only ever certify "holds on window" / "fails on window".  The
verdict comes from refitting the minimal constants on nested sub-windows and
testing the growth of the fitted log-constant against log(window end); the
constants reported for the full window re-substitute into the defining
inequality at every index with no slack tricks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigInvalid, PreconditionFailed, TailTruncationDominant
from .fitting import (DIVERGENCE_SLOPE, minimal_h_fit, nested_window_ends,
                      slope_vs_log_end, suffix_logsumexp)
from .sequences import WeightSequence, transform

CONDITIONS = ("lc", "sm", "dc", "mg", "snq", "star")

HOLDS = "holds-on-window"
FAILS = "fails-on-window"


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass
class CheckerConfig:
    divergence_slope: float = DIVERGENCE_SLOPE
    sm_floor: float = 1.0          # floor inside the outer log for sm/star slacks
    tail_factor: int = 4           # snq tail horizon = tail_factor * window
    tail_dominance: float = 0.05   # max allowed shift of log C from omitted tail
    nested_count: int = 5


@dataclass
class PropertyReport:
    condition: str
    verdict: str
    window: tuple
    constants: dict
    diagnostic_slope: float
    nested_fits: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    max_violation: float = 0.0

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS


def _parse_window(window) -> int:
    if isinstance(window, tuple):
        lo, hi = window
        if lo != 0:
            raise ConfigInvalid("windows start at index 0")
        return int(hi)
    return int(window)


def _fit_pair(t: np.ndarray, e: np.ndarray):
    """Minimal (log H, log C) with the H > 1 convention of the reports."""
    logH, logC = minimal_h_fit(t, e)
    return max(logH, 1e-13), logC


def _fit_series(t: np.ndarray, e: np.ndarray, ends, cfg: CheckerConfig):
    """Per nested end, minimal log H closing t_p <= log C + e_p log H."""
    fits = []
    for end in ends:
        sel = slice(0, end + 1)
        logH, _ = _fit_pair(t[sel], e[sel])
        fits.append((end, logH))
    slope = slope_vs_log_end([f[0] for f in fits], [f[1] for f in fits])
    return fits, slope


def _verdict(slope: float, cfg: CheckerConfig) -> str:
    return HOLDS if slope <= cfg.divergence_slope else FAILS


def _resubstitute(values: np.ndarray, e: np.ndarray, logC: float,
                  logH: float, outer_log: bool) -> float:
    """Max violation of the original inequality with the fitted constants."""
    rhs = logC + e * logH
    if outer_log:
        # original: value <= C H^e; only values > 0 constrain in log form
        pos = values > 0
        if not pos.any():
            return 0.0
        viol = np.log(values[pos]) - rhs[pos]
    else:
        viol = values - rhs
    return float(np.max(viol.clip(min=0.0), initial=0.0))


def check_condition(M: WeightSequence, condition: str, window,
                    tail_horizon: Optional[int] = None,
                    cfg: Optional[CheckerConfig] = None) -> PropertyReport:
    """Check one growth condition on [0, window]."""
    cfg = cfg or CheckerConfig()
    P = _parse_window(window)
    if condition not in CONDITIONS:
        raise ConfigInvalid(f"unknown condition {condition!r}")

    if condition == "lc":
        lm = M.log_quotients(P)
        diffs = np.diff(lm)
        tol = 1e-12 * np.maximum(1.0, np.abs(lm[:-1]))
        bad = np.nonzero(diffs < -tol)[0]
        ok = bad.size == 0
        return PropertyReport("lc", HOLDS if ok else FAILS, (0, P),
                              {} if ok else {"first_violation": int(bad[0])},
                              0.0, [],
                              [] if ok else [f"quotients decrease at p={int(bad[0])}"],
                              0.0 if ok else float(-diffs[bad].min()))

    if condition == "sm":
        lm = M.log_quotients(P)
        g = np.diff(lm)                       # log(m_{p+1}/m_p), p = 0..P-1
        t = np.log(np.maximum(g, cfg.sm_floor))
        e = np.arange(1, g.size + 1, dtype=float)   # exponent p+1
        ends = nested_window_ends(g.size - 1, cfg.nested_count)
        fits, slope = _fit_series(t, e, ends, cfg)
        logH, logC = _fit_pair(t, e)
        viol = _resubstitute(g, e, logC, logH, outer_log=True)
        return PropertyReport("sm", _verdict(slope, cfg), (0, P),
                              {"C0": _exp(logC), "H": _exp(logH),
                               "log_C0": logC, "log_H": logH},
                              slope, fits, [], viol)

    if condition == "dc":
        lm = M.log_quotients(P)
        e = np.arange(1, P + 2, dtype=float)        # exponent p+1
        ends = nested_window_ends(P, cfg.nested_count)
        fits, slope = _fit_series(lm, e, ends, cfg)
        logH, logC = _fit_pair(lm, e)
        viol = float(np.max((lm - (logC + e * logH)).clip(min=0.0), initial=0.0))
        return PropertyReport("dc", _verdict(slope, cfg), (0, P),
                              {"C0": _exp(logC), "H": _exp(logH),
                               "log_C0": logC, "log_H": logH},
                              slope, fits, [], viol)

    if condition == "star":
        lm = M.log_quotients(P)
        t = np.log(np.maximum(lm, cfg.sm_floor))
        e = np.arange(0, P + 1, dtype=float)        # exponent p, p=0 pins C1
        ends = nested_window_ends(P, cfg.nested_count)
        fits, slope = _fit_series(t, e, ends, cfg)
        logH, logC = _fit_pair(t, e)
        viol = _resubstitute(lm, e, logC, logH, outer_log=True)
        return PropertyReport("star", _verdict(slope, cfg), (0, P),
                              {"C1": _exp(logC), "H": _exp(logH),
                               "log_C1": logC, "log_H": logH},
                              slope, fits, [], viol)

    if condition == "mg":
        logM = M.log_values(P)
        # t_s = logM_s - min_{p<=s}(logM_p + logM_{s-p}); symmetric in (p, q)
        t = np.empty(P, dtype=float)
        for s in range(1, P + 1):
            pairs = logM[: s + 1] + logM[s::-1]
            t[s - 1] = logM[s] - pairs.min()
        e = np.arange(1, P + 1, dtype=float)        # exponent p+q
        ends = nested_window_ends(P - 1, cfg.nested_count)
        fits, slope = _fit_series(t, e, ends, cfg)
        logH, logC = _fit_pair(t, e)
        viol = float(np.max((t - (logC + e * logH)).clip(min=0.0), initial=0.0))
        return PropertyReport("mg", _verdict(slope, cfg), (0, P),
                              {"C0": _exp(logC), "H": _exp(logH),
                               "log_C0": logC, "log_H": logH},
                              slope, fits, [], viol)

    # snq
    warnings = []
    horizon = tail_horizon if tail_horizon is not None else cfg.tail_factor * P
    if horizon > M.window:
        horizon = M.window
        warnings.append(f"tail horizon clamped to family window {M.window}")
    if horizon < P:
        raise ConfigInvalid("snq tail horizon shorter than the window")
    lm = M.log_quotients(horizon)
    log_terms = -np.log(np.arange(1, horizon + 2, dtype=float)) - lm

    def fitted_logC(end, hor):
        tails = suffix_logsumexp(log_terms[: hor + 1])
        return float(np.max(tails[: end + 1] + lm[: end + 1]))

    ends = nested_window_ends(P, cfg.nested_count)
    fits = [(end, fitted_logC(end, min(cfg.tail_factor * end, horizon)))
            for end in ends]
    slope = slope_vs_log_end([f[0] for f in fits], [f[1] for f in fits])
    verdict = _verdict(slope, cfg)

    tails = suffix_logsumexp(log_terms)
    ratios = tails[: P + 1] + lm[: P + 1]
    logC = float(np.max(ratios))

    # Estimate the omitted remainder past the horizon from the local decay,
    # taking the larger of a geometric and a power-law integral bound, and
    # flag the truncation if folding it back in would move the fitted constant.
    rho_log = float(log_terms[horizon] - log_terms[horizon - 1])
    slope_exp = -rho_log / math.log((horizon + 1) / horizon)
    if rho_log >= 0.0 or slope_exp <= 1.0:
        log_rest = math.inf
    else:
        geo = rho_log - math.log1p(-math.exp(rho_log))
        pow_ = math.log((horizon + 1) / (slope_exp - 1.0))
        log_rest = float(log_terms[horizon]) + max(geo, pow_)
    logC_upper = float(np.max(np.logaddexp(tails[: P + 1], log_rest)
                              + lm[: P + 1]))
    dominance = logC_upper - logC
    if not dominance <= cfg.tail_dominance:
        msg = (f"omitted tail past horizon {horizon} would move the fitted "
               f"constant by {dominance:.2e} in log")
        if verdict == HOLDS:
            raise TailTruncationDominant(msg)
        warnings.append(msg)

    logC += 1e-13 * max(1.0, abs(logC))
    viol = float(np.max((ratios - logC).clip(min=0.0), initial=0.0))
    return PropertyReport("snq", verdict, (0, P), {"C": _exp(logC), "log_C": logC},
                          slope, fits, warnings, viol)


# -- audits -------------------------------------------------------------------

SATISFIED = "satisfied"
VACUOUS = "vacuous"
VIOLATED = "violated"


@dataclass
class ImplicationCheck:
    name: str
    status: str
    details: dict


def _certify_positive_inf(M: WeightSequence, P: int) -> None:
    """inf m_p > 0 on-window: the window min must not sit on a decaying tail."""
    lm = M.log_quotients(P)
    if not np.all(np.isfinite(lm)):
        raise PreconditionFailed("quotients are not finite on the window")
    argmin = int(np.argmin(lm))
    tail = lm[int(0.75 * P):]
    if argmin > 0.75 * P and tail.size > 2 and tail[-1] < tail[0]:
        raise PreconditionFailed(
            "inf m_p > 0 cannot be certified: window minimum sits on a "
            "decreasing tail")


def implication_audit(M: WeightSequence, window,
                      cfg: Optional[CheckerConfig] = None) -> list:
    """Audit dc=>sm, sm=>star (with derived constants), mg=>dc on one window."""
    cfg = cfg or CheckerConfig()
    P = _parse_window(window)
    _certify_positive_inf(M, P)
    rep = {c: check_condition(M, c, P, cfg=cfg) for c in ("dc", "sm", "mg", "star")}
    out = []

    if rep["dc"].holds:
        status = SATISFIED if rep["sm"].holds else VIOLATED
    else:
        status = VACUOUS
    out.append(ImplicationCheck("dc=>sm", status,
                                {"dc": rep["dc"].verdict, "sm": rep["sm"].verdict}))

    if rep["sm"].holds:
        C0, H = rep["sm"].constants["C0"], rep["sm"].constants["H"]
        log_H = rep["sm"].constants["log_H"]
        lm = M.log_quotients(P)
        C1 = max(float(lm[0]), 0.0) + C0 * H / math.expm1(log_H)
        e = np.arange(P + 1, dtype=float)
        viol = _resubstitute(lm, e, math.log(C1), log_H, outer_log=True)
        status = SATISFIED if viol <= 0.0 else VIOLATED
        out.append(ImplicationCheck("sm=>star", status,
                                    {"C1": C1, "H": H, "max_violation": viol}))
    else:
        out.append(ImplicationCheck("sm=>star", VACUOUS, {"sm": rep["sm"].verdict}))

    if rep["mg"].holds:
        status = SATISFIED if rep["dc"].holds else VIOLATED
    else:
        status = VACUOUS
    out.append(ImplicationCheck("mg=>dc", status,
                                {"mg": rep["mg"].verdict, "dc": rep["dc"].verdict}))
    return out


# perturbations under which a verdict is contractually stable
_STABLE = {("sm", "hat"), ("sm", "check"), ("sm", "power"),
           ("sm", "equivalent_scale"),
           ("dc", "hat"), ("dc", "equivalent_scale"),
           ("mg", "hat"), ("mg", "equivalent_scale")}


@dataclass
class StabilityAudit:
    condition: str
    kind: str
    before: PropertyReport
    after: PropertyReport
    same_verdict: bool
    contractual: bool

    @property
    def violated(self) -> bool:
        return self.contractual and not self.same_verdict


def stability_audit(M: WeightSequence, condition: str, kind: str, window,
                    r: float = None, h: float = None,
                    cfg: Optional[CheckerConfig] = None) -> StabilityAudit:
    """Same check before/after a perturbation of the sequence.

    Verdict equality is contractual for sm under any listed perturbation and
    for dc/mg under hat and equivalent_scale; constants are free to move.
    """
    cfg = cfg or CheckerConfig()
    P = _parse_window(window)
    if kind == "power":
        N = transform(M, "power", r=r if r is not None else 2.0)
    elif kind == "equivalent_scale":
        N = transform(M, "equivalent_scale", h=h if h is not None else 3.0)
    elif kind in ("hat", "check"):
        N = transform(M, kind)
    else:
        raise ConfigInvalid(f"unknown perturbation {kind!r}")
    before = check_condition(M, condition, P, cfg=cfg)
    after = check_condition(N, condition, P, cfg=cfg)
    return StabilityAudit(condition, kind, before, after,
                          before.verdict == after.verdict,
                          (condition, kind) in _STABLE)
