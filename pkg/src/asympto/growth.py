"""Associated function of a weight sequence and its growth index.

The associated function is

    h(t) = inf_{p >= 0} M_p t^p        (t > 0)

computed exactly on-window from the quotient staircase: the infimum over p is
attained where the quotients cross 1/t.  Log-convex sequences are recovered
from their associated function by the dual formula

    M_p = sup_{t > 0} h(t) / t^p,

exact at the breakpoints t = 1/m_q.

The growth index gamma(M) is estimated by bisection on beta of an
almost-increasing test for m_p / (p+1)^beta, which is exact on-window; the
bracket endpoints are cross-validated at a safe distance (half the lower end,
twice the upper end) against the tail-sum characterisation

    sum_{q >= p} m_q^(-1/beta) <= A (p+1) m_p^(-1/beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conditions import FAILS, HOLDS, PropertyReport, _exp, _parse_window
from .errors import (ConfigInvalid, Inconsistent, NotLogConvex,
                     PreconditionFailed, WindowExceeded)
from .fitting import nested_window_ends, slope_vs_log_end, suffix_logsumexp


class AssociatedFunction:
    """h(t) = inf_p M_p t^p evaluated via the quotient staircase."""

    def __init__(self, M, window: Optional[int] = None):
        self.M = M
        self.window = M.window if window is None else int(window)
        if self.window < 1:
            raise ConfigInvalid("associated function needs window >= 1")
        self._lm = M.log_quotients(self.window)
        self._logM = M.log_values(self.window + 1)
        if M.log_convex is not True and np.any(np.diff(self._lm) < 0.0):
            raise NotLogConvex(
                "staircase evaluation needs nondecreasing quotients; "
                "repair the table first")

    @property
    def t_min(self) -> float:
        """Smallest t the window resolves: below 1/m_window the infimum escapes."""
        return math.exp(-min(self._lm[-1], 700.0))

    def argmin_index(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr <= 0.0):
            raise ConfigInvalid("associated function takes t > 0")
        neg_lt = -np.log(t_arr)
        idx = np.searchsorted(self._lm, neg_lt, side="left")
        if np.any(neg_lt > self._lm[-1]):
            raise WindowExceeded(
                f"t below resolvable range (t_min = {self.t_min:.3e} on "
                f"window {self.window})")
        return idx

    def log_at(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = self.argmin_index(t_arr)
        logh = self._logM[idx] + idx * np.log(t_arr)
        out = np.minimum(logh, 0.0)  # p = 0 term caps h at M_0 = 1
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def at(self, t):
        return np.exp(self.log_at(t))

    def breakpoints(self, p_max: Optional[int] = None) -> np.ndarray:
        """Grid t_q = 1/m_q where the minimising index changes."""
        k = self.window if p_max is None else min(int(p_max), self.window)
        return np.exp(-self._lm[: k + 1])


def default_t_grid(M, p_max: int, points_per_index: int = 8) -> np.ndarray:
    """Log-uniform grid over [m_0/2, 2 m_K] joined with the exact quotients.

    The grid lives in the dual variable: M_p is recovered as
    sup_t t^p h(1/t), and the sup over p <= p_max sits at t = m_p, so the
    exact quotient points make the round trip exact.
    """
    K = min(int(p_max) + 1, M.window)
    lm = M.log_quotients(K)
    lo, hi = lm[0] - math.log(2.0), lm[-1] + math.log(2.0)
    coarse = np.linspace(lo, hi, points_per_index * (K + 1))
    return np.exp(np.sort(np.concatenate([coarse, lm])))


def recovered_log_values(M, p_max: int, t_grid=None,
                         window: Optional[int] = None) -> np.ndarray:
    """log M_p recovered as sup_t (p log t + log h(1/t)) over the grid."""
    A = AssociatedFunction(M, window)
    if t_grid is None:
        t_grid = default_t_grid(M, p_max)
    t_grid = np.asarray(t_grid, dtype=float)
    logt = np.log(t_grid)
    logh = A.log_at(1.0 / t_grid)
    ps = np.arange(p_max + 1, dtype=float)
    return np.max(logh[None, :] + np.outer(ps, logt), axis=1)


def recover_log_value(M, p: int, t_grid=None,
                      window: Optional[int] = None) -> float:
    return float(recovered_log_values(M, p, t_grid, window)[p])


# -- growth index -------------------------------------------------------------


@dataclass
class GrowthConfig:
    margin_slope: float = 0.02     # drift threshold for the almost-increasing test
    tail_slope: float = 0.05       # trend threshold for the tail-sum check
    tail_factor: int = 4
    resolution: float = 0.05
    beta_cap: float = 64.0
    min_window: int = 32
    nested_count: int = 5


def almost_increasing_margin(M, beta: float, window,
                             cfg: Optional[GrowthConfig] = None) -> PropertyReport:
    """Largest a with m_p/(p+1)^beta >= a * m_q/(q+1)^beta for all q <= p.

    The margin is exact on-window; the verdict watches its drift across nested
    windows (a margin sliding to zero means the test fails for every a > 0).
    """
    cfg = cfg or GrowthConfig()
    P = _parse_window(window)
    lm = M.log_quotients(P)
    d = lm - beta * np.log(np.arange(1, P + 2, dtype=float))
    slack = d - np.maximum.accumulate(d)          # <= 0
    ends = nested_window_ends(P, cfg.nested_count)
    nested = [(end, float(slack[: end + 1].min())) for end in ends]
    drift = slope_vs_log_end([n[0] for n in nested], [-n[1] for n in nested])
    log_margin = float(slack.min())
    verdict = HOLDS if drift <= cfg.margin_slope else FAILS
    return PropertyReport(f"almost-increasing[beta={beta:g}]", verdict, (0, P),
                          {"a": math.exp(log_margin), "log_a": log_margin},
                          drift, nested, [], 0.0)


def gamma_beta_check(M, beta: float, window,
                     cfg: Optional[GrowthConfig] = None,
                     tail_horizon: Optional[int] = None) -> PropertyReport:
    """Tail-sum form of the index test at one beta.

    Fits the minimal A in  sum_{q>=p} m_q^(-1/beta) <= A (p+1) m_p^(-1/beta)
    and judges by the trend of log A across nested windows.  Truncation shifts
    are recorded as warnings; near the critical beta they are unavoidable.
    """
    cfg = cfg or GrowthConfig()
    P = _parse_window(window)
    if beta <= 0:
        raise ConfigInvalid("beta must be positive")
    horizon = tail_horizon if tail_horizon is not None else cfg.tail_factor * P
    warnings = []
    if horizon > M.window:
        horizon = M.window
        warnings.append(f"tail horizon clamped to family window {M.window}")
    lm = M.log_quotients(horizon)
    log_terms = -lm / beta
    idx_log = np.log(np.arange(1, horizon + 2, dtype=float))

    def fitted(end, hor):
        tails = suffix_logsumexp(log_terms[: hor + 1])
        vals = tails[: end + 1] - idx_log[: end + 1] + lm[: end + 1] / beta
        return float(np.max(vals))

    ends = nested_window_ends(P, cfg.nested_count)
    fits = [(end, fitted(end, min(cfg.tail_factor * end, horizon)))
            for end in ends]
    slope = slope_vs_log_end([f[0] for f in fits], [f[1] for f in fits])
    verdict = HOLDS if slope <= cfg.tail_slope else FAILS

    rho_log = float(log_terms[horizon] - log_terms[horizon - 1])
    slope_exp = -rho_log / math.log((horizon + 1) / horizon)
    if rho_log >= 0.0 or slope_exp <= 1.0:
        warnings.append("tail terms not decaying at the horizon")
    logA = fitted(P, horizon)
    logA += 1e-13 * max(1.0, abs(logA))
    return PropertyReport(f"gamma-tail[beta={beta:g}]", verdict, (0, P),
                          {"A": _exp(logA), "log_A": logA},
                          slope, fits, warnings, 0.0)


@dataclass
class GammaEstimate:
    lower: float
    upper: float
    resolution: float
    window: tuple
    probes: list = field(default_factory=list)
    validations: list = field(default_factory=list)
    method: str = "almost-increasing bisection, tail-sum cross-check"

    @property
    def estimate(self) -> float:
        if math.isinf(self.upper):
            return math.inf
        return 0.5 * (self.lower + self.upper)


def gamma_estimate(M, window, resolution: Optional[float] = None,
                   beta_cap: Optional[float] = None, cross_validate: bool = True,
                   cfg: Optional[GrowthConfig] = None) -> GammaEstimate:
    """Bracket the growth index by bisection on the almost-increasing test."""
    cfg = cfg or GrowthConfig()
    res = resolution if resolution is not None else cfg.resolution
    cap = beta_cap if beta_cap is not None else cfg.beta_cap
    P = _parse_window(window)
    if P > M.window:
        P = M.window
    if P < cfg.min_window:
        raise PreconditionFailed(
            f"window {P} too short for growth-index estimation "
            f"(need >= {cfg.min_window})")

    probes = []

    def holds(beta: float) -> bool:
        rep = almost_increasing_margin(M, beta, P, cfg)
        probes.append((beta, rep.verdict))
        return rep.holds

    if holds(1.0):
        lo, hi = 1.0, 2.0
        while hi <= cap and holds(hi):
            lo, hi = hi, 2.0 * hi
        if hi > cap:
            est = GammaEstimate(lo, math.inf, res, (0, P), probes)
            if cross_validate:
                _validate(M, est, lo / 2.0, HOLDS, P, cfg)
            return est
    else:
        lo, hi = 0.5, 1.0
        while lo >= 1.0 / cap and not holds(lo):
            lo, hi = lo / 2.0, lo
        if lo < 1.0 / cap:
            est = GammaEstimate(0.0, hi, res, (0, P), probes)
            if cross_validate:
                _validate(M, est, 2.0 * hi, FAILS, P, cfg)
            return est

    while hi - lo > res:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid

    est = GammaEstimate(lo, hi, res, (0, P), probes)
    if cross_validate:
        _validate(M, est, lo / 2.0, HOLDS, P, cfg)
        _validate(M, est, 2.0 * hi, FAILS, P, cfg)
    return est


def _validate(M, est: GammaEstimate, beta: float, expected: str, P: int,
              cfg: GrowthConfig) -> None:
    rep = gamma_beta_check(M, beta, P, cfg)
    est.validations.append((beta, expected, rep.verdict))
    if rep.verdict != expected:
        raise Inconsistent(
            f"growth-index cross-check at beta={beta:g}: tail-sum test says "
            f"{rep.verdict}, bracket [{est.lower:g}, {est.upper:g}] implies "
            f"{expected}")
