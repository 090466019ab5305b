"""Shared fitting helpers: nested-window trend tests and minimal-constant fits.

Finite-window verdicts everywhere in this package follow one pattern: fit the
minimal constants closing an inequality on the window, refit on nested
sub-windows, and call the verdict from the growth of the fitted log-constant
against the log of the window end.  The divergence threshold is a slope of
0.05 over at least four nested windows.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

DIVERGENCE_SLOPE = 0.05
_NUDGE = 1e-13


def nested_window_ends(end: int, count: int = 5, min_end: int = 8) -> list:
    """Geometrically spaced window ends finishing at `end`."""
    if end <= min_end:
        return sorted(set([max(1, end // 2), end]))
    lo = max(min_end, end // 8)
    ends = np.unique(np.geomspace(lo, end, count).round().astype(int))
    return [int(e) for e in ends if e >= 1]


def slope_vs_log_end(ends: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of fitted constants against log(window end)."""
    if len(ends) < 2:
        return 0.0
    x = np.log(np.asarray(ends, dtype=float))
    y = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(y)):
        return math.inf
    return float(np.polyfit(x, y, 1)[0])


def minimal_h_fit(t: np.ndarray, e: np.ndarray) -> tuple:
    """Minimal (log H, log C) with t_p <= log C + e_p log H, H > 1.

    log C is pinned by the exponent-0 indices (and clamped >= 0 so the fitted
    constant is at least 1); given that, the minimal log H closing the window
    is max over e_p >= 1 of (t_p - log C)/e_p.  Both constants are nudged one
    ulp-scale upward so exact re-substitution never fails on the binding index.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    zero = e == 0
    logC = max(0.0, float(t[zero].max()) if zero.any() else 0.0)
    pos = ~zero
    if pos.any():
        logH = float(np.max((t[pos] - logC) / e[pos]))
    else:
        logH = 0.0
    logH = max(logH, 0.0)
    logH += _NUDGE * max(1.0, abs(logH)) + 1e-300
    logC += _NUDGE * max(1.0, logC)
    return logH, logC


def suffix_logsumexp(log_terms: np.ndarray) -> np.ndarray:
    """out[p] = log sum_{q>=p} exp(log_terms[q]), computed tail-first."""
    rev = np.asarray(log_terms, dtype=float)[::-1]
    return np.logaddexp.accumulate(rev)[::-1]


def argmax_in_last_quarter(values: np.ndarray) -> bool:
    """True when the max sits in the last quarter of the index range."""
    values = np.asarray(values, dtype=float)
    return int(np.argmax(values)) >= int(0.75 * (values.size - 1))
