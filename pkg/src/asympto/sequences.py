"""Weight sequences in log space, formal power series, sectors.

A weight sequence M = (M_p) with M_0 = 1 is represented by its quotient
sequence m_p = M_{p+1}/M_p, stored as natural logs.  Everything downstream
(growth conditions, associated function, moment comparisons) is phrased in
terms of log m_p and log M_p = sum_{k<p} log m_k, so magnitudes that would
overflow any float format stay as ordinary doubles here.

Built-in families and their safe index windows:

    gevrey(alpha)            M_p = p!^alpha                 window 1e5
    gevrey_log(alpha, beta)  M_p = p!^alpha prod log^beta   window 1e5
    q_gevrey(q, alpha)       M_p = q^(p^alpha)              window 2000
    power_sigma(tau, sigma)  M_p = p^(tau p^sigma)          window 2000
    q_pp(q)                  M_p = q^(p^p), M_0 = 1         window 60

Windows are additionally clamped so log M_p stays below ~1e300; asking past
the window raises WindowExceeded rather than returning junk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ConfigInvalid, WindowExceeded
from .fitting import nested_window_ends, slope_vs_log_end

_LOG_CAP = 1e300          # quotient logs beyond this are useless in doubles
_GROW_CHUNK = 4096

_FAMILY_WINDOW = {
    "gevrey": 100_000,
    "gevreylog": 100_000,
    "qgevrey": 2000,
    "powsigma": 2000,
    "qpp": 60,
}


def _safe_window(fn: Callable[[np.ndarray], np.ndarray], cap: int) -> int:
    """Largest index <= cap where the quotient log is finite and below cap."""
    with np.errstate(over="ignore", invalid="ignore"):
        v = fn(np.array([float(cap)]))[0]
    if np.isfinite(v) and abs(v) < _LOG_CAP:
        return cap
    lo, hi = 0, cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        with np.errstate(over="ignore", invalid="ignore"):
            v = fn(np.array([float(mid)]))[0]
        if np.isfinite(v) and abs(v) < _LOG_CAP:
            lo = mid
        else:
            hi = mid
    return lo


class WeightSequence:
    """Log-space weight sequence defined by a vectorized quotient function.

    `log_m0` is log M_0; it is 0 for every built-in family and only becomes
    nonzero for raw shifted sequences, which intentionally keep M_0 = M_1 of
    their source.
    """

    def __init__(
        self,
        quotient_fn: Callable[[np.ndarray], np.ndarray],
        window: int,
        label: str,
        family: str = "derived",
        params: Optional[dict] = None,
        log_convex: Optional[bool] = None,
        log_m0: float = 0.0,
        head_repairs: int = 0,
    ):
        if window < 1:
            raise ConfigInvalid(f"window must be >= 1, got {window}")
        self._fn = quotient_fn
        self.window = int(window)
        self.label = label
        self.family = family
        self.params = dict(params or {})
        self.log_convex = log_convex
        self.log_m0 = float(log_m0)
        self.head_repairs = int(head_repairs)
        self._logm = np.empty(0)
        self._logM = np.array([self.log_m0])

    # -- construction -----------------------------------------------------

    @classmethod
    def gevrey(cls, alpha: float) -> "WeightSequence":
        """M_p = p!^alpha."""
        if alpha <= 0:
            raise ConfigInvalid("gevrey needs alpha > 0")
        fn = lambda p: alpha * np.log(p + 1.0)
        return cls(fn, _safe_window(fn, _FAMILY_WINDOW["gevrey"]),
                   f"gevrey({alpha:g})", "gevrey", {"alpha": alpha},
                   log_convex=True)

    @classmethod
    def gevrey_log(cls, alpha: float, beta: float) -> "WeightSequence":
        """M_p = p!^alpha * prod_{j<=p} log^beta(e+j), head-repaired to be lc."""
        if alpha <= 0:
            raise ConfigInvalid("gevrey_log needs alpha > 0")
        raw = lambda p: alpha * np.log(p + 1.0) + beta * np.log(np.log(math.e + p + 1.0))
        window = _safe_window(raw, _FAMILY_WINDOW["gevreylog"])
        # running max across the whole window: cheap, and makes the cache
        # independent of the order in which prefixes are requested
        vals = raw(np.arange(window + 1, dtype=float))
        repaired = np.maximum.accumulate(vals)
        repairs = int(np.count_nonzero(repaired > vals))
        seq = cls(lambda p: repaired[np.asarray(p, dtype=int)], window,
                  f"gevrey_log({alpha:g},{beta:g})", "gevreylog",
                  {"alpha": alpha, "beta": beta},
                  log_convex=True, head_repairs=repairs)
        return seq

    @classmethod
    def q_gevrey(cls, q: float, alpha: float) -> "WeightSequence":
        """M_p = q^(p^alpha)."""
        if q <= 1 or alpha <= 0:
            raise ConfigInvalid("q_gevrey needs q > 1 and alpha > 0")
        logq = math.log(q)
        fn = lambda p: ((p + 1.0) ** alpha - p ** alpha) * logq
        return cls(fn, _safe_window(fn, _FAMILY_WINDOW["qgevrey"]),
                   f"q_gevrey({q:g},{alpha:g})", "qgevrey",
                   {"q": q, "alpha": alpha}, log_convex=(alpha >= 1))

    @classmethod
    def power_sigma(cls, tau: float, sigma: float) -> "WeightSequence":
        """M_p = p^(tau p^sigma) with the 0^0 head equal to 1."""
        if tau <= 0 or sigma <= 1:
            raise ConfigInvalid("power_sigma needs tau > 0 and sigma > 1")

        def fn(p):
            p = np.asarray(p, dtype=float)
            nxt = tau * (p + 1.0) ** sigma * np.log(p + 1.0)
            cur = np.where(p > 0, tau * p ** sigma * np.log(np.maximum(p, 1.0)), 0.0)
            return nxt - cur

        return cls(fn, _safe_window(fn, _FAMILY_WINDOW["powsigma"]),
                   f"power_sigma({tau:g},{sigma:g})", "powsigma",
                   {"tau": tau, "sigma": sigma}, log_convex=True)

    @classmethod
    def q_pp(cls, q: float) -> "WeightSequence":
        """M_p = q^(p^p) with M_0 = 1 (so m_0 = q)."""
        if q <= 1:
            raise ConfigInvalid("q_pp needs q > 1")
        logq = math.log(q)

        def fn(p):
            p = np.asarray(p, dtype=float)
            nxt = np.exp((p + 1.0) * np.log(p + 1.0))
            cur = np.where(p > 0, np.exp(p * np.log(np.maximum(p, 1.0))), 0.0)
            return (nxt - cur) * logq

        return cls(fn, _safe_window(fn, _FAMILY_WINDOW["qpp"]),
                   f"q_pp({q:g})", "qpp", {"q": q}, log_convex=True)

    @classmethod
    def from_table(cls, log_m: Sequence[float], label: str = "table",
                   log_m0: float = 0.0,
                   log_convex: Optional[bool] = None) -> "WeightSequence":
        """Explicit quotient table; window is the last tabulated index."""
        arr = np.asarray(log_m, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigInvalid("table needs a nonempty 1-d list of log m_p")
        if not np.all(np.isfinite(arr)):
            raise ConfigInvalid("table quotients must be finite")
        return cls(lambda p: arr[np.asarray(p, dtype=int)], arr.size - 1,
                   label, "table", {"n": int(arr.size)},
                   log_convex=log_convex, log_m0=log_m0)

    # -- evaluation --------------------------------------------------------

    def _ensure(self, q_max: int) -> None:
        if q_max > self.window:
            raise WindowExceeded(
                f"{self.label}: quotient index {q_max} past safe window {self.window}")
        have = self._logm.size
        if q_max < have:
            return
        upto = min(self.window, max(q_max, have + _GROW_CHUNK))
        fresh = np.asarray(self._fn(np.arange(have, upto + 1, dtype=float)), dtype=float)
        self._logm = np.concatenate([self._logm, fresh])
        self._logM = np.concatenate([[self.log_m0], self.log_m0 + np.cumsum(self._logm)])

    def log_quotients(self, p_max: int) -> np.ndarray:
        """log m_p for p = 0..p_max (inclusive)."""
        self._ensure(p_max)
        return self._logm[: p_max + 1]

    def log_m(self, p):
        """log m_p, scalar or array."""
        arr = np.asarray(p, dtype=int)
        self._ensure(int(arr.max()))
        out = self._logm[arr]
        return float(out) if np.isscalar(p) or arr.ndim == 0 else out

    def log_value(self, p):
        """log M_p = log M_0 + sum_{k<p} log m_k, scalar or array."""
        arr = np.asarray(p, dtype=int)
        top = int(arr.max())
        if top > 0:
            self._ensure(top - 1)
        out = self._logM[arr]
        return float(out) if np.isscalar(p) or arr.ndim == 0 else out

    def log_values(self, p_max: int) -> np.ndarray:
        """log M_p for p = 0..p_max (inclusive)."""
        if p_max > 0:
            self._ensure(p_max - 1)
        return self._logM[: p_max + 1]

    def quotients_nondecreasing(self, p_max: int) -> bool:
        lm = self.log_quotients(p_max)
        return bool(np.all(np.diff(lm) >= -1e-12 * np.maximum(1.0, np.abs(lm[:-1]))))

    def __repr__(self):
        return f"WeightSequence({self.label}, window={self.window})"


# -- transforms -------------------------------------------------------------

_TRANSFORMS = ("hat", "check", "shift_plus_one", "power", "gamma_mul", "gamma_div")


def transform(M: WeightSequence, kind: str, *, r: float = None,
              alpha: float = None, h: float = None) -> WeightSequence:
    """Derived weight sequence.

    hat:            M_p -> p! M_p
    check:          M_p -> M_p / p!          (log-convexity may be lost)
    shift_plus_one: M_p -> M_{p+1}, returned raw (index 0 keeps value M_1)
    power:          M_p -> M_p^r, r > 0
    gamma_mul:      M_p -> Gamma(1+alpha p) M_p
    gamma_div:      M_p -> M_p / Gamma(1+alpha p)
    equivalent_scale: M_p -> h^p M_p  (M_0 stays 1)
    """
    base = M.log_m

    if kind == "hat":
        fn = lambda p: base(np.asarray(p, dtype=int)) + np.log(np.asarray(p, dtype=float) + 1.0)
        return WeightSequence(fn, M.window, f"hat({M.label})", log_convex=M.log_convex,
                              log_m0=M.log_m0)
    if kind == "check":
        fn = lambda p: base(np.asarray(p, dtype=int)) - np.log(np.asarray(p, dtype=float) + 1.0)
        return WeightSequence(fn, M.window, f"check({M.label})", log_convex=None,
                              log_m0=M.log_m0)
    if kind == "shift_plus_one":
        fn = lambda p: base(np.asarray(p, dtype=int) + 1)
        return WeightSequence(fn, M.window - 1, f"shift({M.label})",
                              log_convex=M.log_convex,
                              log_m0=M.log_value(1))
    if kind == "power":
        if r is None or r <= 0:
            raise ConfigInvalid("power transform needs r > 0")
        fn = lambda p: r * base(np.asarray(p, dtype=int))
        return WeightSequence(fn, M.window, f"power({M.label},{r:g})",
                              log_convex=M.log_convex, log_m0=r * M.log_m0)
    if kind in ("gamma_mul", "gamma_div"):
        if alpha is None or alpha <= 0:
            raise ConfigInvalid("gamma transforms need alpha > 0")
        sign = 1.0 if kind == "gamma_mul" else -1.0

        def fn(p):
            p = np.asarray(p, dtype=float)
            step = gammaln(1.0 + alpha * (p + 1.0)) - gammaln(1.0 + alpha * p)
            return base(np.asarray(p, dtype=int)) + sign * step

        lc = M.log_convex if kind == "gamma_mul" else None
        return WeightSequence(fn, M.window, f"{kind}({M.label},{alpha:g})",
                              log_convex=lc, log_m0=M.log_m0)
    if kind == "equivalent_scale":
        if h is None or h <= 0:
            raise ConfigInvalid("equivalent_scale needs h > 0")
        logh = math.log(h)
        fn = lambda p: base(np.asarray(p, dtype=int)) + logh
        return WeightSequence(fn, M.window, f"scale({M.label},{h:g})",
                              log_convex=M.log_convex, log_m0=M.log_m0)
    raise ConfigInvalid(f"unknown transform kind {kind!r}")


def quotients(M: WeightSequence, p_max: int) -> np.ndarray:
    """log m_p for p = 0..p_max; WindowExceeded past the safe window."""
    return M.log_quotients(p_max)


# -- sectors and series ------------------------------------------------------


@dataclass(frozen=True)
class SectorSpec:
    """Sector of opening `opening`*pi bisected by `direction` (radians)."""

    direction: float = 0.0
    opening: float = 1.0
    radius: Optional[float] = None

    def __post_init__(self):
        if self.opening <= 0:
            raise ConfigInvalid("sector opening must be positive")

    @property
    def half_angle(self) -> float:
        return self.opening * math.pi / 2.0

    def contains_arg(self, theta: float, margin: float = 0.0) -> bool:
        d = math.remainder(theta - self.direction, 2.0 * math.pi)
        return abs(d) < self.half_angle - margin

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        if z == 0:
            return False
        if self.radius is not None and abs(z) > self.radius:
            return False
        return self.contains_arg(math.atan2(z.imag, z.real), margin)


@dataclass
class FormalSeries:
    """Finite block of power-series coefficients a_0..a_P.

    Coefficients live in `coeffs`; an optional exact log-magnitude/phase
    pair (`log_coeff_abs`, `coeff_phase`) carries scales beyond float range
    (coefficientwise transforms compose in log space without overflow).
    """

    coeffs: np.ndarray
    declared_h: Optional[float] = None
    declared_norm: Optional[float] = None
    label: str = "series"
    log_coeff_abs: Optional[np.ndarray] = None
    coeff_phase: Optional[np.ndarray] = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.ndim != 1:
            raise ConfigInvalid("series coefficients must be 1-d")
        if (self.log_coeff_abs is None) != (self.coeff_phase is None):
            raise ConfigInvalid("log magnitudes and phases come as a pair")
        if self.log_coeff_abs is not None:
            self.log_coeff_abs = np.asarray(self.log_coeff_abs, dtype=float)
            self.coeff_phase = np.asarray(self.coeff_phase, dtype=float)
            if self.log_coeff_abs.shape != self.coeffs.shape \
                    or self.coeff_phase.shape != self.coeffs.shape:
                raise ConfigInvalid("log form must match the coefficient block")

    @classmethod
    def from_log(cls, log_abs, phase, declared_h: Optional[float] = None,
                 declared_norm: Optional[float] = None,
                 label: str = "series") -> "FormalSeries":
        log_abs = np.asarray(log_abs, dtype=float)
        phase = np.asarray(phase, dtype=float)
        # the dense array is a float shadow of the log form and may saturate
        # to inf (nan imaginary part after the phase multiply); log-domain
        # consumers read log_abs() instead
        with np.errstate(over="ignore", invalid="ignore"):
            coeffs = np.exp(log_abs) * np.exp(1j * phase)
        return cls(coeffs, declared_h=declared_h, declared_norm=declared_norm,
                   label=label, log_coeff_abs=log_abs, coeff_phase=phase)

    def __len__(self):
        return self.coeffs.size

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def log_abs(self) -> np.ndarray:
        if self.log_coeff_abs is not None:
            return self.log_coeff_abs
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.coeffs))

    def phases(self) -> np.ndarray:
        if self.coeff_phase is not None:
            return self.coeff_phase
        return np.angle(self.coeffs)

    def partial_sum(self, z: complex, p: int) -> complex:
        """sum_{n<p} a_n z^n (empty sum for p = 0)."""
        if p <= 0:
            return 0.0 + 0.0j
        c = self.coeffs[:p][::-1]
        acc = 0.0 + 0.0j
        for a in c:
            acc = acc * z + a
        return acc

    def type_violation(self, M: WeightSequence, h: float, norm: float) -> float:
        """Max of log|a_p| - (log norm + p log h + log M_p); <= 0 means in class."""
        la = self.log_abs()
        ps = np.arange(self.coeffs.size, dtype=float)
        bound = math.log(norm) + ps * math.log(h) + M.log_values(self.order)
        finite = np.isfinite(la)
        if not finite.any():
            return -math.inf
        return float(np.max(la[finite] - bound[finite]))


# -- comparisons -------------------------------------------------------------


@dataclass
class EquivalenceFit:
    """Bracket h1^(p+1) L_p <= M_p <= h2^(p+1) L_p fitted on a window."""

    lower_h: float
    upper_h: float
    window: tuple
    residual: float
    slope: float
    equivalent: bool

    def __bool__(self):
        return self.equivalent


@dataclass
class ComparabilityFit:
    """Quotient bracket c^-1 l_p <= m_p <= c l_p fitted on a window."""

    c: float
    window: tuple
    residual: float
    slope: float
    comparable: bool

    def __bool__(self):
        return self.comparable


_TREND_SLOPE = 0.05
_NUDGE = 1e-13


def equivalence_fit(M: WeightSequence, L: WeightSequence, window: int) -> EquivalenceFit:
    """Minimal-width [h1, h2] with h1^(p+1) L_p <= M_p <= h2^(p+1) L_p on [0, window].

    The bracket is declared unstable (equivalent=False) when its width keeps
    growing with the window end: slope of width against log(end) > 0.05 over
    nested sub-windows.
    """
    ps = np.arange(window + 1, dtype=float)
    d = (M.log_values(window) - L.log_values(window)) / (ps + 1.0)
    ends = nested_window_ends(window)
    widths = [float(d[: e + 1].max() - d[: e + 1].min()) for e in ends]
    slope = slope_vs_log_end(ends, widths)
    lo = float(d.min()) - _NUDGE * max(1.0, abs(float(d.min())))
    hi = float(d.max()) + _NUDGE * max(1.0, abs(float(d.max())))
    resid = float(np.max(np.maximum(lo * (ps + 1.0) - (d * (ps + 1.0)),
                                    (d * (ps + 1.0)) - hi * (ps + 1.0)).clip(min=0)))
    return EquivalenceFit(math.exp(lo), math.exp(hi), (0, window), resid,
                          slope, bool(slope <= _TREND_SLOPE))


def quotient_comparability_fit(M: WeightSequence, L: WeightSequence,
                               window: int) -> ComparabilityFit:
    """Minimal c with |log m_p - log l_p| <= log c on [0, window], with trend test."""
    diff = np.abs(M.log_quotients(window) - L.log_quotients(window))
    ends = nested_window_ends(window)
    peaks = [float(diff[: e + 1].max()) for e in ends]
    slope = slope_vs_log_end(ends, peaks)
    logc = float(diff.max()) * (1.0 + _NUDGE) + _NUDGE
    resid = float(np.max((diff - logc).clip(min=0)))
    return ComparabilityFit(math.exp(logc), (0, window), resid, slope,
                            bool(slope <= _TREND_SLOPE))
