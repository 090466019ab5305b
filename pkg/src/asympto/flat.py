"""Flat functions on sectors, their kernels, bound certificates, and moments.

A flat function vanishes at the origin faster than every power; the built-in
family is the stretched exponential G(z) = exp(-z^{-1/alpha}) on a sector
bisected by the positive axis.  Flatness is certified *quantitatively*
against a weight sequence through its associated function: a lower bound
K1 * h(K2 x) <= G(x) on the positive axis and an upper bound
|G(z)| <= K3 * h(K4 |z|) on a fan of rays.  Both fits search the scale
constants on a log grid and call failure from the drift of the fitted
constant as the sample window extends toward the origin, the same trend test
used for the sequence conditions.

The kernel e(z) = G(1/z) turns decay at the origin into decay at infinity;
its moment sequence mu(p) = integral of t^p e(t) dt is computed by
log-substituted trapezoid quadrature and feeds the extension and transform
modules.  `moment_equiv_fit` checks that the moments are squeezed between
geometric multiples of the weight sequence (index-shifted or not), which is
what makes a kernel usable as a summability weight for that sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (ConfigInvalid, MomentsMissing, OutsideSector,
                     PreconditionFailed, QuadratureNotConverged)
from .fitting import DIVERGENCE_SLOPE, nested_window_ends, slope_vs_log_end
from .growth import AssociatedFunction
from .quadrature import log_integral_decaying, map_maybe_parallel
from .sequences import SectorSpec

# constants fitted beyond this magnitude certify nothing
_ABSURD_LOG = 1.0e4

# cap on the associated-function window used by the bound fits; failures
# only become visible when h is resolvable well below the scale grid
_VERIFY_WINDOW = 100000


class FlatFunction:
    """Sectorial flat function: built-in stretched-exponential or user-supplied.

    The evaluator convention is the flat side G (small near the origin); the
    kernel side e(z) = G(1/z) is derived.  User evaluators must be
    vectorized over numpy arrays, positive on the positive axis, and
    conjugate-symmetric if the symmetry invariants are to hold.
    """

    def __init__(self, kind: str, sector: SectorSpec, alpha=None,
                 evaluator: Optional[Callable] = None, label: str = ""):
        self.kind = kind
        self.sector = sector
        self.alpha = alpha
        self._eval = evaluator
        self.label = label or kind

    @classmethod
    def gevrey_exp(cls, alpha: float, sector: Optional[SectorSpec] = None):
        """G(z) = exp(-z^{-1/alpha}), flat of index alpha at the origin."""
        if alpha <= 0:
            raise ConfigInvalid("gevrey-exp index must be positive")
        if sector is None:
            sector = SectorSpec(direction=0.0, opening=float(alpha))
        return cls("gevrey-exp", sector, alpha=float(alpha),
                   label=f"gevrey-exp({alpha:g})")

    @classmethod
    def user_supplied(cls, evaluator: Callable, sector: SectorSpec,
                      label: str = "user"):
        return cls("user", sector, evaluator=evaluator, label=label)

    # -- evaluation ---------------------------------------------------------

    def _check_arg(self, z: complex):
        if z == 0:
            raise OutsideSector("flat functions are evaluated away from 0")
        if not self.sector.contains_arg(math.atan2(z.imag, z.real)):
            raise OutsideSector(
                f"arg {math.atan2(z.imag, z.real):+.4f} outside sector of "
                f"opening {self.sector.opening:g}*pi")

    def flat_eval(self, z: complex) -> complex:
        """G(z) for z in the sector."""
        z = complex(z)
        self._check_arg(z)
        if self.kind == "gevrey-exp":
            return complex(np.exp(-(z + 0j) ** (-1.0 / self.alpha)))
        return complex(self._eval(z))

    def kernel_eval(self, z: complex) -> complex:
        """e(z) = G(1/z); the sector constraint is on the argument only."""
        z = complex(z)
        if z == 0:
            raise OutsideSector("kernel argument must be nonzero")
        if not self.sector.contains_arg(-math.atan2(z.imag, z.real)):
            raise OutsideSector("kernel argument outside sector")
        if self.kind == "gevrey-exp":
            return complex(np.exp(-(z + 0j) ** (1.0 / self.alpha)))
        return complex(self._eval(1.0 / z))

    def log_flat_abs(self, z):
        """log |G(z)|, vectorized; the caller keeps z inside the sector."""
        z = np.asarray(z)
        if self.kind == "gevrey-exp":
            r = np.abs(z).astype(float)
            th = np.angle(z)
            with np.errstate(divide="ignore", over="ignore"):
                out = -np.power(r, -1.0 / self.alpha) * np.cos(th / self.alpha)
            return np.where(r == 0.0, -np.inf, out)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.asarray(self._eval(z), dtype=complex)))

    def log_kernel_on_axis(self, s):
        """log e(t) at t = exp(s), vectorized over the log variable."""
        s = np.asarray(s, dtype=float)
        if self.kind == "gevrey-exp":
            return -np.exp(np.minimum(s / self.alpha, 709.0))
        return self.log_flat_abs(np.exp(-np.clip(s, -700.0, 700.0)))

    def _moment_hint(self, p: int) -> float:
        """Rough log-location of the peak of t^p e(t) dt/t substitution."""
        if self.kind == "gevrey-exp":
            return self.alpha * math.log(self.alpha * (p + 1))
        s = np.linspace(-60.0, 120.0, 361)
        vals = (p + 1.0) * s + self.log_kernel_on_axis(s)
        return float(s[int(np.argmax(vals))])


@dataclass
class FlatnessCertificate:
    """Two-sided bound constants against an associated function.

    verdict is "certified" when both fits are stable under window extension
    toward the origin; "fails-lower"/"fails-upper" name the diverging side.
    residual is the worst log-space violation of the final constants on the
    sample grids (certified instances keep it at rounding scale).
    """

    verdict: str
    K1: float
    K2: float
    K3: float
    K4: float
    residual: float
    drifts: dict
    window: int
    fan_args: np.ndarray = field(repr=False)
    lower_x: np.ndarray = field(repr=False)
    upper_x: np.ndarray = field(repr=False)

    @property
    def holds(self) -> bool:
        return self.verdict == "certified"

    def __bool__(self) -> bool:
        return self.holds


def _log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def _origin_drift(x: np.ndarray, worst: np.ndarray) -> float:
    """Trend of the fitted constant as the window extends toward x -> 0.

    `worst` is the per-point quantity whose running extreme over {x >= end}
    is the fitted log constant (already signed so larger = worse).  Returns
    the slope of that extreme against log(1/end) over up to four nested ends.
    """
    span = x[-1] / x[0]
    if span < 1.0e2:
        return 0.0
    ends = np.geomspace(x[0], min(x[0] * 1.0e3, x[-1] / 10.0), 4)
    vals = [float(np.max(worst[x >= e])) for e in ends]
    inv = [1.0 / e for e in ends]
    order = np.argsort(inv)
    return slope_vs_log_end([inv[i] for i in order], [vals[i] for i in order])


def verify_flatness(F: FlatFunction, M, window: Optional[int] = None,
                    k_points: int = 61, k_range=(1e-3, 1e3),
                    x_floor: float = 1e-6, x_ceil: float = 1e3,
                    x_per_decade: int = 25, fan_rays: int = 9,
                    drift_slope: float = DIVERGENCE_SLOPE) -> FlatnessCertificate:
    """Fit the two-sided bounds of G against the associated function of M.

    Scale constants K2 (lower) and K4 (upper) are searched on a log grid;
    for each candidate the companion constant is the worst slack over an
    x-grid clipped to where the associated function is resolvable.  Among
    candidates within one nat of the best fit, the largest K2 and smallest
    K4 are kept (the strongest claim the data supports).  A side fails when
    the fitted constant drifts as the grid extends toward the origin, or
    when no candidate closes the bound with a sane constant.
    """
    win = min(M.window, _VERIFY_WINDOW) if window is None else int(window)
    A = AssociatedFunction(M, win)
    t_floor = A.t_min * (1.0 + 1e-9)
    ks = np.geomspace(k_range[0], k_range[1], k_points)
    args = (np.linspace(-1.0, 1.0, fan_rays)
            * F.sector.half_angle * (1.0 - 1e-9))

    lower = []  # (fitted log K1, K2, x, slack)
    upper = []  # (fitted log K3, K4, x, deficit per x)
    for K in ks:
        lo = max(x_floor, t_floor / K)
        if lo * 10.0 >= x_ceil:
            continue
        x = _log_grid(lo, x_ceil, x_per_decade)
        logh = A.log_at(K * x)
        slack = F.log_flat_abs(x) - logh
        lower.append((float(slack.min()), float(K), x, slack))
        z = x[None, :] * np.exp(1j * args)[:, None]
        deficit = (F.log_flat_abs(z) - logh[None, :]).max(axis=0)
        upper.append((float(deficit.max()), float(K), x, deficit))
    if not lower:
        raise PreconditionFailed(
            "sequence window resolves no usable scale range for the bounds")

    best_lo = max(f for f, *_ in lower)
    cand = [c for c in lower if c[0] >= best_lo - 1.0]
    fit_lo, K2, x_lo, slack = max(cand, key=lambda c: c[1])

    best_up = min(f for f, *_ in upper)
    cand = [c for c in upper if c[0] <= best_up + 1.0]
    fit_up, K4, x_up, deficit = min(cand, key=lambda c: c[1])

    drift_lower = _origin_drift(x_lo, -slack)
    drift_upper = _origin_drift(x_up, deficit)

    verdict = "certified"
    if drift_lower > drift_slope or fit_lo < -_ABSURD_LOG:
        verdict = "fails-lower"
    elif drift_upper > drift_slope or fit_up > _ABSURD_LOG:
        verdict = "fails-upper"

    nudge = 1e-12
    log_K1 = fit_lo - nudge * max(1.0, abs(fit_lo))
    log_K3 = fit_up + nudge * max(1.0, abs(fit_up))
    residual = max(0.0,
                   float(np.max(log_K1 - slack)),
                   float(np.max(deficit - log_K3)))
    # a failing side can carry an absurd fitted constant; saturate rather
    # than overflow so the certificate still reports its verdict
    return FlatnessCertificate(
        verdict=verdict, K1=math.exp(min(log_K1, 709.0)), K2=K2,
        K3=math.exp(log_K3) if log_K3 < 709.0 else math.inf, K4=K4,
        residual=residual,
        drifts={"lower": drift_lower, "upper": drift_upper},
        window=win, fan_args=args, lower_x=x_lo, upper_x=x_up)


@dataclass
class MomentSequence:
    """Moments mu(p) of a kernel on the positive axis, in log form."""

    log_mu: np.ndarray
    rel_err: np.ndarray
    kernel: str
    target: float

    @property
    def p_max(self) -> int:
        return len(self.log_mu) - 1

    def _check(self, p: int):
        if not 0 <= p <= self.p_max:
            raise MomentsMissing(
                f"moment {p} not computed (have 0..{self.p_max})")

    def log_moment(self, p: int) -> float:
        self._check(p)
        return float(self.log_mu[p])

    def moment(self, p: int) -> float:
        return math.exp(self.log_moment(p))

    def log_weight(self, p: int) -> float:
        """Termwise transform weight: 1 at p = 0, then moments shifted down."""
        if p == 0:
            return 0.0
        return self.log_moment(p - 1)

    def convexity_violation(self) -> float:
        """Worst log-convexity defect; moments of a measure keep this ~0."""
        lm = self.log_mu
        if len(lm) < 3:
            return 0.0
        return max(0.0, float(np.max(2.0 * lm[1:-1] - lm[:-2] - lm[2:])))


def moments(F: FlatFunction, p_max: int, rtol: float = 1e-13,
            target: float = 1e-8, drop_decades: float = 60.0,
            threads: int = 1) -> MomentSequence:
    """mu(p) = integral of t^p e(t) dt for p = 0..p_max, e the kernel of F.

    Each moment is an independent log-substituted trapezoid integral; the
    per-p error estimate must clear `target` or the whole call raises.
    """
    if p_max < 0:
        raise ConfigInvalid("p_max must be >= 0")

    def one(p):
        def log_f(s):
            return (p + 1.0) * s + F.log_kernel_on_axis(s)
        hint = F._moment_hint(p)
        # the log integrand is evaluated near a peak of magnitude |log f|
        # with absolute rounding noise ~ |log f| * eps; a tolerance under
        # that floor can never be met by refinement (bites for p >~ 100)
        floor = 64.0 * np.finfo(float).eps * max(1.0, abs(log_f(hint)))
        r = log_integral_decaying(log_f, hint=hint, rtol=max(rtol, floor),
                                  drop_decades=drop_decades)
        if r.rel_err > target:
            raise QuadratureNotConverged(
                f"moment {p}: estimated error {r.rel_err:.2e} above "
                f"target {target:.1e}")
        return r

    results = map_maybe_parallel(one, range(p_max + 1), threads)
    return MomentSequence(
        log_mu=np.array([r.log_value for r in results]),
        rel_err=np.array([r.rel_err for r in results]),
        kernel=F.label, target=target)


@dataclass
class MomentEquivalenceFit:
    """Geometric squeeze h1^{p+1} M_* <= mu(p) <= h2^{p+1} M_* on a window.

    mode "shifted" compares against the index-shifted sequence M_{p+1}
    (the kernel-for-extension case); "unshifted" against M_p.  A side that
    keeps drifting as the window grows makes the verdict "not-equivalent".
    """

    mode: str
    window: int
    h1: float
    h2: float
    log_h1: float
    log_h2: float
    verdict: str
    drifts: dict

    @property
    def holds(self) -> bool:
        return self.verdict == "fits"

    def __bool__(self) -> bool:
        return self.holds


def moment_equiv_fit(mu: MomentSequence, M, mode: str = "shifted",
                     window: Optional[int] = None) -> MomentEquivalenceFit:
    """Fit the per-index geometric gap between moments and weight sequence."""
    if mode not in ("shifted", "unshifted"):
        raise ConfigInvalid("mode must be 'shifted' or 'unshifted'")
    P = mu.p_max if window is None else int(window)
    if P > mu.p_max:
        raise MomentsMissing(f"fit window {P} beyond computed moments {mu.p_max}")
    if mode == "shifted":
        ref = M.log_values(P + 1)[1:]
    else:
        ref = M.log_values(P)
    d = (mu.log_mu[:P + 1] - ref) / (np.arange(P + 1) + 1.0)

    ends = nested_window_ends(P)
    lo_fit = [float(np.min(d[:e + 1])) for e in ends]
    hi_fit = [float(np.max(d[:e + 1])) for e in ends]
    drift_lo = slope_vs_log_end(ends, [-v for v in lo_fit])
    drift_hi = slope_vs_log_end(ends, hi_fit)
    verdict = "fits"
    if drift_lo > DIVERGENCE_SLOPE or drift_hi > DIVERGENCE_SLOPE:
        verdict = "not-equivalent"

    nudge = 1e-12
    log_h1 = lo_fit[-1] - nudge * max(1.0, abs(lo_fit[-1]))
    log_h2 = hi_fit[-1] + nudge * max(1.0, abs(hi_fit[-1]))
    return MomentEquivalenceFit(
        mode=mode, window=P, h1=math.exp(log_h1), h2=math.exp(log_h2),
        log_h1=log_h1, log_h2=log_h2, verdict=verdict,
        drifts={"lower": drift_lo, "upper": drift_hi})
