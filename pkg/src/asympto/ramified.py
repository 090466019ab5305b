"""Ramified Laplace/Borel transforms of fractional order.

For an order alpha in (0, 2) the kernel pair

    e_alpha(w) = (1/alpha) w^(1/alpha) exp(-w^(1/alpha)),
    m_alpha(lam) = Gamma(1 + alpha lam)

drives a Laplace transform along rays, (Lf)(z) = int_0^inf(tau) e_alpha(u/z)
f(u) du/u, and a Borel inverse along a three-leg contour (two radial segments
bracketing the direction tau plus a closing arc) weighted by the order-alpha
Mittag-Leffler function E_alpha.  Formal counterparts act coefficientwise:
Laplace multiplies a_p by Gamma(1 + alpha p), Borel divides, both in
log-magnitude/phase form so the factorial-like factors never overflow.

E_alpha is evaluated by three regimes glued at calibrated radii: the plain
power series inside z_ml(alpha) (the largest radius where float64 summation
still tracks a high-precision reference, measured on the worst ray), an
arbitrary-precision fallback in the bridge region, and the large-argument
form (exponential sheet term where present plus the algebraic inverse-power
series) beyond w_asym(alpha).  The contour legs of the Borel transform run
all the way to the origin because the large-argument regime keeps the
integrand bounded there.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import (ConfigInvalid, GrowthCapExceeded,
                     MittagLefflerDomainExceeded, OutsideAperture,
                     PathOutsideSector)
from .extension import ExtractedCoeffs, extract_asymptotic_coeffs, \
    geometric_ladder
from .quadrature import _bracket_peak, complex_quad, \
    complex_trapezoid_doubling
from .sequences import FormalSeries, SectorSpec

_LN10 = math.log(10.0)
_SERIES_RTOL = 1e-11          # calibration target for the float series
_ASYM_TERMS = 12              # algebraic terms kept in the large-|w| form
_ASYM_TAIL = 1e-10            # first dropped algebraic term at w_asym
_MP_DPS_CAP = 300             # precision ceiling for the bridge fallback


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ConfigInvalid("transform order must lie strictly in (0, 2)")
    return alpha


@dataclass
class AlphaKernel:
    """Order-alpha Laplace kernel e_alpha and moment function m_alpha."""

    alpha: float

    def __post_init__(self):
        self.alpha = _check_alpha(self.alpha)

    def kernel(self, w) -> complex:
        """e_alpha(w) = (1/alpha) w^(1/alpha) exp(-w^(1/alpha)).

        Decays only while |arg w| < alpha*pi/2 (the kernel's sector); other
        arguments evaluate on the principal branch and may be huge.
        """
        w = complex(w)
        if w == 0.0:
            return 0.0 + 0.0j
        x = cmath.log(w) / self.alpha
        if x.real > 690.0:
            # |w^(1/alpha)| beyond float range; inside the decay sector the
            # value has underflowed to zero long before this point
            if math.cos(x.imag) > 0.0:
                return 0.0 + 0.0j
            raise GrowthCapExceeded("kernel argument far outside its sector")
        w1a = cmath.exp(x)
        if w1a.real < -700.0:
            raise GrowthCapExceeded("kernel argument far outside its sector")
        return w1a * cmath.exp(-w1a) / self.alpha

    def log_moment(self, lam) -> np.ndarray:
        """log Gamma(1 + alpha * lam) for lam >= 0 (vectorized)."""
        return gammaln(1.0 + self.alpha * np.asarray(lam, dtype=float))

    def moment(self, lam) -> np.ndarray:
        return np.exp(self.log_moment(lam))


# -- Mittag-Leffler evaluation ------------------------------------------------


_Z_ML_CACHE: dict = {}


def _ml_series_float(alpha: float, w: complex, max_terms: int = 4000) -> complex:
    """Plain power series sum w^p / Gamma(1 + alpha p) in float64."""
    w = complex(w)
    if w == 0.0:
        return 1.0 + 0.0j
    lw = cmath.log(w)
    acc = 0.0 + 0.0j
    top = 0.0
    p = 0
    while p < max_terms:
        term = cmath.exp(p * lw - gammaln(1.0 + alpha * p))
        acc += term
        top = max(top, abs(term))
        # past the hump the terms decay superexponentially
        if abs(term) < 1e-20 * top and alpha * p > abs(w) ** (1.0 / alpha):
            return acc
        p += 1
    return acc


def _ml_series_mp(alpha: float, w: complex, dps: int) -> complex:
    import mpmath as mp

    with mp.workdps(dps):
        wm = mp.mpc(w)
        am = mp.mpf(alpha)
        acc = mp.mpc(0)
        top = mp.mpf(0)
        tol = mp.mpf(10) ** (-dps - 5)
        p = 0
        while True:
            # the gamma argument must be formed at working precision: a float
            # alpha*p carries an ulp-scale error that the cancellation in the
            # sum amplifies by exp(|w|^(1/alpha))
            term = wm ** p / mp.gamma(1 + am * p)
            acc += term
            top = max(top, abs(term))
            if abs(term) < tol * top and alpha * p > abs(wm) ** (1.0 / alpha):
                break
            p += 1
            if p > 100000:
                break
        return complex(acc)


def _mp_dps_for(alpha: float, r: float) -> int:
    # cancellation is bounded by the largest series term, ~ exp(r^(1/alpha))
    return int(27 + r ** (1.0 / alpha) / _LN10)


def _calibrate_z_ml(alpha: float) -> float:
    """Largest |w| where the float series matches mpmath on the worst ray.

    The negative real axis maximizes cancellation for alpha < 2, so the
    radius found there bounds the error on every other ray.
    """
    r_top = 0.9 * 690.0 ** alpha          # float series overflows past this
    radii = np.geomspace(1.0, min(r_top, 500.0), 30)
    good = radii[0]
    for r in radii:
        ref = _ml_series_mp(alpha, complex(-r, 0.0), _mp_dps_for(alpha, r))
        got = _ml_series_float(alpha, complex(-r, 0.0))
        if abs(got - ref) > _SERIES_RTOL * max(abs(ref), 1e-300):
            break
        good = float(r)
    return good


@dataclass
class MittagLeffler:
    """Evaluator for E_alpha(w) = sum_p w^p / Gamma(1 + alpha p).

    Plain series inside the calibrated radius `z_ml`; beyond `w_asym` the
    large-argument form (exponential sheet term for |arg w| < alpha*pi plus
    the algebraic series -sum w^-m / Gamma(1 - m alpha)); in between an
    mpmath fallback with precision scaled to the predicted cancellation.
    Order 1 short-circuits to exp.
    """

    alpha: float

    def __post_init__(self):
        self.alpha = _check_alpha(self.alpha)

    @property
    def z_ml(self) -> float:
        if self.alpha == 1.0:
            return math.inf
        if self.alpha not in _Z_ML_CACHE:
            _Z_ML_CACHE[self.alpha] = _calibrate_z_ml(self.alpha)
        return _Z_ML_CACHE[self.alpha]

    @property
    def w_asym(self) -> float:
        for mm in range(_ASYM_TERMS + 1, _ASYM_TERMS + 5):
            c = abs(float(rgamma(1.0 - mm * self.alpha)))
            if c > 0.0:
                return (c / _ASYM_TAIL) ** (1.0 / mm)
        return math.inf

    @property
    def mp_w_cap(self) -> float:
        return ((_MP_DPS_CAP - 30) * _LN10) ** self.alpha

    def _stokes_hazard(self, w: complex) -> bool:
        # Near a ray where an exponential sheet switches on or off (its
        # saddle angle psi = (arg w + 2 pi n)/alpha crossing +-pi), the
        # on/off sum misweights the sheet over a transition zone of width
        # ~ R^(-1/2) in psi, R = |w|^(1/alpha).  For alpha near 1 on the
        # negative axis two sheets coalesce there and the plain sum doubles
        # the true value.  Flag the zone so eval() can fall back to the
        # arbitrary-precision series; ignore sheets too small to matter.
        big_r = abs(w) ** (1.0 / self.alpha)
        for n in (-2, -1, 0, 1, 2):
            psi = (cmath.phase(w) + 2.0 * math.pi * n) / self.alpha
            gap = abs(psi) - math.pi
            if big_r * gap * gap < 80.0 and -big_r * math.cos(psi) < 120.0:
                return True
        return False

    def _eval_asym(self, w: complex) -> complex:
        lr = math.log(abs(w))
        acc = 0.0 + 0.0j
        for m in range(1, _ASYM_TERMS + 1):
            c = float(rgamma(1.0 - m * self.alpha))
            if c != 0.0:
                acc -= c * cmath.exp(-m * (lr + 1j * cmath.phase(w)))
        # one exponential term (1/alpha) exp(w_n^(1/alpha)) per sheet with
        # |arg w + 2 pi n| < alpha pi; orders above 1 can see several sheets
        for n in (-2, -1, 0, 1, 2):
            phi = cmath.phase(w) + 2.0 * math.pi * n
            if abs(phi) >= self.alpha * math.pi:
                continue
            x = complex(lr, phi) / self.alpha
            if x.real > 690.0:
                if math.cos(x.imag) > 0.0:
                    raise MittagLefflerDomainExceeded(
                        "E_alpha overflows float range at this argument")
                continue  # the sheet term has underflowed to zero
            lt = cmath.exp(x) - math.log(self.alpha)
            if lt.real > 700.0:
                raise MittagLefflerDomainExceeded(
                    "E_alpha overflows float range at this argument")
            acc += cmath.exp(lt)
        return acc

    def eval(self, w, escalate: bool = True) -> complex:
        w = complex(w)
        if self.alpha == 1.0:
            if w.real > 709.0:
                raise MittagLefflerDomainExceeded(
                    "E_1 overflows float range at this argument")
            return cmath.exp(w)
        r = abs(w)
        if r <= self.z_ml:
            return _ml_series_float(self.alpha, w)
        if r >= self.w_asym and not self._stokes_hazard(w):
            return self._eval_asym(w)
        if not escalate:
            raise MittagLefflerDomainExceeded(
                f"|w| = {r:.3g} is outside the series accuracy domain "
                f"(z_ml = {self.z_ml:.3g}) and escalation is disabled")
        if r > self.mp_w_cap:
            raise MittagLefflerDomainExceeded(
                f"|w| = {r:.3g} needs more than {_MP_DPS_CAP} digits")
        return _ml_series_mp(self.alpha, w, _mp_dps_for(self.alpha, r))


# -- analytic transforms ------------------------------------------------------


@dataclass
class GrowthCap:
    """Declared bound |f(t e^(i tau))| <= K exp(k t^(1/alpha)) on the ray.

    A declaration, not a measurement: the transform trusts it to place the
    quadrature window, and a violating evaluator voids the error target.
    """

    K: float
    k: float

    def __post_init__(self):
        if self.K <= 0.0 or self.k < 0.0:
            raise ConfigInvalid("growth cap needs K > 0 and k >= 0")


@dataclass
class BorelPath:
    """Three-leg Borel contour: rays at tau +- alpha(pi+eps)/2, closing arc."""

    tau: float
    radius: float
    eps: float = math.pi / 6.0

    def __post_init__(self):
        if not 0.0 < self.eps < math.pi:
            raise ConfigInvalid("path opening eps must lie in (0, pi)")
        if self.radius <= 0.0:
            raise ConfigInvalid("path radius must be positive")

    def angles(self, alpha: float) -> tuple:
        half = alpha * (math.pi + self.eps) / 2.0
        return self.tau + half, self.tau - half


def analytic_alpha_laplace(f: Callable, alpha: float, tau: float, z,
                           growth: GrowthCap, rtol: float = 1e-8) -> complex:
    """Ray transform int_0^inf(tau) e_alpha(u/z) f(u) du/u.

    Converges while the kernel decay cos((tau - arg z)/alpha)/|z|^(1/alpha)
    beats the declared growth rate k; the quadrature window is bracketed on
    that envelope and the ray is integrated in log coordinates.
    """
    alpha = _check_alpha(alpha)
    z = complex(z)
    if z == 0.0:
        raise ConfigInvalid("evaluation point must be nonzero")
    dtheta = math.remainder(cmath.phase(z) - tau, 2.0 * math.pi)
    if abs(dtheta) >= alpha * math.pi / 2.0:
        raise OutsideAperture(
            f"|arg z - tau| = {abs(dtheta):.4f} is not below alpha*pi/2 "
            f"= {alpha * math.pi / 2.0:.4f}")
    c = math.cos(dtheta / alpha)
    margin = c / abs(z) ** (1.0 / alpha) - growth.k
    if margin <= 0.0:
        admissible = (c / growth.k) ** alpha if growth.k > 0.0 else math.inf
        raise GrowthCapExceeded(
            f"kernel decay does not dominate the declared growth at |z| = "
            f"{abs(z):.6g}; admissible |z| < {admissible:.6g}")

    lnz = math.log(abs(z))
    log_z = cmath.log(z)
    ei_tau = cmath.exp(1j * tau)

    def env(s):
        s = np.asarray(s, dtype=float)
        t_pow = np.exp(np.minimum((s - lnz) / alpha, 700.0))
        u_pow = np.exp(np.minimum(s / alpha, 700.0))
        return (s - lnz) / alpha - c * t_pow + growth.k * u_pow

    hint = alpha * math.log(1.0 / margin)
    drop = max(45.0, -math.log(rtol) + 15.0)
    lo, hi, _ = _bracket_peak(env, hint=hint, drop=drop)

    def g(s):
        s = np.asarray(s, dtype=float)
        x = (s + 1j * tau - log_z) / alpha
        w1a = np.exp(x)
        kern = w1a * np.exp(-w1a) / alpha
        fv = np.array([f(cmath.exp(ss) * ei_tau) for ss in s], dtype=complex)
        return kern * fv

    res = complex_trapezoid_doubling(g, lo, hi, rtol=rtol)
    return res.value


def _leg_scale(g: Callable, pts) -> float:
    return max(abs(g(p)) for p in pts)


def analytic_alpha_borel(f: Callable, alpha: float, path: BorelPath, u,
                         sector: Optional[SectorSpec] = None,
                         rtol: float = 1e-6, escalate: bool = True) -> complex:
    """Contour transform (-1/2 pi i) int_path E_alpha(u/z) f(z) dz/z.

    The two radial legs run from the origin to the path radius at the angles
    tau +- alpha(pi+eps)/2 and the arc closes them; E_alpha's large-argument
    regime keeps the integrand bounded near the origin.  u = 0 evaluates the
    small-|u| limit along tau (the transform is continuous there and the
    limit is the source's constant term).
    """
    alpha = _check_alpha(alpha)
    ml = MittagLeffler(alpha)
    th_hi, th_lo = path.angles(alpha)
    if sector is not None:
        if not (sector.contains_arg(th_hi) and sector.contains_arg(th_lo)):
            raise PathOutsideSector(
                "path rays fall outside the source sector; shrink eps or "
                "use a wider sector (needs opening > alpha)")
        if sector.radius is not None and path.radius > sector.radius:
            raise PathOutsideSector("path radius exceeds the sector radius")
    u = complex(u)
    if u == 0.0:
        u = path.radius * 1e-7 * cmath.exp(1j * path.tau)
    # the kernel decays on both radial legs only for |arg u - tau| <
    # alpha*eps/2; on the boundary the near-origin integrand stops decaying
    # and the leg integrals diverge
    off = math.remainder(cmath.phase(u) - path.tau, 2.0 * math.pi)
    if abs(off) >= alpha * path.eps / 2.0:
        raise OutsideAperture(
            f"arg u is {off:.3g} rad off the path direction; the contour "
            f"converges for |arg u - tau| < alpha*eps/2 = "
            f"{alpha * path.eps / 2.0:.3g} (rotate the path toward arg u "
            "or widen eps)")
    w_arc = abs(u) / path.radius
    if alpha != 1.0 and w_arc > ml.z_ml:
        # the arc crosses E_alpha's growth zone where only series/mpmath
        # evaluation is sound
        if not escalate:
            raise MittagLefflerDomainExceeded(
                f"|u|/radius = {w_arc:.3g} exceeds z_ml = {ml.z_ml:.3g}; "
                "shrink |u| or grow the path radius")
        if w_arc > ml.mp_w_cap:
            raise MittagLefflerDomainExceeded(
                f"|u|/radius = {w_arc:.3g} is beyond the precision ceiling; "
                "shrink |u| or grow the path radius")
    R = path.radius

    def radial(theta: float) -> Callable:
        ei = cmath.exp(1j * theta)

        def g(t: float) -> complex:
            z = t * ei
            return ml.eval(u / z, escalate) * f(z)
        return g

    def on_arc(theta: float) -> complex:
        z = R * cmath.exp(1j * theta)
        return ml.eval(u / z, escalate) * f(z)

    # The legs separately grow like log(R/|u|) near the origin and cancel to
    # O(1), so they are integrated as one pointwise difference.  In t the
    # kernel transition sits in a spike at t ~ |u| that adaptive quadrature
    # misses for small |u|; in s = log(t/R) it is an O(1)-wide feature (and
    # the 1/t of dz/z cancels against the Jacobian).
    g_hi, g_lo = radial(th_hi), radial(th_lo)
    leg_rtol = rtol / 4.0
    s_star = math.log(max(abs(u) / R, 1e-300))
    s_lo = min(0.0, s_star) - (20.0 - math.log(leg_rtol))

    def leg_diff(s: float) -> complex:
        t = R * math.exp(s)
        return g_hi(t) - g_lo(t)

    probe_s = np.linspace(s_lo, 0.0, 24)
    probe_a = np.linspace(th_lo, th_hi, 16)
    s_leg = _leg_scale(leg_diff, probe_s)
    s_arc = _leg_scale(on_arc, probe_a)

    legs = complex_quad(leg_diff, s_lo, 0.0, rtol=leg_rtol, scale=s_leg)
    arc = complex_quad(on_arc, th_lo, th_hi, rtol=leg_rtol, scale=s_arc)
    total = legs.value - 1j * arc.value
    return (1j / (2.0 * math.pi)) * total


# -- formal transforms --------------------------------------------------------


def formal_alpha_laplace(fhat: FormalSeries, alpha: float) -> FormalSeries:
    """Coefficientwise a_p -> Gamma(1 + alpha p) a_p in log form."""
    if alpha <= 0.0:
        raise ConfigInvalid("formal transforms need alpha > 0")
    lg = gammaln(1.0 + alpha * np.arange(len(fhat), dtype=float))
    return FormalSeries.from_log(fhat.log_abs() + lg, fhat.phases(),
                                 label=f"alaplace({fhat.label})")


def formal_alpha_borel(fhat: FormalSeries, alpha: float) -> FormalSeries:
    """Coefficientwise a_p -> a_p / Gamma(1 + alpha p) in log form."""
    if alpha <= 0.0:
        raise ConfigInvalid("formal transforms need alpha > 0")
    lg = gammaln(1.0 + alpha * np.arange(len(fhat), dtype=float))
    return FormalSeries.from_log(fhat.log_abs() - lg, fhat.phases(),
                                 label=f"aborel({fhat.label})")


# -- expansion functoriality --------------------------------------------------


@dataclass
class TransformExpansionReport:
    """Extractor-vs-formal comparison for a transformed evaluator."""

    kind: str
    alpha: float
    beta: float
    p_max: int
    extracted: ExtractedCoeffs
    reference: np.ndarray
    deviations: np.ndarray
    ok: np.ndarray
    verdict: str

    @property
    def holds(self) -> bool:
        return self.verdict == "agrees"


def transform_expansion_check(f: Callable, fhat: FormalSeries, alpha: float,
                              beta: float, p_max: int = 5,
                              kind: str = "laplace", tau: float = 0.0,
                              growth: Optional[GrowthCap] = None,
                              x_max: float = 0.02, ratio: float = 0.8,
                              count: int = 16, rtol: float = 1e-11,
                              radius: float = 1.0,
                              sector: Optional[SectorSpec] = None,
                              threads: int = 1) -> TransformExpansionReport:
    """Check that the analytic transform's expansion matches the formal one.

    Samples the transform of `f` on a geometric ladder along the direction
    tau, extracts asymptotic coefficients, and compares them against the
    coefficientwise transform of the declared expansion `fhat` within the
    extractor's own error estimates.  `beta` is the declared opening of f's
    sector (the transform lives on an opening widened/narrowed by alpha);
    the ladder stays on the bisecting ray where membership is automatic.
    """
    alpha = _check_alpha(alpha)
    if kind not in ("laplace", "borel"):
        raise ConfigInvalid("kind must be 'laplace' or 'borel'")
    if p_max + 1 > len(fhat):
        raise ConfigInvalid("declared expansion is shorter than p_max")
    xs = geometric_ladder(x_max, ratio, count)
    if kind == "laplace":
        cap = growth if growth is not None else GrowthCap(
            2.0 * max(abs(f(t * cmath.exp(1j * tau)))
                      for t in np.geomspace(1e-4, 30.0, 24)) + 1e-30, 0.0)
        ref_series = formal_alpha_laplace(fhat, alpha)
        vals = np.array([analytic_alpha_laplace(
            f, alpha, tau, x * cmath.exp(1j * tau), cap, rtol=rtol)
            for x in xs])
        noise = 10.0 * rtol * float(np.max(np.abs(vals)))
    else:
        ref_series = formal_alpha_borel(fhat, alpha)
        b_rtol = max(rtol, 1e-8)
        vals = np.array([analytic_alpha_borel(
            f, alpha, BorelPath(tau, radius), x * cmath.exp(1j * tau),
            sector=sector, rtol=b_rtol) for x in xs])
        noise = 10.0 * b_rtol * float(np.max(np.abs(vals)))
    extracted = extract_asymptotic_coeffs(xs, vals, p_max, noise=noise)
    reference = ref_series.coeffs[:p_max + 1]
    deviations = np.abs(extracted.coeffs - reference)
    ok = deviations <= extracted.errors + 1e-12 * np.abs(reference) + 1e-300
    verdict = "agrees" if bool(np.all(ok)) else "disagrees"
    return TransformExpansionReport(
        kind=kind, alpha=alpha, beta=float(beta), p_max=int(p_max),
        extracted=extracted, reference=reference, deviations=deviations,
        ok=ok, verdict=verdict)
