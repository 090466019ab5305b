"""Quadrature engines shared by the moment, extension, and transform modules.

Two workhorses live here.  `log_integral_decaying` integrates a positive
integrand supplied in log form over the real line: it brackets the peak by
walking outward until the integrand has dropped a configurable number of
decades, then runs a trapezoid rule with successive doubling and a Richardson
stopping estimate, accumulating in log space so values like exp(-10^5) come
out exact instead of underflowing.  `complex_trapezoid_doubling` is the same
doubling scheme for complex integrands parametrized on a real interval, used
for ray and contour integrals whose envelope decays super-polynomially.
Finite intervals with no decay structure go through `complex_quad`, a thin
wrapper over adaptive Gauss-Kronrod applied to real and imaginary parts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import logsumexp

from .errors import QuadratureNotConverged

# translation between "decades below the peak" and nats
_LN10 = math.log(10.0)

# hard cap on points per level: integrands here converge geometrically once
# their tails are inside the window, so hitting this means something is wrong
# and raising beats grinding through gigabyte arrays
_MAX_POINTS = 1 << 22


@dataclass
class LogQuadResult:
    """Integral of exp(log_f) over the bracketed window, in log form."""

    log_value: float
    rel_err: float
    evals: int
    window: tuple
    points: int


@dataclass
class ComplexQuadResult:
    value: complex
    rel_err: float
    evals: int


def _bracket_peak(log_f: Callable, hint: float, drop: float,
                  step: float = 1.0, max_steps: int = 200000) -> tuple:
    """Walk outward from `hint` until log_f is `drop` nats below its max."""
    peak = float(log_f(np.array([float(hint)]))[0])
    evals = 1
    edges = []
    for sign in (+1.0, -1.0):
        x = float(hint)
        for _ in range(max_steps):
            x += sign * step
            v = float(log_f(np.array([x]))[0])
            evals += 1
            peak = max(peak, v)
            if v <= peak - drop:
                break
        else:
            raise QuadratureNotConverged(
                "integrand did not drop %.0f nats within %d unit steps of %g"
                % (drop, max_steps, hint))
        edges.append(x)
    hi, lo = edges
    return lo, hi, evals


def log_integral_decaying(log_f: Callable, hint: float = 0.0,
                          rtol: float = 1e-13, drop_decades: float = 60.0,
                          n0: int = 129, max_doublings: int = 24) -> LogQuadResult:
    """log of integral exp(log_f(s)) ds for a decaying integrand on the line.

    `log_f` must be vectorized over a float array and finite (or -inf) on it.
    Callers integrating over (0, inf) substitute t = exp(s) themselves and
    fold the Jacobian into log_f.  Convergence is declared when one doubling
    moves the log-integral by at most rtol (a relative move, since the values
    are logs); one further doubling is then taken as the reported value, with
    the last observed move as the error estimate.
    """
    drop = drop_decades * _LN10
    lo, hi, evals = _bracket_peak(log_f, hint, drop)

    def _level(n):
        x = np.linspace(lo, hi, n)
        logw = np.full(n, math.log(x[1] - x[0]))
        logw[0] -= math.log(2.0)
        logw[-1] -= math.log(2.0)
        return float(logsumexp(log_f(x) + logw))

    n = int(n0)
    prev = None
    for _ in range(max_doublings):
        if n > _MAX_POINTS:
            break
        cur = _level(n)
        evals += n
        if prev is not None:
            if prev == cur == -math.inf:
                return LogQuadResult(-math.inf, 0.0, evals, (lo, hi), n)
            if abs(cur - prev) <= rtol:
                n2 = 2 * (n - 1) + 1
                final = _level(n2)
                evals += n2
                err = max(abs(final - cur), 1e-16)
                return LogQuadResult(final, err, evals, (lo, hi), n2)
        prev = cur
        n = 2 * (n - 1) + 1
    raise QuadratureNotConverged(
        "log-trapezoid did not converge to rtol=%g within %d doublings"
        % (rtol, max_doublings))


def complex_trapezoid_doubling(f: Callable, lo: float, hi: float,
                               rtol: float = 1e-9, scale: float = 0.0,
                               n0: int = 129,
                               max_doublings: int = 22) -> ComplexQuadResult:
    """Integral of a vectorized complex f over [lo, hi] by trapezoid doubling.

    Converged when one doubling moves the value by rtol relative to
    max(|value|, scale); one extra doubling is taken after that.  `scale`
    lets contour legs that nearly cancel share an absolute floor.
    """
    def _level(n):
        x = np.linspace(lo, hi, n)
        y = np.asarray(f(x), dtype=complex)
        w = np.full(n, x[1] - x[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        return complex(np.sum(w * y))

    n = int(n0)
    evals = 0
    prev = None
    for _ in range(max_doublings):
        if n > _MAX_POINTS:
            break
        cur = _level(n)
        evals += n
        if prev is not None:
            ref = max(abs(cur), abs(scale))
            if ref == 0.0 or abs(cur - prev) <= rtol * ref:
                n2 = 2 * (n - 1) + 1
                final = _level(n2)
                evals += n2
                ref = max(abs(final), abs(scale), 1e-300)
                err = abs(final - cur) / ref
                return ComplexQuadResult(final, err, evals)
        prev = cur
        n = 2 * (n - 1) + 1
    raise QuadratureNotConverged(
        "complex trapezoid did not converge to rtol=%g on [%g, %g]"
        % (rtol, lo, hi))


def map_maybe_parallel(fn: Callable, items, threads: int = 1) -> list:
    """Order-preserving map over independent items, threaded when asked.

    Results are identical either way; threading only helps when each item
    does real numpy work (quadrature levels release the GIL in numpy).
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, items))


def complex_quad(f: Callable, a: float, b: float, rtol: float = 1e-9,
                 scale: float = 0.0, limit: int = 200) -> ComplexQuadResult:
    """Adaptive quadrature of scalar complex f over [a, b].

    Error policy: the absolute target is rtol times `scale` when given (the
    caller's estimate of the integrand's peak magnitude), else pure relative.
    Raises when the reported error exceeds the target against both the value
    and the scale.
    """
    epsabs = rtol * scale if scale > 0.0 else 1.49e-300
    with warnings.catch_warnings():
        # the error policy below re-checks what scipy would warn about
        warnings.simplefilter("ignore", IntegrationWarning)
        re, re_err = quad(lambda t: f(t).real, a, b, epsabs=epsabs,
                          epsrel=rtol, limit=limit)
        im, im_err = quad(lambda t: f(t).imag, a, b, epsabs=epsabs,
                          epsrel=rtol, limit=limit)
    val = complex(re, im)
    err = math.hypot(re_err, im_err)
    ref = max(abs(val), scale)
    if ref > 0.0 and err > 10.0 * rtol * ref:
        raise QuadratureNotConverged(
            "adaptive quadrature error %.3e exceeds target %.3e" % (err, rtol * ref))
    return ComplexQuadResult(val, err / ref if ref > 0.0 else 0.0, 0)
