"""Command-line frontend.

Every subcommand is a thin composition of module operations: parse and
validate flags, load inputs through the io module, call the library, wrap
the result in a report envelope, emit.  No numerical logic lives here.

Exit codes: 0 when the run succeeds and any verdict in the payload is
positive; 2 when the run succeeds but the mathematics says no (a condition
fails on its window, a certificate does not close, an audit item fails) --
the full report is still emitted; 1 on operational errors (bad flags,
malformed files, quadrature failures).

The environment variable ASYMPTO_THREADS caps module-internal parallelism;
it is resolved here and passed down explicitly.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from typing import Optional

import numpy as np

from . import io as aio
from .beurling import build_K
from .conditions import CONDITIONS, check_condition
from .errors import AsymptoError, ConfigInvalid, ReportedPartial
from .extension import fit_type, formal_borel, remainder_report
from .flat import FlatFunction, moments, verify_flatness
from .growth import AssociatedFunction, gamma_estimate
from .ramified import (BorelPath, GrowthCap, analytic_alpha_borel,
                       analytic_alpha_laplace)
from .sequences import SectorSpec


# the families whose condition verdicts form the reference table; QPP's
# doubly-exponential log growth caps its usable window at 60
def _builtin_families():
    from .sequences import WeightSequence as WS
    return (
        (WS.gevrey(0.5), 500),
        (WS.gevrey(1.0), 500),
        (WS.gevrey(2.0), 500),
        (WS.gevrey_log(1.0, 1.0), 500),
        (WS.q_gevrey(2.0, 2.0), 500),
        (WS.q_gevrey(2.0, 3.0), 500),
        (WS.power_sigma(1.0, 2.0), 500),
        (WS.q_pp(2.0), 60),
    )


def _threads() -> int:
    raw = os.environ.get("ASYMPTO_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"ASYMPTO_THREADS must be an integer: {raw!r}") from exc
    if n < 1:
        raise ConfigInvalid("ASYMPTO_THREADS must be >= 1")
    return n


def parse_window(text) -> int:
    """A window is `P` or `0:P`; checks always start at index 0."""
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            lo, hi = 0, int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError("too many fields")
    except ValueError as exc:
        raise ConfigInvalid(f"bad window {text!r}: expected P or 0:P") from exc
    if lo != 0:
        raise ConfigInvalid("windows start at index 0")
    if hi < 1:
        raise ConfigInvalid("window end must be >= 1")
    return hi


def parse_grid(text):
    """`a:b:n` -> (a, b, n) with a < b and n >= 2."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigInvalid(f"bad grid {text!r}: expected a:b:n")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigInvalid(f"bad grid {text!r}: {exc}") from exc
    if not a < b:
        raise ConfigInvalid("grid needs a < b")
    if n < 2:
        raise ConfigInvalid("grid needs n >= 2")
    return a, b, n


def _validated_window(M, P: int) -> int:
    if P > M.window:
        raise ConfigInvalid(
            f"window {P} exceeds the safe window {M.window} of {M.label}")
    return P


def _seq_config(path):
    spec = aio.read_json(path)
    return aio.sequence_from_spec(spec), spec


# -- subcommands ----------------------------------------------------------------


def cmd_check(args, raw) -> int:
    if args.matrix:
        return cmd_matrix(args, raw)
    if not args.seq or not args.cond:
        raise ConfigInvalid("check needs --seq and --cond (or --matrix)")
    M, spec = _seq_config(args.seq)
    P = _validated_window(M, parse_window(args.window))
    t0 = time.perf_counter()
    rep = check_condition(M, args.cond, P)
    env = aio.envelope(" ".join(raw),
                       {"seq": spec, "cond": args.cond, "window": P},
                       rep, time.perf_counter() - t0)
    aio.emit_json(env, args.out)
    return 0 if rep.holds else 2


def cmd_matrix(args, raw) -> int:
    rows = []
    for M, P in _builtin_families():
        reps = [check_condition(M, c, P) for c in CONDITIONS]
        rows.append((M.label, str(P)) + tuple(r.verdict for r in reps))
    aio.write_csv(args.out, ("family", "window") + CONDITIONS, rows)
    return 0


def cmd_gamma(args, raw) -> int:
    M, spec = _seq_config(args.seq)
    P = _validated_window(M, parse_window(args.window)
                          if args.window else min(600, M.window))
    t0 = time.perf_counter()
    est = gamma_estimate(M, P, resolution=args.res)
    env = aio.envelope(" ".join(raw),
                       {"seq": spec, "window": P, "resolution": args.res},
                       est, time.perf_counter() - t0)
    aio.emit_json(env, args.out)
    return 0


def cmd_hm(args, raw) -> int:
    M, _ = _seq_config(args.seq)
    a, b, n = parse_grid(args.t_grid)
    if a <= 0.0:
        raise ConfigInvalid("t-grid must be positive")
    A = AssociatedFunction(M)
    ts = np.geomspace(a, b, n)
    logs = A.log_at(ts)
    rows = [(aio.fmt(t), aio.fmt(lh), aio.fmt(math.exp(lh)))
            for t, lh in zip(ts, logs)]
    aio.write_csv(args.out, ("t", "log_h", "h"), rows)
    return 0


def cmd_moments(args, raw) -> int:
    kernel = FlatFunction.gevrey_exp(args.alpha)
    mu = moments(kernel, args.pmax, threads=_threads())
    rows = [(str(p), aio.fmt(mu.log_mu[p]), aio.fmt(mu.rel_err[p]))
            for p in range(args.pmax + 1)]
    aio.write_csv(args.out, ("p", "log_mu", "rel_err"), rows)
    return 0


def cmd_flatcheck(args, raw) -> int:
    M, spec = _seq_config(args.seq)
    opening = args.opening if args.opening is not None else args.alpha / 2.0
    kernel = FlatFunction.gevrey_exp(
        args.alpha, sector=SectorSpec(direction=0.0, opening=opening))
    window = None
    if args.window is not None:
        window = _validated_window(M, parse_window(args.window))
    t0 = time.perf_counter()
    cert = verify_flatness(kernel, M, window=window)
    env = aio.envelope(" ".join(raw),
                       {"seq": spec, "alpha": args.alpha, "opening": opening,
                        "window": window},
                       cert, time.perf_counter() - t0)
    aio.emit_json(env, args.out)
    return 0 if cert.holds else 2


def cmd_extend(args, raw) -> int:
    M, spec = _seq_config(args.seq)
    fhat = aio.load_series_csv(args.series)
    lo, hi, n_radii = parse_grid(args.grid)
    if lo <= 0.0:
        raise ConfigInvalid("extend grid radii must be positive")
    threads = _threads()
    kernel = FlatFunction.gevrey_exp(
        args.alpha, sector=SectorSpec(direction=0.0, opening=args.gamma))
    config = {"seq": spec, "series_sha256": aio.file_sha256(args.series),
              "alpha": args.alpha, "gamma": args.gamma,
              "grid": [lo, hi, n_radii], "pmax": args.pmax}

    t0 = time.perf_counter()
    cert = verify_flatness(kernel, M)
    if not cert.holds:
        env = aio.envelope(" ".join(raw), config, {"certificate": cert},
                           time.perf_counter() - t0)
        aio.emit_json(env, args.out)
        return 2
    fit = fit_type(fhat, M)
    mu = moments(kernel, max(2 * args.pmax + 4, fhat.order), threads=threads)
    B = formal_borel(fhat, mu, M, h=fit.h, norm=max(fit.norm, 1e-300))
    rep = remainder_report(B, kernel, fhat, M, p_max=args.pmax,
                           z_range=(lo, hi), n_radii=n_radii,
                           cert=cert, threads=threads)
    payload = {"certificate": cert, "type_fit": fit,
               "radius_R": B.radius_R, "R0": B.R0, "remainder": rep}
    env = aio.envelope(" ".join(raw), config, payload,
                       time.perf_counter() - t0)
    aio.emit_json(env, args.out)
    if args.table:
        rows = [(str(p), aio.fmt(rep.sup_norm[p]), aio.fmt(rep.fitted_bound[p]))
                for p in range(rep.p_max + 1)]
        aio.write_csv(args.table, ("p", "sup_norm", "fitted"), rows)
    return 0 if rep.holds else 2


def cmd_transform(args, raw) -> int:
    label, f = aio.load_function_spec(args.input)
    a, b, n = parse_grid(args.grid)
    if a <= 0.0:
        raise ConfigInvalid("transform grid must be positive")
    xs = np.linspace(a, b, n)
    ray = complex(math.cos(args.tau), math.sin(args.tau))
    if args.kind == "laplace":
        growth = GrowthCap(args.growth_K, args.growth_k)
        vals = [analytic_alpha_laplace(f, args.alpha, args.tau, x * ray,
                                       growth=growth) for x in xs]
    else:
        path = BorelPath(tau=args.tau, radius=args.radius)
        vals = [analytic_alpha_borel(f, args.alpha, path, x * ray)
                for x in xs]
    rows = [(aio.fmt(x), aio.fmt(v.real), aio.fmt(v.imag))
            for x, v in zip(xs, vals)]
    aio.write_csv(args.out, ("x", "re", "im"), rows)
    return 0


def cmd_beurling(args, raw) -> int:
    L, spec = _seq_config(args.seq_l)
    coeffs = aio.load_series_csv(args.coeffs)
    P = _validated_window(L, parse_window(args.window))
    config = {"seq_L": spec, "coeffs_sha256": aio.file_sha256(args.coeffs),
              "window": P, "theta": args.theta}
    t0 = time.perf_counter()
    partial_msg = None
    try:
        out = build_K(L, coeffs, P, theta=args.theta)
        report, derived = out.report, out
    except ReportedPartial as exc:
        report, derived, partial_msg = exc.report, None, str(exc)
    payload = {"items": report.items, "ok": report.ok}
    if partial_msg is not None:
        payload["partial"] = partial_msg
    if derived is not None:
        payload["log_k"] = derived.log_k[: P + 1]
        payload["log_eps"] = derived.epsilon.log_eps
        payload["log_E"] = derived.modulation.log_E[: P + 1]
        payload["theta"] = derived.modulation.theta
    env = aio.envelope(" ".join(raw), config, payload,
                       time.perf_counter() - t0)
    aio.emit_json(env, args.out)
    return 0 if (derived is not None and report.ok) else 2


# -- parser ----------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="asympto",
        description="weight-sequence conditions, growth index, flat kernels, "
                    "asymptotic extension and ramified transforms")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="check one condition on a window")
    c.add_argument("--seq", help="sequence spec JSON")
    c.add_argument("--cond", choices=CONDITIONS, help="condition name")
    c.add_argument("--window", default="0:500", help="window as P or 0:P")
    c.add_argument("--matrix", action="store_true",
                   help="ignore --seq/--cond; emit the built-in family table")
    c.add_argument("--out", help="output path (default stdout)")
    c.set_defaults(fn=cmd_check)

    m = sub.add_parser("matrix",
                       help="condition verdicts for the built-in families (CSV)")
    m.add_argument("--out")
    m.set_defaults(fn=cmd_matrix)

    g = sub.add_parser("gamma", help="bracket the growth index")
    g.add_argument("--seq", required=True)
    g.add_argument("--res", type=float, default=None,
                   help="bisection resolution (default from module config)")
    g.add_argument("--window", default=None)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gamma)

    h = sub.add_parser("hm", help="associated function on a log-spaced t grid (CSV)")
    h.add_argument("--seq", required=True)
    h.add_argument("--t-grid", required=True, dest="t_grid", metavar="A:B:N")
    h.add_argument("--out")
    h.set_defaults(fn=cmd_hm)

    mo = sub.add_parser("moments", help="kernel moment sequence (CSV)")
    mo.add_argument("--alpha", type=float, required=True)
    mo.add_argument("--pmax", type=int, default=20)
    mo.add_argument("--out")
    mo.set_defaults(fn=cmd_moments)

    f = sub.add_parser("flatcheck",
                       help="two-sided flatness certificate of the kernel "
                            "against a sequence")
    f.add_argument("--alpha", type=float, required=True)
    f.add_argument("--seq", required=True)
    f.add_argument("--opening", type=float, default=None,
                   help="sector opening (default alpha/2)")
    f.add_argument("--window", default=None)
    f.add_argument("--out")
    f.set_defaults(fn=cmd_flatcheck)

    e = sub.add_parser("extend",
                       help="truncated-Laplace extension of a series with a "
                            "remainder certificate")
    e.add_argument("--seq", required=True)
    e.add_argument("--series", required=True, help="coefficients CSV")
    e.add_argument("--alpha", type=float, required=True, help="kernel index")
    e.add_argument("--gamma", type=float, required=True,
                   help="sector opening the certificate runs on")
    e.add_argument("--grid", default="1e-3:1.0:13", metavar="A:B:N",
                   help="remainder grid radii")
    e.add_argument("--pmax", type=int, default=12)
    e.add_argument("--out", help="report JSON path (default stdout)")
    e.add_argument("--table", help="also write the per-p CSV table here")
    e.set_defaults(fn=cmd_extend)

    t = sub.add_parser("transform",
                       help="analytic ramified transform of a zoo function "
                            "along a ray (CSV)")
    t.add_argument("--kind", choices=("laplace", "borel"), required=True)
    t.add_argument("--alpha", type=float, required=True)
    t.add_argument("--tau", type=float, default=0.0)
    t.add_argument("--input", required=True, help="function spec JSON")
    t.add_argument("--grid", required=True, metavar="A:B:N")
    t.add_argument("--radius", type=float, default=1.0,
                   help="borel contour radius")
    t.add_argument("--growth-K", type=float, default=1.0, dest="growth_K",
                   help="laplace growth cap: |f| <= K exp(k t^(1/alpha))")
    t.add_argument("--growth-k", type=float, default=0.0, dest="growth_k")
    t.add_argument("--out")
    t.set_defaults(fn=cmd_transform)

    b = sub.add_parser("beurling", help="small-series constructions")
    bs = b.add_subparsers(dest="action", required=True)
    bk = bs.add_parser("build-k",
                       help="derive the interpolating sequence and audit it")
    bk.add_argument("--seq-L", required=True, dest="seq_l")
    bk.add_argument("--coeffs", required=True, help="coefficients CSV")
    bk.add_argument("--window", required=True)
    bk.add_argument("--theta", type=float, default=0.8)
    bk.add_argument("--out")
    bk.set_defaults(fn=cmd_beurling)

    return p


def main(argv=None) -> int:
    raw = list(argv) if argv is not None else sys.argv[1:]
    try:
        args = _parser().parse_args(raw)
        return args.fn(args, raw)
    except AsymptoError as exc:
        print(f"asympto: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
