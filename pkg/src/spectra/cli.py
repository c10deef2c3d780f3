"""Command-line entry point.

Subcommands: verify, stieltjes, density, wegner, hw, moments.
Exit codes: 0 success, 1 a numerical check failed, 2 usage error.
Grid data is written as CSV, reports as JSON; every file written with
``--out`` gets a ``<out>.manifest.json`` companion.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .identities import check_hoffman_wielandt, run_checks
from .ensemble import build_system, sample_gaussian
from .montecarlo import (
    DENSITY_CEILING,
    KEY_BOUND,
    McConfig,
    check_density_ceiling,
    estimate_gamma_density,
    exact_fourth_moment,
    exact_second_moment,
    expected_stieltjes,
    hankel_density_explore,
    moment_diagnostics,
    parallel_map,
    resolve_threads,
)
from .wegner import (
    DEFAULT_EPS_LADDER,
    Quadrature,
    build_family,
    scalar_selftest,
    verify_apriori_bound,
    verify_F_bounds,
    verify_spectral_averaging,
)

FLOAT_FMT = "{:.17g}"


def _ints(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _floats(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _egrid(text):
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected min:max:step, got {text!r}")
    if not (hi >= lo and step > 0):
        raise argparse.ArgumentTypeError("need max >= min and step > 0")
    return np.round(np.arange(lo, hi + step / 2, step), 12)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # repr of a Python float is the shortest round-trip decimal
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def to_json(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class Run:
    """Collects the manifest for one command and writes its outputs."""

    def __init__(self, args):
        self.args = args
        self.started = datetime.now(timezone.utc).isoformat()
        params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "plot")}
        self.manifest = {
            "command": args.command,
            "parameters": _jsonable(params),
            "versions": {
                "spectra": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "seed": getattr(args, "seed", None) if not hasattr(args, "seeds") else args.seeds,
            "started": self.started,
        }

    @property
    def out(self) -> Path | None:
        return Path(self.args.out) if getattr(self.args, "out", None) else None

    def emit(self, text: str):
        if self.out is None:
            sys.stdout.write(text)
            return
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.out.write_text(text, encoding="utf-8", newline="\n")
        self.manifest["finished"] = datetime.now(timezone.utc).isoformat()
        self.manifest["output"] = self.out.name
        manifest_path = self.out.with_name(self.out.name + ".manifest.json")
        manifest_path.write_text(to_json(self.manifest), encoding="utf-8", newline="\n")

    def figure_path(self) -> Path | None:
        if not getattr(self.args, "plot", False):
            return None
        if self.out is None:
            raise SystemExit("--plot needs --out")
        return self.out.with_suffix(".png")

    def say(self, text: str):
        print(text, file=sys.stdout if self.out is not None else sys.stderr)


def cmd_verify(args) -> int:
    run = Run(args)
    combos = [(n, s) for n in args.n for s in args.seeds]
    groups = parallel_map(lambda i: run_checks(*combos[i], tol_scale=args.tol_scale), len(combos), args.threads)
    reports = [r.to_dict() for g in groups for r in g]
    run.emit(to_json(reports))
    failed = [r for r in reports if not r["passed"]]
    run.say(f"{len(reports) - len(failed)}/{len(reports)} identity checks passed")
    return 1 if failed else 0


def cmd_stieltjes(args) -> int:
    run = Run(args)
    z = np.array([complex(e, y) for y in args.imz for e in args.egrid])
    est = expected_stieltjes(McConfig(args.n, args.samples, args.seed, z, args.threads))
    vals = np.abs(est.mean) + 3.0 * est.stderr
    ok = vals <= KEY_BOUND
    rows = [
        (z[k].real, z[k].imag, est.mean[k].real, est.mean[k].imag, est.stderr_re[k], est.stderr_im[k], ok[k])
        for k in range(z.size)
    ]
    run.emit(to_csv(["E", "imz", "re_s", "im_s", "stderr_re", "stderr_im", "bound_ok"], rows))
    run.say(f"max |s|+3se = {vals.max():.6g} (bound {KEY_BOUND:.6f})")
    fig = run.figure_path()
    if fig is not None:
        from .plotting import plot_stieltjes

        plot_stieltjes([r[:4] for r in rows], fig, bound=KEY_BOUND)
    return 0 if ok.all() else 1


def cmd_density(args) -> int:
    run = Run(args)
    grid = np.linspace(args.grid_min, args.grid_max, args.grid_points)
    fn = estimate_gamma_density if args.ensemble == "toeplitz" else hankel_density_explore
    est = fn(args.n, args.samples, args.seed, grid, args.bandwidth, args.threads, args.boot)
    run.emit(to_csv(["x", "density", "ci"], zip(est.grid, est.values, est.ci_halfwidth)))
    integral = est.integral()
    status = 0
    if args.ensemble == "toeplitz":
        margin = DENSITY_CEILING - est.peak_upper
        run.say(f"peak {est.peak:.6g} (+ci {est.peak_upper:.6g}); margin to {DENSITY_CEILING:.4f}: {margin:.6g}")
        status = 0 if margin > 0 and abs(integral - 1) <= 0.01 else 1
    else:
        run.say(f"peak {est.peak:.6g}; exploratory")
    run.say(f"integral {integral:.6g}, bandwidth {est.bandwidth:.6g}")
    fig = run.figure_path()
    if fig is not None:
        from .plotting import plot_density

        plot_density(est, fig, ceiling=DENSITY_CEILING if args.ensemble == "toeplitz" else None)
    return status


def cmd_wegner(args) -> int:
    run = Run(args)
    quad = Quadrature(nodes=args.quad_points)
    if args.scalar:
        rep = scalar_selftest(quad)
        payload = {"scalar_selftest": rep.to_dict()}
        ok = rep.passed
        figs = [("scalar", [c for c in payload["scalar_selftest"]["checks"] if c["bound"] != "closed_form"])]
    else:
        system = build_system(sample_gaussian(args.n, args.seed))
        payload = {"n": args.n, "seed": args.seed, "families": []}
        ok = True
        figs = []
        for j in args.j:
            fam = build_family(system, j)
            lam = fam.g.scale * np.linspace(-4, 4, 200)
            ap = verify_apriori_bound(fam, lam, 0.1, args.delta[-1], args.E[0])
            fb = verify_F_bounds(fam, args.eps_ladder, args.delta, args.E, quad)
            sa = verify_spectral_averaging(fam, args.E, args.delta, quad)
            margin = fam.positivity_margin()
            fam_ok = ap.passed and fb.passed and sa.passed and margin >= -1e-10
            ok = ok and fam_ok
            figs.append((f"j = {j}", fb.to_dict()["checks"]))
            payload["families"].append(
                {
                    "j": j,
                    "g_scale": fam.g.scale,
                    "c0": fam.c0,
                    "positivity_margin": margin,
                    "passed": fam_ok,
                    "apriori": ap.to_dict(),
                    "F_bounds": fb.to_dict(),
                    "spectral_averaging": sa.to_dict(),
                }
            )
    payload["passed"] = ok
    run.emit(to_json(payload))
    run.say("all bounds hold" if ok else "bound violation")
    fig = run.figure_path()
    if fig is not None:
        from .plotting import plot_wegner

        plot_wegner(figs, fig)
    return 0 if ok else 1


def cmd_hw(args) -> int:
    run = Run(args)
    reports = []
    for s in args.seeds:
        for n in args.n:
            reports.append(check_hoffman_wielandt(sample_gaussian(n, s)).to_dict())
    scaling = []
    ns = sorted(args.n)
    for s in args.seeds:
        by_n = {r["n"]: r for r in reports if r["seed"] == s}
        for n1, n2 in zip(ns, ns[1:]):
            b1, b2 = by_n[n1]["detail"]["bound"], by_n[n2]["detail"]["bound"]
            scaling.append({"seed": s, "n_small": n1, "n_large": n2, "ratio": b1 / b2 if b2 else None, "expected": n2 / n1})
    run.emit(to_json({"reports": reports, "scaling": scaling}))
    ok = all(r["passed"] for r in reports)
    run.say(f"{sum(r['passed'] for r in reports)}/{len(reports)} Hoffman-Wielandt checks passed")
    return 0 if ok else 1


def cmd_moments(args) -> int:
    run = Run(args)
    m = moment_diagnostics(args.n, args.samples, args.seed, args.max_order, args.threads)
    exact = {2: exact_second_moment(args.n)}
    if args.n <= 128 and args.max_order >= 4:
        exact[4] = exact_fourth_moment(args.n)
    checks = []
    for k, (mean, se) in m.items():
        target = 0.0 if k % 2 else exact.get(k)
        if target is None:
            continue
        checks.append({"order": k, "mean": mean, "stderr": se, "expected": target, "passed": abs(mean - target) <= 3 * se})
    payload = {
        "n": args.n,
        "samples": args.samples,
        "seed": args.seed,
        "moments": {k: {"mean": v[0], "stderr": v[1]} for k, v in m.items()},
        "checks": checks,
    }
    run.emit(to_json(payload))
    ok = all(c["passed"] for c in checks)
    run.say(f"{sum(c['passed'] for c in checks)}/{len(checks)} moment checks within 3 stderr")
    return 0 if ok else 1


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_list(text):
    vals = _ints(text)
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"all values must be >= 1, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectra", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--threads", type=_positive, default=None,
                        help="worker threads (default: $SPECTRA_THREADS or CPU count); never changes output")

    sp = sub.add_parser("verify", help="exact identities of the circulant embedding")
    sp.add_argument("--n", type=_positive_list, required=True)
    sp.add_argument("--seeds", type=_ints, default=[1])
    sp.add_argument("--tol-scale", type=float, default=1.0)
    common(sp, "JSON report path")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("stieltjes", help="Monte Carlo Stieltjes transform and the uniform bound")
    sp.add_argument("--n", type=_positive, default=128)
    sp.add_argument("--samples", type=_positive, default=200)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--egrid", type=_egrid, default=_egrid("-6:6:0.25"), help="min:max:step")
    sp.add_argument("--imz", type=_floats, default=[0.2, 0.05, 0.01])
    sp.add_argument("--plot", action="store_true", help="also write <out>.png")
    common(sp, "CSV path")
    sp.set_defaults(func=cmd_stieltjes)

    sp = sub.add_parser("density", help="kernel density estimate of the limiting law")
    sp.add_argument("--n", type=_positive, default=1024)
    sp.add_argument("--samples", type=_positive, default=200)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--grid-min", type=float, default=-5.0)
    sp.add_argument("--grid-max", type=float, default=5.0)
    sp.add_argument("--grid-points", type=_positive, default=401)
    sp.add_argument("--bandwidth", type=float, default=None)
    sp.add_argument("--boot", type=int, default=200, help="bootstrap resamples (>= 50)")
    sp.add_argument("--ensemble", choices=("toeplitz", "hankel"), default="toeplitz")
    sp.add_argument("--plot", action="store_true", help="also write <out>.png")
    common(sp, "CSV path")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("wegner", help="spectral-averaging bound checks")
    sp.add_argument("--n", type=_positive, default=16)
    sp.add_argument("--seed", type=int, default=2)
    sp.add_argument("--j", type=_ints, default=None, help="indices in [0, n] (default 0,1,n/2,n)")
    sp.add_argument("--E", type=_floats, default=[-2.0, 0.0, 2.0])
    sp.add_argument("--delta", type=_floats, default=[0.5, 0.05, 0.005])
    sp.add_argument("--eps-ladder", type=_floats, default=list(DEFAULT_EPS_LADDER))
    sp.add_argument("--quad-points", type=int, default=3000)
    sp.add_argument("--scalar", action="store_true", help="run the 1x1 closed-form self-test instead")
    sp.add_argument("--plot", action="store_true", help="also write <out>.png")
    common(sp, "JSON path")
    sp.set_defaults(func=cmd_wegner)

    sp = sub.add_parser("hw", help="Hoffman-Wielandt check of the diagonal modification")
    sp.add_argument("--n", type=_positive_list, default=[128, 512])
    sp.add_argument("--seeds", type=_ints, default=[4])
    common(sp, "JSON path")
    sp.set_defaults(func=cmd_hw)

    sp = sub.add_parser("moments", help="Monte Carlo moments against exact finite-n values")
    sp.add_argument("--n", type=_positive, default=64)
    sp.add_argument("--samples", type=_positive, default=2000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--max-order", type=_positive, default=6)
    common(sp, "JSON path")
    sp.set_defaults(func=cmd_moments)
    return p


def _validate(parser, args):
    if getattr(args, "seeds", None) is not None and any(s < 0 for s in args.seeds):
        parser.error("seeds must be nonnegative")
    if getattr(args, "seed", 0) < 0:
        parser.error("seed must be nonnegative")
    if args.command == "stieltjes" and any(y <= 0 for y in args.imz):
        parser.error("--imz values must be > 0")
    if args.command == "density":
        if args.bandwidth is not None and args.bandwidth <= 0:
            parser.error("--bandwidth must be > 0")
        if args.boot < 50:
            parser.error("--boot must be >= 50")
        if not args.grid_max > args.grid_min:
            parser.error("--grid-max must exceed --grid-min")
    if args.command == "wegner":
        if args.j is None:
            args.j = sorted({0, 1, args.n // 2, args.n})
        if any(not 0 <= j <= args.n for j in args.j):
            parser.error(f"--j values must lie in [0, {args.n}]")
        if any(not 0 < e <= 1 for e in args.eps_ladder):
            parser.error("--eps-ladder values must lie in (0, 1]")
        if any(d <= 0 for d in args.delta):
            parser.error("--delta values must be > 0")
        if args.quad_points < 2000:
            parser.error("--quad-points must be >= 2000")
    if getattr(args, "threads", None) is None:
        try:
            resolve_threads(None)
        except ValueError as exc:
            parser.error(f"SPECTRA_THREADS: {exc}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
