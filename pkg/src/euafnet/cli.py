"""Command-line front end: ``euafnet {fit,compose,witness,selftest}``.

Exit codes: 0 when every claim of the run holds, 2 when a claim is unmet
(tolerance missed, gap below its floor), 1 for usage or configuration
errors.  Every file is written atomically and contains no timestamps, so
identical configurations reproduce identical bytes.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import clip01_fragment, euaf, full_width_count, scalar_fn
from .errors import CompositionError, EuafError, FitFailed, SubFitError, WidthMismatch
from .kst import SyntheticKstTriple, approximate_multivariate
from .search import SearchBudget
from .serialize import atomic_write, dumps_record, load_network
from .targets import family_target, kst_target, univariate_target
from .univariate import fit_univariate
from .width_bound import random_narrow_network, two_point_gap

OUT_ENV = "EUAFNET_OUT"

EXIT_OK, EXIT_USAGE, EXIT_UNMET = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _domain(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise argparse.ArgumentTypeError(f"domain must be 'a,b' with a < b, got {text!r}")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=200_000, help="search evaluations per fit")
    common.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default ${OUT_ENV} or ./euafnet-out)")

    p = _Parser(prog="euafnet", description="EUAF network fitting and width certificates.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", parents=[common], help="fit a univariate target")
    fit.add_argument("--target", default="sin2pi")
    fit.add_argument("--domain", type=_domain, default=(0.0, 1.0))
    fit.add_argument("--eps", type=_floats, default=[0.1])
    fit.add_argument("--grid", type=int, default=2001)

    comp = sub.add_parser("compose", parents=[common], help="approximate a KST-represented target")
    comp.add_argument("--target", default="synthetic")
    comp.add_argument("--d", type=int, default=2)
    comp.add_argument("--domain", type=_domain, default=(0.0, 1.0))
    comp.add_argument("--eps", type=_floats, default=[0.5])
    comp.add_argument("--lambda", dest="lam", type=_floats, default=None)
    comp.add_argument("--grid", type=int, default=None, help="points per axis")

    wit = sub.add_parser("witness", parents=[common], help="two-point gap certificates")
    wit.add_argument("--target", default="abs2", help="family id (abs2 or abs1)")
    wit.add_argument("--d", type=int, default=3)
    src = wit.add_mutually_exclusive_group(required=True)
    src.add_argument("--nets", type=Path, help="directory of serialized networks")
    src.add_argument("--random", type=int, help="number of random width-(d-1) networks")
    wit.add_argument("--depth", type=int, default=2)

    sub.add_parser("selftest", parents=[common], help="fast analytic checks")
    return p


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "euafnet-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tag(x: float) -> str:
    return repr(float(x))


def _config(args) -> dict:
    """Run parameters as recorded in the manifest (the output path is not part of it)."""
    rec = {}
    for k, v in sorted(vars(args).items()):
        if k in ("out", "func"):
            continue
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, tuple):
            v = list(v)
        rec[k] = v
    return rec


def _write_manifest(out: Path, args, files: list, status: dict) -> None:
    entries = []
    for name in sorted(files):
        data = (out / name).read_bytes()
        entries.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
    record = {"version": __version__, "command": args.command, "config": _config(args),
              "files": entries, "status": status}
    atomic_write(out / "manifest.json", dumps_record(record))


def _json(obj) -> str:
    return dumps_record(obj)


def cmd_fit(args) -> int:
    f = univariate_target(args.target)
    if any(not e > 0 for e in args.eps):
        raise UsageError("every eps must be positive")
    out = _out_dir(args)
    files, met_all, results = [], True, []
    for eps in args.eps:
        search = SearchBudget(max_evals=args.budget, seed=args.seed)
        try:
            report, met = fit_univariate(f, args.domain, eps, search, grid=args.grid), True
        except FitFailed as exc:
            report, met = exc.report, False
        stem = f"fit-{args.target}-eps{_tag(eps)}"
        atomic_write(out / f"{stem}.json", _json(report.to_record()))
        report.table.write(out / f"{stem}.csv")
        files += [f"{stem}.json", f"{stem}.csv"]
        line = (f"{args.target} eps={eps:g}: sup_error={report.sup_error:.6g} n={report.n} "
                f"widths={list(report.architecture_fingerprint)} {'met' if met else 'UNMET'}")
        print(line)
        if not met:
            print(f"best achieved error {report.sup_error:.6g} >= eps {eps:g}", file=sys.stderr)
        met_all &= met
        results.append({"eps": eps, "sup_error": report.sup_error, "met": met})
    _write_manifest(out, args, files, {"met": met_all, "results": results})
    return EXIT_OK if met_all else EXIT_UNMET


def cmd_compose(args) -> int:
    if args.d < 1:
        raise UsageError("--d must be positive")
    if any(not e > 0 for e in args.eps):
        raise UsageError("every eps must be positive")
    try:
        triple = kst_target(args.target, args.d)
        if args.lam is not None:
            if len(args.lam) != args.d:
                raise UsageError(f"--lambda needs {args.d} values")
            triple = SyntheticKstTriple(triple.g, triple.h, tuple(args.lam), triple.name)
    except (KeyError, CompositionError) as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    files, met_all, results = [], True, []
    for eps in args.eps:
        search = SearchBudget(max_evals=args.budget, seed=args.seed)
        stem = f"compose-{args.target}-d{args.d}-eps{_tag(eps)}"
        try:
            res = approximate_multivariate(triple, args.domain, eps, search, args.grid)
        except SubFitError as exc:
            print(f"eps={eps:g}: {exc.component} sub-fit failed: {exc.cause}", file=sys.stderr)
            met_all = False
            results.append({"eps": eps, "met": False, "failed_component": exc.component})
            continue
        count = res.composition.neuron_count()
        atomic_write(out / f"{stem}.json", res.composition.serialize())
        res.table.write(out / f"{stem}.csv", out / f"{stem}-summary.json")
        budget = {"epsilon": res.budget.epsilon, "per_term_outer_tol": res.budget.per_term_outer_tol,
                  "delta": res.budget.delta}
        atomic_write(out / f"{stem}-count.json", _json({"count": count.as_dict(), "budget": budget}))
        files += [f"{stem}.json", f"{stem}.csv", f"{stem}-summary.json", f"{stem}-count.json"]
        met = res.table.sup < eps
        met_all &= met
        print(count.breakdown())
        print(f"d={args.d} eps={eps:g}: sup_error={res.table.sup:.6g} {'met' if met else 'UNMET'}")
        results.append({"eps": eps, "sup_error": res.table.sup, "met": met, "neurons": count.total})
    _write_manifest(out, args, files, {"met": met_all, "results": results})
    return EXIT_OK if met_all else EXIT_UNMET


def _networks(args):
    if args.nets is not None:
        if not args.nets.is_dir():
            raise UsageError(f"--nets {args.nets} is not a directory")
        for path in sorted(args.nets.glob("*.json")):
            yield path.name, path
    else:
        if args.random < 0:
            raise UsageError("--random must be non-negative")
        rng = np.random.default_rng(args.seed)
        for i in range(args.random):
            yield f"random-{i:04d}", random_narrow_network(args.d, args.depth, rng)


def cmd_witness(args) -> int:
    if args.d < 2:
        raise UsageError("--d must be at least 2")
    try:
        family = family_target(args.target, args.d)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    rows = ["name,e0,e1,gap,floor,holds,status"]
    records, checked, failed = [], 0, 0
    for name, item in _networks(args):
        try:
            net = load_network(item) if isinstance(item, Path) else item
            cert = two_point_gap(family, net)
        except (WidthMismatch, EuafError) as exc:
            print(f"{name}: skipped: {exc}", file=sys.stderr)
            rows.append(f"{name},,,,{family.c_star / 2!r},,skipped")
            continue
        checked += 1
        failed += not cert.holds
        rows.append(",".join([name, repr(cert.e0), repr(cert.e1), repr(cert.gap), repr(cert.floor),
                              str(cert.holds).lower(), "ok"]))
        records.append({"name": name, **cert.to_record()})
    atomic_write(out / "gaps.csv", "\n".join(rows) + "\n")
    atomic_write(out / "witnesses.json", _json(records))
    ok = checked > 0 and failed == 0
    print(f"{checked} networks certified, {failed} below floor {family.c_star / 2:g}, "
          f"{len(rows) - 1 - checked} skipped")
    _write_manifest(out, args, ["gaps.csv", "witnesses.json"],
                    {"met": ok, "checked": checked, "failed": failed})
    return EXIT_OK if ok else EXIT_UNMET


def cmd_selftest(args) -> int:
    checks = {}
    checks["neuron_count"] = all(full_width_count(d).total == 366 * d + 365 for d in range(1, 9))
    t = np.linspace(-1.0, 2.0, 10_001)
    clip = scalar_fn(clip01_fragment())(t)
    checks["clip_identity"] = float(np.abs(clip - np.clip(t, 0.0, 1.0)).max()) <= 1e-12
    xs = np.linspace(0.0, 40.0, 4001)
    checks["euaf_values"] = (euaf(0.5) == 0.5 and euaf(1.5) == 0.5 and euaf(2.0) == 0.0
                             and euaf(-1.0) == -0.5)
    checks["euaf_period"] = bool(np.allclose(euaf(xs + 2.0), euaf(xs), atol=1e-12))
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(checks.values()) else EXIT_UNMET


COMMANDS = {"fit": cmd_fit, "compose": cmd_compose, "witness": cmd_witness, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"euafnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"euafnet {args.command}: error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
