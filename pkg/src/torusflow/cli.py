"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 acceptance failure,
3 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import NumericalFailure, TorusFlowError

EXIT_OK, EXIT_USAGE, EXIT_ACCEPTANCE, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as an acceptance failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _print_json(obj):
    from .io import dumps

    print(json.dumps(json.loads(dumps(obj)), indent=2, sort_keys=True))


def cmd_simulate(args):
    from .config import load_config
    from .runner import run_experiment

    cfg = load_config(args.config)
    m = run_experiment(cfg, args.output_dir)
    _print_json(m.to_dict())
    return EXIT_OK if m.passed else EXIT_ACCEPTANCE


def cmd_diagnose(args):
    from .diagnostics import trajectory_diagnostics
    from .io import dumps, read_trajectory, write_ndjson
    from .runner import resolve_output_dir

    ref, traj = read_trajectory(args.trajectory)
    recs = trajectory_diagnostics(ref, traj, args.delta_star, recentre=True,
                                  asymmetry=not args.no_asymmetry)
    out = resolve_output_dir(args.output_dir, Path(args.trajectory).parent)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "diagnostics.ndjson"
    write_ndjson(path, recs)
    if args.csv:
        import csv

        keys = args.csv.split(",")
        with open(out / "diagnostics.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for r in recs:
                d = r.to_dict()
                w.writerow([dumps(d.get(k)) for k in keys])
    print(path)
    return EXIT_OK


def cmd_norms(args):
    from .io import read_trajectory
    from .linear import norm_XT, norm_YT

    ref, traj = read_trajectory(args.trajectory)
    reports = []
    if args.kind in ("X", "both"):
        reports.append(norm_XT(ref, traj, args.beta))
    if args.kind in ("Y", "both"):
        reports.append(norm_YT(ref, traj, args.beta))
    for r in reports:
        print(r.to_json())
    return EXIT_OK


def _reference_from_arg(args):
    from .config import load_config
    from .reference import Kind, ReferenceSpec

    if Path(args.reference).is_file():
        return load_config(args.reference).reference
    try:
        kind = Kind(args.reference)
    except ValueError:
        raise TorusFlowError(f"{args.reference!r} is neither a config file nor a reference kind") from None
    return ReferenceSpec(kind, args.radius, args.slab_width, args.n)


def cmd_stability(args):
    from .reference import make_reference, stability_spectrum

    ref = make_reference(_reference_from_arg(args))
    sp = stability_spectrum(ref, args.kmax)
    _print_json({"reference": ref.kind.value, "radius": ref.spec.radius, "n": ref.spec.n,
                 "strictly_stable": sp.strictly_stable, "min_eigenvalue": sp.min_eigenvalue,
                 "zero_cutoff": sp.zero_cutoff,
                 "modes": [{"mode": m, "eigenvalue": v} for m, v in sp.modes[:args.show]],
                 "translations": [{"field": m, "rayleigh_quotient": v} for m, v in sp.translations]})
    return EXIT_OK


def cmd_verify_all(args):
    from .acceptance import verify_all
    from .runner import resolve_output_dir

    only = {int(x) for x in args.only.split(",")} if args.only else None
    rep = verify_all(resolve_output_dir(args.output_dir, "verify"), only, echo=print)
    print(f"stream: {rep.stream}")
    if rep.passed:
        return EXIT_OK
    return EXIT_NUMERICAL if rep.numerical_failure else EXIT_ACCEPTANCE


def build_parser():
    p = _Parser(prog="torusflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run an experiment from a TOML config")
    s.add_argument("config")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("diagnose", help="diagnostics stream of a stored trajectory")
    s.add_argument("trajectory")
    s.add_argument("--delta-star", type=float, default=0.1)
    s.add_argument("--no-asymmetry", action="store_true")
    s.add_argument("--csv", help="comma-separated record keys to export as CSV")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("norms", help="X_T / Y_T norms of a stored trajectory")
    s.add_argument("trajectory")
    s.add_argument("--beta", type=float, default=0.5)
    s.add_argument("--kind", choices=("X", "Y", "both"), default="both")
    s.set_defaults(func=cmd_norms)

    s = sub.add_parser("stability", help="second-variation spectrum of a reference")
    s.add_argument("reference", help="reference kind (Lamella2D, ...) or a config file")
    s.add_argument("--radius", type=float, default=0.25)
    s.add_argument("--slab-width", type=float, default=0.5)
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--kmax", type=int, default=4)
    s.add_argument("--show", type=int, default=12, help="number of lowest modes to print")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("verify-all", help="run the acceptance suite")
    s.add_argument("--output-dir")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.set_defaults(func=cmd_verify_all)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .runner import PhaseError

    try:
        return args.func(args)
    except PhaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.original, NumericalFailure) else EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TorusFlowError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
