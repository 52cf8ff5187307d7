"""Command-line front end.

Subcommands map one-to-one onto the experiment harness:

    uwbsim recon     -- reconstruction-quality sweep over R_r
    uwbsim locate2d  -- positioning-error map over a 2-D grid of tag cells
    uwbsim locate3d  -- positioning error at random in-room 3-D tags
    uwbsim selftest  -- built-in oracle/invariant checks

Every flag has a config-file equivalent (see uwbsim.config); precedence is
defaults < file < UWBSIM_* environment < flags.  Exit codes: 0 success,
1 runtime failure, 2 invalid configuration (the message names the offending
key).  CSV output is written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import sys

from . import selftest
from .config import (
    SCHEMA,
    _parse_value,
    build_spec,
    cli_options,
    env_overrides,
    load_config_file,
    merge_layers,
)
from .errors import ConfigError, UwbSimError
from .experiments import POSITION_ALGS, RECON_ALGS, export_csv, run_experiment


def _parse_via_schema(section: str, key: str):
    """argparse type= callable that reuses the config-schema parser."""
    parser = SCHEMA[section][key][0]

    def convert(raw: str):
        try:
            return parser(raw)
        except (TypeError, ValueError) as exc:
            raise argparse.ArgumentTypeError(f"{section}.{key}: {exc}") from None

    return convert


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="INI config file (flags override it)")
    p.add_argument("--out", metavar="CSV", help="write results to this CSV path")
    p.add_argument("--threads", type=_parse_via_schema("cli", "threads"), metavar="N",
                   help="worker threads, 0 = all cores (results independent of N)")
    p.add_argument("--seed", type=_parse_via_schema("experiments", "seed"), metavar="N",
                   help="master seed for all random draws")
    p.add_argument("--snr", type=_parse_via_schema("experiments", "snr_db"), metavar="DB",
                   help="signal-domain SNR in dB")
    p.add_argument("--trials", type=_parse_via_schema("experiments", "trials"), metavar="N",
                   help="independent noise trials")
    p.add_argument("--n", type=_parse_via_schema("signal_model", "n"), metavar="N",
                   help="samples per frame")
    p.add_argument("--dt", type=_parse_via_schema("signal_model", "dt"), metavar="SEC",
                   help="frame sample spacing in seconds")
    p.add_argument("--pulse-sigma", type=_parse_via_schema("signal_model", "pulse_sigma"),
                   metavar="SEC", help="Gaussian pulse width parameter in seconds")
    p.add_argument("--channel", type=_parse_via_schema("signal_model", "channel"),
                   metavar="NAME", help="channel preset (single, sparse, dense)")
    p.add_argument("--quiet", action="store_true", help="suppress the summary table")


def _add_positioning(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rr", type=_parse_via_schema("experiments", "rr"), metavar="R",
                   help="sampling reduction ratio M/N in (0, 1]")
    p.add_argument("--algs", type=_parse_via_schema("experiments", "algorithms"),
                   metavar="LIST", help=f"comma list from {', '.join(POSITION_ALGS)}")
    p.add_argument("--mode", metavar="ALG",
                   help="run a single algorithm (shorthand for --algs ALG)")
    p.add_argument("--drift-ppm", type=float, metavar="PPM",
                   help="sampling-clock drift as ppm of the nominal round count "
                        "(30000 = the rounds run 3%% long)")
    p.add_argument("--interleave", type=_parse_via_schema("experiments", "interleave"),
                   metavar="auto|true|false",
                   help="refresh the position fix after every reconstruction update")
    p.add_argument("--anchors", metavar="SPEC",
                   help="station positions 'x,y[,z];...' or a file with the same syntax")
    p.add_argument("--bounds", metavar="SPEC",
                   help="tag service region 'lo,hi;lo,hi[;lo,hi]' in mm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwbsim",
        description="Simulation toolkit for TDOA-based UWB indoor positioning.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("recon", help="reconstruction-quality sweep over R_r",
                       description="Sweep reconstruction quality (P_re and arrival "
                                   "error) over reduction ratios for the selected "
                                   "algorithms.")
    _add_common(p)
    p.add_argument("--rr", type=_parse_via_schema("experiments", "rr"), metavar="LIST",
                   help="comma list of reduction ratios M/N in (0, 1]")
    p.add_argument("--algs", type=_parse_via_schema("experiments", "algorithms"),
                   metavar="LIST", help=f"comma list from {', '.join(RECON_ALGS)}")
    p.set_defaults(func=cmd_recon)

    p = sub.add_parser("locate2d", help="positioning-error map over a 2-D grid",
                       description="Map positioning error over a 2-D grid of tag "
                                   "cells inside the service region.")
    _add_common(p)
    _add_positioning(p)
    p.add_argument("--resolution", type=_parse_via_schema("experiments", "resolution"),
                   metavar="N", help="grid cells per axis")
    p.set_defaults(func=cmd_locate2d)

    p = sub.add_parser("locate3d", help="positioning error at random 3-D tags",
                       description="Measure positioning error at random in-room "
                                   "3-D tag positions; without --anchors the four "
                                   "reference stations of the bundled room are used.")
    _add_common(p)
    _add_positioning(p)
    p.add_argument("--tags", type=_parse_via_schema("experiments", "tags"), metavar="N",
                   help="number of random tag positions")
    p.set_defaults(func=cmd_locate3d)

    p = sub.add_parser("selftest", help="run the built-in oracle/invariant checks",
                       description="Run fast oracle and invariant checks; exits 1 "
                                   "if any check fails.")
    p.add_argument("--list", action="store_true", help="print check names and exit")
    p.add_argument("checks", nargs="*", metavar="NAME",
                   help="run only these checks (default: all)")
    p.set_defaults(func=cmd_selftest)
    return parser


# flag destination -> (section, key) for flags that mirror the config schema
_FLAG_MAP = {
    "out": ("cli", "out"),
    "threads": ("cli", "threads"),
    "seed": ("experiments", "seed"),
    "snr": ("experiments", "snr_db"),
    "trials": ("experiments", "trials"),
    "rr": ("experiments", "rr"),
    "algs": ("experiments", "algorithms"),
    "resolution": ("experiments", "resolution"),
    "tags": ("experiments", "tags"),
    "interleave": ("experiments", "interleave"),
    "n": ("signal_model", "n"),
    "dt": ("signal_model", "dt"),
    "pulse_sigma": ("signal_model", "pulse_sigma"),
    "channel": ("signal_model", "channel"),
    "anchors": ("tdoa", "anchors"),
    "bounds": ("tdoa", "bounds"),
}


def _flag_layer(args: argparse.Namespace) -> dict:
    layer: dict = {}
    for dest, (section, key) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if isinstance(value, str):
            # --anchors/--bounds/--out arrive raw; parse like a file value
            value = _parse_value(section, key, value)
        layer.setdefault(section, {})[key] = value
    mode = getattr(args, "mode", None)
    if mode is not None:
        if "algorithms" in layer.get("experiments", {}):
            raise ConfigError("give either --mode or --algs, not both")
        layer.setdefault("experiments", {})["algorithms"] = (mode,)
    drift_ppm = getattr(args, "drift_ppm", None)
    if drift_ppm is not None:
        layer.setdefault("experiments", {})["drift_scale"] = 1.0 + drift_ppm * 1e-6
    return layer


def _run(kind: str, args: argparse.Namespace) -> int:
    file_layer = load_config_file(args.config) if args.config else {}
    merged = merge_layers(file_layer, env_overrides(), _flag_layer(args))
    spec = build_spec(kind, merged)
    opts = cli_options(merged)

    if kind != "recon_1d":
        try:
            spec.anchor_set()
        except (ValueError, UwbSimError) as exc:
            raise ConfigError(f"tdoa.anchors: {exc}") from exc

    table = run_experiment(spec, threads=opts["threads"])
    if opts["out"]:
        export_csv(table, opts["out"])
    if not args.quiet:
        _print_summary(kind, spec, table)
        if opts["out"]:
            print(f"wrote {len(table)} rows to {opts['out']}")
    return 0


def _print_summary(kind: str, spec, table) -> None:
    import numpy as np

    if kind == "recon_1d":
        print(f"{'algorithm':<10s} {'R_r':>6s} {'median P_re':>12s} {'median |err|':>13s}")
        for alg in spec.algorithms:
            for rr in spec.rr_grid:
                p_re = table.median("p_re", algorithm=alg, r_r=rr)
                err = table.median("arrival_err_bins", algorithm=alg, r_r=rr)
                print(f"{alg:<10s} {rr:6.3f} {p_re:12.4f} {err:10.2f} bins")
        return
    print(f"{'algorithm':<10s} {'mean':>9s} {'median':>9s} {'max':>9s} {'failed':>7s}")
    for alg in spec.algorithms:
        vals = table.values("error_mm", algorithm=alg)
        finite = vals[np.isfinite(vals)]
        failed = int(vals.size - finite.size)
        if finite.size:
            print(f"{alg:<10s} {finite.mean():7.2f}mm {np.median(finite):7.2f}mm "
                  f"{finite.max():7.2f}mm {failed:7d}")
        else:
            print(f"{alg:<10s} {'-':>9s} {'-':>9s} {'-':>9s} {failed:7d}")


def cmd_recon(args: argparse.Namespace) -> int:
    return _run("recon_1d", args)


def cmd_locate2d(args: argparse.Namespace) -> int:
    return _run("grid_2d", args)


def cmd_locate3d(args: argparse.Namespace) -> int:
    return _run("room_3d", args)


def cmd_selftest(args: argparse.Namespace) -> int:
    if args.list:
        for name in selftest.check_names():
            print(name)
        return 0
    try:
        ok = selftest.run(args.checks or None)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UwbSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
