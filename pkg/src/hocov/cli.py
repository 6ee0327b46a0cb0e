"""Command-line front end for sweeps, convergence checks, and series export.

Exit codes: 0 clean completion, 2 usage error (argparse), 3 sweep finished
but at least one grid point tripped the truncation guard, 4 convergence
check exceeded its drift threshold.
"""

from __future__ import annotations

import argparse
import sys

from .sweep import (
    SweepConfig,
    config_from_file,
    convergence_check,
    emit_plot_data,
    read_csv,
    run_sweep,
    write_csv,
)

EXIT_OK = 0
EXIT_TRUNCATION = 3
EXIT_DRIFT = 4


def _parse_dims(text: str):
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("dims must be three integers: pump,A,B")
    return tuple(int(p) for p in parts)


def _parse_hierarchy(text: str):
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise argparse.ArgumentTypeError("hierarchy must list at least one level")
    return tuple(int(p) for p in parts)


def _add_sweep_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH",
                     help="key=value parameter file; flags override it")
    sub.add_argument("--k", type=int, default=None, help="signal photon order")
    sub.add_argument("--l", type=int, default=None, help="idler photon order")
    sub.add_argument("--kappa", type=float, default=None, help="coupling strength")
    sub.add_argument("--alpha-p", type=float, default=None,
                     help="pump coherent amplitude")
    sub.add_argument("--dims", type=_parse_dims, default=None, metavar="P,A,B",
                     help="Fock truncations per mode")
    sub.add_argument("--xi-max", type=float, default=None,
                     help="largest xi = kappa t alpha_p")
    sub.add_argument("--xi-step", type=float, default=None, help="xi grid spacing")
    sub.add_argument("--hierarchy", type=_parse_hierarchy, default=None,
                     metavar="1,2,3", help="hierarchy levels n to evaluate")
    sub.add_argument("--with-nz", action="store_true", default=None,
                     help="also evaluate the variance-product comparator")
    sub.add_argument("--tol", type=float, default=None,
                     help="integrator accuracy target")
    sub.add_argument("--workers", type=int, default=None,
                     help="thread count for criteria evaluation (0 = serial)")


def _build_config(args) -> SweepConfig:
    overrides = {
        "k": args.k,
        "l": args.l,
        "kappa": args.kappa,
        "alpha_p": args.alpha_p,
        "dims": args.dims,
        "xi_max": args.xi_max,
        "xi_step": args.xi_step,
        "hierarchy": args.hierarchy,
        "with_nz": args.with_nz,
        "tol": args.tol,
        "workers": args.workers,
    }
    if args.config:
        return config_from_file(args.config, **overrides)
    return SweepConfig(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    out = args.out or config.out
    if not out:
        print("error: no output path (pass --out or set out= in the config)",
              file=sys.stderr)
        return 2
    result = run_sweep(config, keep_states=False)
    write_csv(result, out)
    n_points = len(result.xi_grid)
    n_levels = len(config.hierarchy)
    flagged = sum(1 for row in result.rows if row.truncation_flag != "ok")
    status = "clean" if flagged == 0 else f"{flagged} rows flagged"
    print(f"wrote {out}: {n_points} xi points x {n_levels} hierarchy "
          f"levels ({status})")
    return EXIT_OK if flagged == 0 else EXIT_TRUNCATION


def _cmd_check(args) -> int:
    config = _build_config(args)
    report = convergence_check(config, stride=args.stride)
    verdict = "pass" if report["pass"] else "FAIL"
    print(f"convergence {verdict}: max |drift(nu_minus)| = "
          f"{report['max_drift']:.3e} over {len(report['points'])} subsampled "
          f"points (threshold {report['threshold']:.0e}, dims "
          f"{report['base_dims']} -> {report['boosted_dims']})")
    if args.out:
        lines = ["# xi\tn\tdrift"]
        for point in report["points"]:
            lines.append(f"{point['xi']:.12g}\t{point['n']}\t{point['drift']:.12g}")
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return EXIT_OK if report["pass"] else EXIT_DRIFT


def _cmd_plotdata(args) -> int:
    rows = read_csv(args.infile)
    series = tuple(s for s in args.series.split(",") if s)
    emit_plot_data(rows, args.out, series=series)
    print(f"wrote {args.out}: columns xi, {', '.join(series)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hocov",
        description="Higher-order covariance entanglement criteria for "
                    "partially degenerate down-conversion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep_p = sub.add_parser("sweep", help="run a sweep and write the CSV")
    _add_sweep_options(sweep_p)
    sweep_p.add_argument("--out", default=None, metavar="PATH",
                         help="output CSV path (falls back to out= in the config)")
    sweep_p.set_defaults(func=_cmd_sweep)

    check_p = sub.add_parser("check", help="convergence check against "
                                           "boosted mode truncations")
    _add_sweep_options(check_p)
    check_p.add_argument("--stride", type=int, default=5,
                         help="subsample every STRIDE-th grid point")
    check_p.add_argument("--out", default=None, metavar="PATH",
                         help="optional per-point drift report")
    check_p.set_defaults(func=_cmd_check)

    plot_p = sub.add_parser("plotdata", help="extract xi-indexed series "
                                             "from a sweep CSV")
    plot_p.add_argument("--in", dest="infile", required=True, metavar="PATH",
                        help="sweep CSV produced by the sweep command")
    plot_p.add_argument("--out", required=True, metavar="PATH",
                        help="tab-separated series file")
    plot_p.add_argument("--series", default="nu1,nu2,nu3",
                        help="comma list: nu<n>, ineq7_<n>, ineq8_<n>, "
                             "lemma1_<n>, detc_<n>, nz")
    plot_p.set_defaults(func=_cmd_plotdata)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
