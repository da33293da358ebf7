"""Command-line entry point: ``mesgencov <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from .exceptions import ConfigError, DataError, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DATA_ENV = "MESGENCOV_DATA"


def _data_dir(arg: Optional[str]) -> Path:
    d = arg or os.environ.get(DATA_ENV)
    if not d:
        raise ConfigError(f"no data directory: pass --data-dir or set {DATA_ENV}")
    p = Path(d)
    if not p.is_dir():
        raise DataError(f"data directory {p} does not exist")
    return p


def format_matrix(C: np.ndarray, labels: List[str], digits: int = 4) -> str:
    """Fixed-width matrix print, rounded like ``round(cov, digits = 4)``."""
    C = np.round(np.asarray(C, dtype=float), digits)
    cells = [[f"{v:.{digits}f}" for v in row] for row in C]
    w = max([len(s) for s in labels] + [len(c) for row in cells for c in row])
    lw = max(len(s) for s in labels)
    lines = [" " * lw + " " + " ".join(f"{s:>{w}}" for s in labels)]
    for name, row in zip(labels, cells):
        lines.append(f"{name:<{lw}} " + " ".join(f"{c:>{w}}" for c in row))
    return "\n".join(lines)


def _emit_json(obj, path: Optional[str]) -> None:
    from .pipeline import dumps_json

    text = dumps_json(obj)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# -- commands ---------------------------------------------------------------


def cmd_gencov(args) -> int:
    from .pipeline import Dataset, default_config, get_cov, load_config, write_outputs
    from .stattests import render_multivariate, render_univariate

    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg.rng_seed = args.seed
    cfg.validate()
    data = Dataset.from_dir(_data_dir(args.data_dir))
    out_dir = Path(args.out_dir)
    result = get_cov(cfg, data, out_dir)
    files = write_outputs(result, out_dir)
    if not args.quiet:
        print("$univariateNormality")
        print(render_univariate(result.univariateTest))
        print()
        print("$multivariateNormality")
        print(render_multivariate(result.mvn.multivariate))
        print()
        print("$cov")
        print(format_matrix(result.cov, result.labels))
        print()
        for f in files:
            print(f"wrote {f}")
    return EXIT_OK


def _site_query(args):
    from .siteselect import SiteQuery

    return SiteQuery(args.start, args.end, args.count, args.min_weeks, args.comp, getattr(args, "region", "") or "",
                     getattr(args, "start_rank", 1))


def _print_selection(sel, args) -> None:
    print(" ".join(f'"{s}"' for s in sel.final_list))
    if args.json:
        _emit_json(sel.to_dict(), args.json)


def cmd_sites(args) -> int:
    from .ingest import load_weekly
    from .siteselect import get_sites, load_region_table

    q = _site_query(args)
    weekly = load_weekly(_data_dir(args.data_dir) / "weeklyConc.csv")
    table = load_region_table(args.regions) if args.regions else None
    with warnings.catch_warnings():
        # reported below from sel.warnings
        warnings.simplefilter("ignore")
        sel = get_sites(q, weekly, table)
    for w in sel.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _print_selection(sel, args)
    return EXIT_OK


def cmd_maxdist(args) -> int:
    from .ingest import load_site_meta, load_weekly
    from .siteselect import max_dist_sites

    q = _site_query(args)
    d = _data_dir(args.data_dir)
    if not (d / "sites.csv").exists():
        raise DataError(f"{d / 'sites.csv'} is required for maxdist")
    sel = max_dist_sites(q, load_weekly(d / "weeklyConc.csv"), load_site_meta(d / "sites.csv"))
    _print_selection(sel, args)
    return EXIT_OK


def cmd_lambertw(args) -> int:
    from .covariance import ResidualMatrix
    from .gaussianize import lambertw_transform

    rm = ResidualMatrix.from_csv(args.residuals)
    out = lambertw_transform(rm, plot_multi=args.plot_multi, write_mat=args.write_mat, out_dir=args.out_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out.newResiduals.to_csv(out_dir / "newResiduals.csv")
    print(out.mvn.render())
    print()
    print("$cov")
    print(format_matrix(out.cov, list(out.newResiduals.column_names)))
    if args.json:
        _emit_json(out.to_dict(), args.json)
    return EXIT_OK


def cmd_indep(args) -> int:
    from .covariance import ResidualMatrix
    from .stattests import independence_test

    rm = ResidualMatrix.from_csv(args.residuals)
    rep = independence_test(rm.values, alpha=args.alpha)
    print(rep.render())
    if args.json:
        _emit_json(rep.to_dict(), args.json)
    return EXIT_OK


def cmd_mesp(args) -> int:
    from .mespcheck import MespInstance, greedy_interchange, load_cov

    C, labels = load_cov(args.cov)
    S, value = greedy_interchange(MespInstance(C, args.s))
    print(f"s = {args.s} of n = {C.shape[0]}")
    print("S: " + " ".join(labels[i] for i in S))
    print(f"log det C[S,S] = {value:.10g}")
    if args.json:
        _emit_json({"s": args.s, "n": int(C.shape[0]), "S": S, "labels": [labels[i] for i in S], "logdet": value},
                   args.json)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .fit import ModelSpec
    from .synth import generate_fixture

    if not 0.0 <= args.missing_rate <= 1.0:
        raise ConfigError("--missing-rate must lie in [0, 1]")
    if args.delta < 0:
        raise ConfigError("--delta must be >= 0")
    fx = generate_fixture(
        seed=args.seed,
        n_sites=args.sites,
        n_months=args.months,
        missing_rate=args.missing_rate,
        start=args.start,
        spec=ModelSpec(args.r, args.k),
        sigma=args.sigma,
        delta=args.delta,
    )
    out = fx.write(args.out_dir)
    print(f"wrote {len(fx.weekly)} weekly and {len(fx.daily)} daily records for {len(fx.meta)} sites to {out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_query_args(p: argparse.ArgumentParser, last: str) -> None:
    p.add_argument("start", help='start timestamp, e.g. "01/01/83 00:00"')
    p.add_argument("end", help='end timestamp, e.g. "12/31/86 00:00"')
    p.add_argument("count", type=int, help="number of sites wanted")
    p.add_argument("min_weeks", type=int, help="minimum observed weeks per site")
    p.add_argument("comp", help="chemical, e.g. SO4")
    if last == "region":
        p.add_argument("region", nargs="?", default="", help='"N", "S", "W" or "" for all')
        p.add_argument("--regions", help="state,region CSV overriding the bundled table")
    else:
        p.add_argument("start_rank", nargs="?", type=int, default=1, help="rank (by data count) of the first site")
    p.add_argument("--data-dir", help=f"directory with weeklyConc.csv (default ${DATA_ENV})")
    p.add_argument("--json", metavar="PATH", help="also write the selection as JSON ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mesgencov", description="Covariance matrices for maximum-entropy sampling from precipitation-chemistry records.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gencov", help="run the full covariance workflow")
    p.add_argument("--config", help="JSON or TOML config (default: stock configuration)")
    p.add_argument("--data-dir", help=f"directory with weeklyConc.csv, preDaily.csv, sites.csv (default ${DATA_ENV})")
    p.add_argument("--out-dir", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="imputation seed (overrides rngSeed)")
    p.add_argument("--quiet", action="store_true", help="do not print tables")
    p.set_defaults(func=cmd_gencov)

    p = sub.add_parser("sites", help="sites with the most observed weeks")
    _add_query_args(p, "region")
    p.set_defaults(func=cmd_sites)

    p = sub.add_parser("maxdist", help="geographically spread sites (farthest-point greedy)")
    _add_query_args(p, "start_rank")
    p.set_defaults(func=cmd_maxdist)

    p = sub.add_parser("lambertw", help="Gaussianize residual columns and re-test normality")
    p.add_argument("residuals", help="residual CSV as written by gencov")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--plot-multi", action="store_true", help="write lambertw_qq.svg")
    p.add_argument("--write-mat", action="store_true", help="write covSites.mat")
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=cmd_lambertw)

    p = sub.add_parser("indep", help="likelihood-ratio test of column independence")
    p.add_argument("residuals", help="residual CSV as written by gencov")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=cmd_indep)

    p = sub.add_parser("mesp", help="greedy + interchange max-entropy subset of a covariance")
    p.add_argument("cov", help="covSites.mat or cov.csv")
    p.add_argument("s", type=int, help="subset size")
    p.add_argument("--json", metavar="PATH")
    p.set_defaults(func=cmd_mesp)

    p = sub.add_parser("synth", help="write a synthetic fixture with known parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sites", type=int, default=36)
    p.add_argument("--months", type=int, default=72)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--start", type=int, default=198301, help="first month as YYYYMM")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.0, help="heavy-tail parameter of the noise")
    p.add_argument("-r", type=int, default=1)
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
