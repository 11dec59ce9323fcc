"""Command-line front end: ``solitongas <command> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, default_config
from .ensemble import run_clt, run_corr, run_lln, trial_seed
from .errors import SolitonGasError
from .rhp import SpacetimePoint, averaged_solution, recover_field, recover_modsq
from .solitons import amplitude_bound, nsoliton_dressing, nsoliton_residue
from .spectral import draw_sample
from .verify import run_verify


def _global_options(parser: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="experiment config (JSON)")
    parser.add_argument("--out", default=d, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=d, help="worker processes")
    parser.add_argument("--seed", type=int, default=d, help="base seed (overrides config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solitongas",
                                     description="Random N-solitons and the soliton-gas limit.")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_options(p, suppress=True)
        return p

    p = add("sample", "draw one spectral sample")
    p.add_argument("-n", type=int, required=True, help="number of eigenvalues")
    p.add_argument("--index", type=int, default=0, help="trial index used in the seed")

    p = add("soliton-eval", "evaluate a random N-soliton on an x grid")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--x-min", type=float, default=-5.0)
    p.add_argument("--x-max", type=float, default=5.0)
    p.add_argument("--nx", type=int, default=101)
    p.add_argument("-t", type=float, action="append", help="time (repeatable), default 0")
    p.add_argument("--route", choices=["residue", "dressing", "both"], default="residue")

    p = add("solve-averaged", "solve the averaged problem at the config points or on a grid")
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--nx", type=int, default=21)
    p.add_argument("-t", type=float, action="append")

    add("lln", "mean deviation from the averaged field as N grows")
    add("clt", "scaled fluctuations against the Gaussian limit")
    add("corr", "two-point correlation against its limit")
    add("verify", "run the self-verification suite")
    add("default-config", "write the default config as JSON")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else default_config()
    return cfg.with_overrides(seed=args.seed, threads=args.threads, out_dir=args.out)


def _write_rows(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    print(f"wrote {path}")


def _cmd_sample(cfg, args):
    seed = trial_seed(cfg.seed, args.n, args.index)
    s = draw_sample(cfg.domain, cfg.interpolant, args.n, seed)
    rows = [(k, lam.real, lam.imag, c.real, c.imag)
            for k, (lam, c) in enumerate(zip(s.eigenvalues, s.constants))]
    _write_rows(Path(cfg.out_dir) / f"sample_N{args.n}_i{args.index}.csv",
                ["k", "lambda_re", "lambda_im", "c_re", "c_im"], rows)
    print(f"seed {seed}, amplitude bound {amplitude_bound(s):.6g}")
    return 0


def _cmd_soliton(cfg, args):
    s = draw_sample(cfg.domain, cfg.interpolant, args.n, trial_seed(cfg.seed, args.n, args.index))
    x = np.linspace(args.x_min, args.x_max, args.nx)
    rows = []
    for t in args.t or [0.0]:
        res = nsoliton_residue(s, x, t) if args.route != "dressing" else None
        dre = nsoliton_dressing(s, x, t) if args.route != "residue" else None
        psi = res if res is not None else dre
        for j in range(x.size):
            row = [x[j], t, psi[j].real, psi[j].imag, abs(psi[j])]
            if args.route == "both":
                row.append(abs(res[j] - dre[j]))
            rows.append(row)
    header = ["x", "t", "psi_re", "psi_im", "abs_psi"]
    if args.route == "both":
        header.append("route_difference")
    _write_rows(Path(cfg.out_dir) / f"soliton_N{args.n}_i{args.index}.csv", header, rows)
    return 0


def _cmd_averaged(cfg, args):
    grid = cfg.grid()
    if args.x_min is not None and args.x_max is not None:
        pts = [(x, t) for t in (args.t or [0.0]) for x in np.linspace(args.x_min, args.x_max, args.nx)]
    else:
        pts = list(cfg.points)
    rows = []
    for x, t in pts:
        sol = averaged_solution(cfg.domain, cfg.interpolant, grid, SpacetimePoint(x, t))
        psi = recover_field(sol)
        rows.append([x, t, psi.real, psi.imag, abs(psi) ** 2, recover_modsq(sol),
                     sol.residual, sol.condition])
    _write_rows(Path(cfg.out_dir) / "averaged.csv",
                ["x", "t", "psi_re", "psi_im", "modsq", "modsq_from_dx", "sie_residual",
                 "condition"], rows)
    return 0


def _cmd_experiment(runner):
    def run(cfg, args):
        summary = runner(cfg)
        for path in summary.write(cfg.out_dir):
            print(f"wrote {path}")
        for name, ok in summary.checks.items():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        if not summary.valid:
            print("run INVALID: more than 1% of trials failed", file=sys.stderr)
            return 2
        return 0
    return run


def _cmd_verify(cfg, args):
    report = run_verify(cfg)
    print(report.text())
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_report.json").write_text(report.to_json())
    return 0 if report.passed else 1


def _cmd_default(cfg, args):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config.json"
    path.write_text(cfg.to_json() + "\n")
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "sample": _cmd_sample,
    "soliton-eval": _cmd_soliton,
    "solve-averaged": _cmd_averaged,
    "lln": _cmd_experiment(run_lln),
    "clt": _cmd_experiment(run_clt),
    "corr": _cmd_experiment(run_corr),
    "verify": _cmd_verify,
    "default-config": _cmd_default,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg, args)
    except SolitonGasError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
