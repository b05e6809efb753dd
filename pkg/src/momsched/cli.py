"""``sched`` command line: run, preset, bound, oracle, plot.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import analysis
from .costs import CostError
from .graph import GraphError
from .harness import config as cfgmod
from .harness.plot import PlotError, PlotSpec, emit_plot
from .harness.presets import UnknownPresetError, preset
from .harness.runner import BoundWarning, build_setup, run_experiment, setup_bound
from .protocol import Trace

EXIT_CONFIG, EXIT_RUNTIME = 1, 2


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _print_results(results) -> None:
    for r in results:
        s = r.summary
        print(f"[{s['variant']}] rounds={s['rounds']} final_residual={_fmt(s['final_residual'])} "
              f"max_rel_feas_gap={_fmt(s['max_rel_feas_gap'])} eta_bar={_fmt(s['eta_bar'])} "
              f"out={r.out_dir}")


def cmd_run(args) -> int:
    cfg = cfgmod.load_config(args.config, args.seed)
    base = Path(args.config).resolve().parent
    _print_results(run_experiment(cfg, args.out, args.workers, base_dir=base))
    return 0


def cmd_preset(args) -> int:
    cfg = preset(args.name)
    cfg = cfgmod.load_env_seed(cfg)
    if args.seed is not None:
        cfg = cfgmod.replace_seed(cfg, args.seed)
    _print_results(run_experiment(cfg, args.out, args.workers))
    return 0


def cmd_bound(args) -> int:
    cfg = cfgmod.load_config(args.config, args.seed)
    base = Path(args.config).resolve().parent
    for label, vcfg in cfg.variants():
        setup = build_setup(vcfg, base)
        bound, B = setup_bound(setup)
        prefix = f"{label}." if label else ""
        if bound is None:
            print(f"{prefix}eta_bar=none")
            continue
        for key in ("kappa", "K", "lambda2", "lambdaN", "u", "tau_bar", "eta_bar", "eta_tau_bar"):
            print(f"{prefix}{key}={_fmt(getattr(bound, key))}")
        print(f"{prefix}bound_window={B}")
        print(f"{prefix}eta={_fmt(vcfg.eta)}")
        print(f"{prefix}eta_within_bound={'true' if vcfg.eta < bound.eta_tau_bar else 'false'}")
    return 0


def cmd_oracle(args) -> int:
    cfg = cfgmod.load_config(args.config, args.seed)
    setup = build_setup(cfg, Path(args.config).resolve().parent)
    opt = analysis.solve_oracle(setup.problem)
    print(f"f_star={_fmt(opt.f_star)}")
    print(f"lambda_star={_fmt(opt.lambda_star)}")
    print(f"feas_gap={_fmt(analysis.feasibility_gap(setup.problem, opt.x_star))}")
    print(f"dispersion={_fmt(analysis.gradient_dispersion(setup.problem, opt.x_star))}")
    for i, v in enumerate(opt.x_star):
        print(f"x_{i}={_fmt(float(v))}")
    return 0


def cmd_plot(args) -> int:
    trace = Trace.from_csv(args.trace)
    out = Path(args.out) if args.out else Path(args.trace).with_name(f"{args.series}.svg")
    emit_plot(trace, PlotSpec(args.series, log=args.log), out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sched", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_preset)

    for name, func, text in (("bound", cmd_bound, "print the step-rate bound"),
                             ("oracle", cmd_oracle, "print the centralized optimum")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("plot", help="plot a series from a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--series", required=True, choices=("residual", "states", "momenta", "feas_gap"))
    p.add_argument("--log", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("always", BoundWarning)
        warnings.showwarning = lambda msg, cat, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            return args.func(args)
        except (cfgmod.ConfigError, UnknownPresetError, CostError, GraphError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
            print(f"config error: {msg}", file=sys.stderr)
            return EXIT_CONFIG
        except Exception as exc:  # noqa: BLE001 -- any failure during a run maps to exit 2
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
