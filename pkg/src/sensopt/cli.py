"""sensopt command line.

Exit status: 0 success, 1 usage/config/I-O error, 2 infeasible scenario,
3 validation failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from .adaptive import last_quartile_std, run_adaptive, write_records
from .link_model import capacities, consumed_energy, mean_capacities, throughput
from .optimizer import InfeasibleError, max_throughput_L, optimize_tau, optimize_tau_tf
from .simenv import simulate, summarize, write_trace
from .validation import run_all

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 1, 2, 3

SWEEP_HEADER = ("tau", "tau_over_T", "rate", "alpha", "nce")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _caps(cfg, seed):
    """Nominal capacities, or seeded fading averages under Rayleigh mode."""
    scn = cfg.scenario
    if scn.fading.mode == "none":
        return None
    return mean_capacities(scn, cfg.mc_samples, np.random.default_rng(seed))


def _c0(cfg, caps):
    return (caps or capacities(cfg.scenario))[0]


def _saturated_block(cfg, caps):
    best = max_throughput_L(cfg.scenario, caps=caps, extension=cfg.extension)
    return {
        "L": best.L,
        "L_norm": best.L / _c0(cfg, caps),
        "tau_opt": best.tau_opt,
        "alpha_opt": best.alpha_opt,
        "nce": best.nce,
        "np_star": best.np_star,
    }


def cmd_sweep(cfg, args):
    scn = cfg.scenario
    T = scn.slot_t
    start = 0.001 * T if args.tau_start is None else args.tau_start
    end = 0.999 * T if args.tau_end is None else args.tau_end
    if not (0.0 < start < T and 0.0 < end < T) or end < start:
        raise UsageError(f"tau range must satisfy 0 < tau_start <= tau_end < T={T}")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.points == 1:
        taus = np.array([start])
    else:
        taus = np.linspace(start, end, args.points)
    caps = _caps(cfg, args.seed)

    if args.np_list:
        scns = [(n, scn.with_channels(n, cfg.extension)) for n in args.np_list]
        header = ["tau", "tau_over_T"]
        for n, _ in scns:
            header += [f"rate_np{n}", f"alpha_np{n}", f"nce_np{n}"]
    else:
        scns = [(scn.n_p, scn)]
        header = list(SWEEP_HEADER)

    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in taus:
            row = [repr(float(t)), repr(float(t / T))]
            for _, s in scns:
                p = throughput(s, float(t), caps=caps)
                row += [repr(p.rate), p.alpha, repr(p.nce)]
            w.writerow(row)
    return EXIT_OK


def cmd_optimize(cfg, args):
    scn = cfg.scenario
    caps = _caps(cfg, args.seed)
    res = optimize_tau(scn, caps=caps)
    c0 = _c0(cfg, caps)
    sat = _saturated_block(cfg, caps)
    _emit({
        "tau_opt": res.tau_opt,
        "tau_opt_over_T": res.tau_opt / scn.slot_t,
        "rate_max": res.rate_max,
        "rate_max_norm": res.rate_max / c0,
        "alpha_opt": res.alpha_at_opt,
        "nce": res.nce_at_opt,
        "energy_j": consumed_energy(scn, res.tau_opt, cfg.power.p_sense, cfg.power.p_ho),
        "tau_min": scn.tau_min,
        "L": sat["L"],
        "np_star": sat["np_star"],
        "saturated": sat,
    })
    return EXIT_OK


def cmd_tradeoff(cfg, args):
    caps = _caps(cfg, args.seed)
    r = optimize_tau_tf(cfg.scenario, args.tf, caps=caps, extension=cfg.extension)
    c0 = _c0(cfg, caps)
    _emit({
        "tf": r.tf,
        "alpha_bar": r.alpha_bar,
        "tau_opt_tf": r.tau_opt_tf,
        "rate_tf": r.rate_tf,
        "rate_tf_norm": r.rate_tf / c0,
        "nce_tf": r.nce_tf,
        "L": r.L,
        "saturated": _saturated_block(cfg, caps),
    })
    return EXIT_OK


def cmd_learn(cfg, args):
    cfg = cfgmod.with_seed(cfg, args.seed)
    a = cfg.adaptive
    if args.cycles is not None:
        a = replace(a, cycles=args.cycles)
    scn = cfg.scenario
    res = run_adaptive(scn, a)
    if args.out is not None:
        with _open_out(args.out) as fh:
            write_records(res.records, fh)
    caps = _caps(cfg, a.seed)
    best = optimize_tau(scn, caps=caps)
    _emit({
        "seed": a.seed,
        "cycles": a.cycles,
        "tau_learned": res.tau_learned,
        "rate_learned": res.rate_learned,
        "rate_learned_analytic": throughput(scn, res.tau_learned, caps=caps).rate,
        "tau_opt": best.tau_opt,
        "rate_max": best.rate_max,
        "warmup_step": res.warmup_step,
        "last_quartile_std": last_quartile_std(res.records),
    })
    return EXIT_OK


def cmd_simulate(cfg, args):
    scn = cfg.scenario
    if args.tau is None:
        tau = optimize_tau(scn, caps=_caps(cfg, args.seed)).tau_opt
    else:
        tau = args.tau
    if not 0.0 < tau < scn.slot_t:
        raise UsageError(f"--tau must lie in (0, T={scn.slot_t})")
    if args.slots < 1:
        raise UsageError("--slots must be >= 1")
    batch = simulate(scn, tau, args.slots, np.random.default_rng(args.seed), args.decision_mode)
    if args.out is not None:
        with _open_out(args.out) as fh:
            write_trace(batch, fh)
    out = {"tau": tau, "seed": args.seed}
    out.update(summarize(batch))
    p = throughput(scn, tau, caps=_caps(cfg, args.seed))
    out["analytic_rate"] = p.rate
    out["analytic_nce"] = p.nce
    _emit(out)
    return EXIT_OK


def cmd_validate(cfg, args):
    checks = run_all(cfg.scenario, cfg.adaptive.kc, seed=args.seed, slots=args.slots)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (defaults when omitted)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")

    p = _Parser(prog="sensopt", description="Sensing-time optimisation for an energy-detecting secondary user.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", parents=[common], help="throughput versus sensing time as CSV")
    s.add_argument("--tau-start", type=float, help="first sensing time in seconds (default 0.001 T)")
    s.add_argument("--tau-end", type=float, help="last sensing time in seconds (default 0.999 T)")
    s.add_argument("--points", type=int, default=1000)
    s.add_argument("--np-list", type=lambda v: [int(x) for x in v.split(",")],
                   help="comma-separated channel counts to overlay, e.g. 1,3,10")
    s.add_argument("--out", help="output CSV (stdout when omitted)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("optimize", parents=[common], help="throughput-optimal sensing time as JSON")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("tradeoff", parents=[common], help="rate/energy tradeoff at a given factor")
    s.add_argument("--tf", type=float, required=True, help="tradeoff factor in [0, 1]")
    s.set_defaults(func=cmd_tradeoff)

    s = sub.add_parser("learn", parents=[common], help="run the model-free learning loop")
    s.add_argument("--cycles", type=int)
    s.add_argument("--out", help="cycle trace CSV")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("simulate", parents=[common], help="slot-level Monte Carlo run")
    s.add_argument("--tau", type=float, help="sensing time in seconds (default: analytic optimum)")
    s.add_argument("--slots", type=int, default=10_000)
    s.add_argument("--decision-mode", choices=("closed_form", "sample_level"), default="closed_form")
    s.add_argument("--out", help="slot trace CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("validate", parents=[common], help="Monte Carlo and finite-difference self-checks")
    s.add_argument("--slots", type=int, default=200_000)
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        cfg = cfgmod.load(args.config)
        return args.func(cfg, args)
    except InfeasibleError as e:
        print(f"sensopt: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, cfgmod.ConfigError, OSError, ValueError) as e:
        print(f"sensopt: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
