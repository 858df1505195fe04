"""Command-line entry point.

Subcommands
-----------
loss-dist   loss distributions of the coupled and uncoupled systems
govern      quarterly governance decisions and performance indices
riccati     value-function coefficients and cooperation rates on the grid
validate    invariant suite (oracles, reductions, moment checks)

Exit status: 0 success, 2 usage error, 3 scenario parse error,
4 infeasible scenario, 5 numerical blow-up, 6 failed validation.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .errors import DomainError, NonFiniteEnsembleError, RiccatiBlowupError, ScenarioError
from .governance import run_baseline, run_governance, run_many
from .io import write_table
from .kernels import default_backend, set_threads
from .lq_control import rates_from_riccati, solve_riccati
from .risk_metrics import default_m, loss_distribution, systemic_risk_probability
from .scenario import load
from .sde_engine import simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_BLOWUP = 5
EXIT_VALIDATION = 6

LOSS_COLUMNS = ("k", "count", "probability")
DECISION_COLUMNS = ("j", "n_a", "n_l", "strategy", "eta", "se", "mean_alpha", "mean_gamma",
                    "cost", "satisfied")
INDEX_COLUMNS = ("N_SR", "C_c", "C_alpha", "C_gamma")
RICCATI_COLUMNS = ("t", "a", "b", "c", "d", "alpha", "gamma", "g", "h")
VALIDATION_COLUMNS = ("check", "passed", "measured", "bound", "detail")


def _scenario(args):
    if args.scenario is None:
        raise ScenarioError(f"'{args.command}' needs --scenario <file>")
    return load(args.scenario, overrides=args.set, seed=args.seed, paths=args.paths, dt=args.dt)


def _meta(args, sc, **extra):
    meta = {"subcommand": args.command, "scenario": os.path.basename(args.scenario),
            "seed": sc.config["simulation"]["seed"], "backend": default_backend()}
    meta.update(extra)
    return meta


def cmd_loss_dist(args) -> int:
    sc = _scenario(args)
    s = sc.config["simulation"]
    params = sc.params()
    window = (s["t0"], s["t1"])
    runs = {
        "coupled": dict(rates=sc.rates(), ideal=sc.ideal(), gbm_drift=False),
        "uncoupled": dict(rates=None, ideal=None, gbm_drift=True),
    }
    for variant, kw in runs.items():
        ens = simulate(params, kw["rates"], kw["ideal"], s["t0"], s["t1"], None, s["paths"],
                       s["dt"], s["seed"], gbm_drift=kw["gbm_drift"])
        ens.require_valid()
        dist = loss_distribution(ens, window)
        sr = systemic_risk_probability(ens, window)
        write_table(os.path.join(args.out, f"loss_{variant}.csv"), LOSS_COLUMNS, dist.rows(),
                    sc.config, _meta(args, sc, variant=variant))
        print(f"{sc.name} {variant}: P(k>={default_m(params.n_banks)})={sr.probability:.4f} "
              f"(se {sr.standard_error:.4f}) P(k>=9)={dist.tail_mass(9):.4f}")
    return EXIT_OK


def _decision_rows(record):
    return [(d.j, d.n_a, d.n_l, d.strategy, d.eta.probability, d.eta.standard_error,
             d.mean_alpha, d.mean_gamma, d.cost, d.satisfied) for d in record.decisions]


def _write_record(args, sc, label, record):
    meta = _meta(args, sc, run=label, truncated=record.truncated)
    write_table(os.path.join(args.out, f"decisions_{label}.csv"), DECISION_COLUMNS,
                _decision_rows(record), sc.config, meta)
    write_table(os.path.join(args.out, f"indices_{label}.csv"), INDEX_COLUMNS,
                [record.indices], sc.config, meta)
    n_ok = sum(d.satisfied for d in record.decisions)
    idx = ", ".join(f"{v:.4g}" for v in record.indices)
    print(f"{sc.name} {label}: ({idx}) satisfied {n_ok}/{len(record.decisions)}")


def _write_multiseed(args, sc, label, summary):
    rows = [(str(s), *row) for s, row in zip(summary.seeds, summary.indices)]
    rows.append(("mean", *summary.mean))
    rows.append(("std", *summary.std))
    write_table(os.path.join(args.out, f"multiseed_{label}.csv"), ("seed",) + INDEX_COLUMNS,
                rows, sc.config, _meta(args, sc, run=label, seeds=list(summary.seeds)))
    print(f"{sc.name} {label} mean over {len(summary.seeds)} seeds: "
          + ", ".join(f"{v:.4g}" for v in summary.mean))


def cmd_govern(args) -> int:
    sc = _scenario(args)
    g = sc.config["governance"]
    for label in g["strategy_sets"]:
        scn = sc.governance(label)
        _write_record(args, sc, label, run_governance(scn))
        if g["seeds"]:
            _write_multiseed(args, sc, label, run_many(scn, g["seeds"])[1])
    if g["baseline"]:
        scn = sc.governance(g["strategy_sets"][0])
        _write_record(args, sc, "baseline", run_baseline(scn))
        if g["seeds"]:
            _write_multiseed(args, sc, "baseline", run_many(scn, g["seeds"], baseline=True)[1])
    return EXIT_OK


def cmd_riccati(args) -> int:
    sc = _scenario(args)
    r = sc.config["riccati"]
    p = sc.params().frozen(r["at"])
    at = r["at"]
    w = sc.weights()
    sol = solve_riccati(w, p.rho_a(at), p.rho_l(at), p.sigma_a(at), p.sigma_l(at), r["T1"],
                        r["n_steps"])
    rates = rates_from_riccati(sol, w, p.rho_a(at), p.rho_l(at))
    rows = zip(sol.grid, sol.a, sol.b, sol.c, sol.d, rates.alpha, rates.gamma, rates.g, rates.h)
    write_table(os.path.join(args.out, "riccati.csv"), RICCATI_COLUMNS,
                [tuple(float(v) for v in row) for row in rows], sc.config, _meta(args, sc))
    a0, b0, c0, d0 = sol.coefficients(0.0)
    print(f"{sc.name}: a(0)={a0:.10g} b(0)={b0:.10g} c(0)={c0:.10g} d(0)={d0:.10g}")
    return EXIT_OK


def cmd_validate(args, riccati_hook=None) -> int:
    from . import validation

    kw = {} if riccati_hook is None else {"riccati_hook": riccati_hook}
    checks = validation.run_suite(**kw)
    for c in checks:
        print(c.line())
    if args.out is not None:
        rows = [(c.name, c.passed, c.measured, c.bound, c.detail.replace(",", ";"))
                for c in checks]
        write_table(os.path.join(args.out, "validation.csv"), VALIDATION_COLUMNS, rows,
                    {}, {"subcommand": "validate", "backend": default_backend()})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario YAML file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="master seed (overrides simulation.seed)")
    common.add_argument("--paths", type=int, help="Monte Carlo paths (simulation.paths)")
    common.add_argument("--dt", type=float, help="time step (simulation.dt)")
    common.add_argument("--threads", type=int, help="cap on worker threads; results do not change")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario key, e.g. model.sigma_a=0.5 (repeatable)")
    parser = argparse.ArgumentParser(prog="sysrisk", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("loss-dist", "coupled and uncoupled loss distributions"),
                        ("govern", "quarterly governance run"),
                        ("riccati", "dump Riccati coefficients and cooperation rates"),
                        ("validate", "run the invariant suite")):
        sub.add_parser(name, parents=[common], help=help_)
    return parser


COMMANDS = {"loss-dist": cmd_loss_dist, "govern": cmd_govern, "riccati": cmd_riccati,
            "validate": cmd_validate}


def main(argv=None, *, riccati_hook=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            parser.print_usage(sys.stderr)
            print("sysrisk: error: --threads must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        set_threads(args.threads)
    try:
        if args.command == "validate":
            return cmd_validate(args, riccati_hook)
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"sysrisk: scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DomainError as exc:
        print(f"sysrisk: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RiccatiBlowupError, NonFiniteEnsembleError) as exc:
        print(f"sysrisk: numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
