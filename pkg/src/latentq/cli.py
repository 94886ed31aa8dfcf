"""Command-line driver.

Exit codes: 0 everything passed, 1 a check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import bell, verify
from .documents import (
    DocumentError,
    load_json,
    matrix_to_json,
    parse_compose,
    parse_config,
    parse_scenario,
    parse_system,
)
from .states_effects import compose_effects, compose_states

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
TOL_ENV = "LATENTQ_TOL"


def _tolerance(args) -> float:
    if args.tol is not None:
        return args.tol
    env = os.environ.get(TOL_ENV)
    if env is None:
        return verify.DEFAULT_TOL
    try:
        tol = float(env)
    except ValueError:
        raise DocumentError(f"{TOL_ENV}={env!r} is not a number") from None
    if not tol > 0:
        raise DocumentError(f"{TOL_ENV} must be positive")
    return tol


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    theory = parse_config(load_json(args.config))
    tol = _tolerance(args)
    kw = {"seed": args.seed, "tol": tol, "mutation": theory.mutation}
    if theory.trials is not None:
        kw["trials"] = theory.trials
    if theory.ancilla_pool is not None:
        tut = verify.TheoryUnderTest(theory.cfg, theory.ancilla_pool, **kw)
    else:
        tut = verify.TheoryUnderTest.default(theory.cfg, **kw)
    reports = verify.run_suite(tut)
    doc = {
        "seed": args.seed,
        "tolerance": tol,
        "mutation": theory.mutation,
        "ancilla_pool": [repr(a) for a in tut.ancilla_pool],
        "checks": [r.to_dict() for r in reports],
        "all_pass": all(r.passed for r in reports),
    }
    if args.format == "csv":
        lines = ["check,trials,max_deviation,pass"]
        lines += [f"{r.check_name},{r.trials},{r.max_deviation!r},{r.passed}" for r in reports]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_dump(doc), args.out)
    return EXIT_OK if doc["all_pass"] else EXIT_FAIL


def cmd_bell(args) -> int:
    if not args.scenario:
        raise DocumentError("bell needs --scenario")
    cfg = parse_config(load_json(args.config)).cfg
    scenario = parse_scenario(load_json(args.scenario), cfg)
    tol = _tolerance(args)
    lqt = bell.correlations_lqt(scenario, cfg)
    rho, _ = bell.to_qt_state(scenario, cfg)
    qt = bell.correlations_qt(rho, scenario)
    equiv = bell.check_bell_equivalence(scenario, cfg, tol)
    doc = {"rows": len(lqt), "max_deviation": equiv.max_deviation, "equivalent": equiv.passed,
           "tolerance": tol}
    ok = equiv.passed
    if scenario.preparations is not None:
        structure = bell.check_scenario_structure(scenario, cfg, tol)
        doc["structure_deviation"] = structure.max_deviation
        doc["structure_preserved"] = structure.passed
        ok = ok and structure.passed
    two_by_two = len(scenario.parties) == 2 and all(
        len(p.settings) == 2 and all(len(s) == 2 for s in p.settings) for p in scenario.parties)
    if two_by_two:
        doc["chsh"] = bell.chsh_value(lqt)
    if args.format == "csv":
        _emit(bell.table_to_csv(lqt, qt), args.out)
        summary = ", ".join(f"{k}={doc[k]}" for k in sorted(doc))
        print(summary, file=sys.stderr)
    else:
        doc["table"] = [{"settings": list(x), "outcomes": list(a), "p_lqt": p, "p_qt": qt[(x, a)]}
                        for (x, a), p in lqt.probs.items()]
        _emit(_dump(doc), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_tomography(args) -> int:
    cfg = parse_config(load_json(args.config)).cfg
    system = parse_system(args.system, cfg) if args.system else None
    if system is None:
        label = sorted(cfg.labels)[0]
        system = cfg.system([label, label])
    if len(system) < 2:
        raise DocumentError("tomography needs a composite of at least two labels")
    tol = _tolerance(args)
    span, ambient = bell.tomography_span(system, cfg)
    doc = {"system": repr(system), "span": span, "ambient": ambient, "deficit": ambient - span}
    ok = True
    witness = None
    if len(system) == 2:
        witness = bell.tomography_violation_witness(cfg, system)
    elif span < ambient:
        witness = bell.tomography_violation_witness(cfg)
    if witness is None:
        doc["witness"] = None
        doc["witness_success"] = None
    else:
        doc["witness"] = {
            "system": repr(witness.system),
            "product_deviation": witness.product_deviation,
            "trace_distance": witness.trace_distance,
            "success": witness.success,
            "state1": matrix_to_json(witness.state1),
            "state2": matrix_to_json(witness.state2),
        }
        doc["witness_success"] = witness.success
        ok = witness.product_deviation < max(tol, 1e-12)
    _emit(_dump(doc), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compose(args) -> int:
    if not args.parts:
        raise DocumentError("compose needs --parts")
    cfg = parse_config(load_json(args.config)).cfg
    kind, parts = parse_compose(load_json(args.parts), cfg)
    result = compose_states(parts, cfg) if kind == "state" else compose_effects(parts, cfg)
    doc = {"kind": kind, "system": repr(result.system), "dim": int(result.op.shape[0]),
           "op": matrix_to_json(result.op)}
    _emit(_dump(doc), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="theory config (JSON)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None,
                        help=f"pass/fail tolerance (fallback: ${TOL_ENV}, then 1e-9)")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p = argparse.ArgumentParser(prog="latentq", description="Latent quantum theory simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the composition-axiom suite")
    b = sub.add_parser("bell", parents=[common], help="LQT vs QT correlation tables")
    b.add_argument("--scenario", required=True, help="scenario document (JSON)")
    t = sub.add_parser("tomography", parents=[common], help="product-effect span and witness")
    t.add_argument("--system", default=None, help="system string, e.g. QQ (default: two copies of the first label)")
    c = sub.add_parser("compose", parents=[common], help="⊠-compose state or effect literals")
    c.add_argument("--parts", required=True, help="compose document (JSON)")
    return p


COMMANDS = {"verify": cmd_verify, "bell": cmd_bell, "tomography": cmd_tomography, "compose": cmd_compose}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, ValueError, TypeError) as exc:
        print(f"error: invalid input ({exc})", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
