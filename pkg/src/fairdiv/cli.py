"""Command line: ``fairdiv analyze|solve|check|gen|verify``.

Exit codes: 0 success, 2 bad input (unparsable file, inconsistent
allocation, bad flag), 3 instance too large for an exhaustive routine,
4 solver failure (audit or division), 5 verification found a violation,
1 internal error.

Human output is a plain table; ``--json`` prints the machine report
instead. Both come from the same report dictionary, so their numbers agree.
Reports never contain wall-clock time unless ``--timing`` is given, which
keeps repeated runs byte-identical.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .core import (
    Instance,
    InvariantViolation,
    ResourceError,
    UsageError,
    format_items,
    format_value,
    is_non_degenerate,
    perturb,
    scale_to_integers,
    value,
)
from .divider import AuditFailure, DivideError, solve_efl_eefx
from .fairness import check_allocation, is_allocation_eefx
from .io import (
    allocation_to_dict,
    dumps,
    instance_to_dict,
    load_allocation,
    load_instance,
    render_table,
)
from .oracle import DEFAULT_BUDGET, brute_force_solve, random_instance, verify_instance, verify_suite
from .shares import max_infeasible_bundle, mms, mxs, rmms, theta

EXIT_OK, EXIT_INTERNAL, EXIT_PARSE, EXIT_RESOURCE, EXIT_AUDIT, EXIT_VERIFY = 0, 1, 2, 3, 4, 5

fv = format_value


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(args, report: dict, table: str) -> None:
    sys.stdout.write(dumps(report) if args.json else table + "\n")


def _instance_block(inst: Instance) -> dict:
    return {"agents": inst.n, "items": inst.m, "label": inst.label}


# ---------------------------------------------------------------------------
# analyze


def analyze_report(inst: Instance, use_perturb: bool = False) -> dict:
    """Share profile of every agent; with ``use_perturb`` the instance is scaled and perturbed first."""
    scale = 1
    if use_perturb:
        inst, scale = scale_to_integers(inst)
        inst = perturb(inst)
    agents = []
    for a in range(inst.n):
        nd = is_non_degenerate(inst, a)
        mms_val, part = mms(inst, a)
        row = {
            "agent": a,
            "non_degenerate": nd,
            "mms": fv(mms_val),
            "mms_partition": part.as_lists(),
            "mxs": fv(mxs(inst, a)),
            "rmms": fv(rmms(inst, a)),
            "theta": fv(theta(inst, a)) if nd else None,
            "max_infeasible": None,
        }
        if nd:
            t = max_infeasible_bundle(inst, a)
            row["max_infeasible"] = None if t is None else [g for g in range(inst.m) if t >> g & 1]
        agents.append(row)
    return {
        "command": "analyze",
        "instance": _instance_block(inst),
        "perturbed": use_perturb,
        "scale": scale,
        "agents": agents,
    }


def render_analyze(rep: dict) -> str:
    rows = []
    for r in rep["agents"]:
        t_bundle = r["max_infeasible"]
        rows.append(
            [
                str(r["agent"] + 1),
                r["mms"],
                r["mxs"],
                r["theta"] if r["theta"] is not None else "requires --perturb",
                r["rmms"],
                "yes" if r["non_degenerate"] else "no",
                "-" if t_bundle is None else "{" + ",".join(f"g{g + 1}" for g in t_bundle) + "}",
            ]
        )
    head = f"n={rep['instance']['agents']} m={rep['instance']['items']}"
    if rep["perturbed"]:
        head += f" (scaled x{rep['scale']} and perturbed)"
    table = render_table(["agent", "MMS", "MXS", "theta", "RMMS", "non-degenerate", "T"], rows)
    return head + "\n" + table


def cmd_analyze(args) -> int:
    inst = load_instance(args.instance).instance
    start = time.perf_counter()
    rep = analyze_report(inst, args.perturb)
    if args.timing:
        rep["timing_seconds"] = round(time.perf_counter() - start, 6)
    _emit(args, rep, render_analyze(rep))
    return EXIT_OK


# ---------------------------------------------------------------------------
# check


def check_report(inst: Instance, alloc) -> dict:
    """Every pairwise envy verdict with witnesses, and EEFX certificates per agent."""
    envy = check_allocation(inst, alloc)
    eefx_ok, certs = is_allocation_eefx(inst, alloc)
    pairs = []
    for (i, j), p in sorted(envy.pairs.items()):
        pairs.append(
            {
                "i": i,
                "j": j,
                "ef": p.ef,
                "ef1": p.ef1,
                "efl": p.efl,
                "efx": p.efx,
                "ef1_item": p.ef1_item,
                "efl_item": p.efl_item,
                "efl_clause": p.efl_clause,
                "efx_violator": p.efx_violator,
            }
        )
    agents = []
    for a, c in enumerate(certs):
        agents.append(
            {
                "agent": a,
                "bundle": alloc.as_lists()[a],
                "value": fv(value(inst, a, alloc.bundles[a])),
                "eefx_feasible": c is not None,
                "certificate": None if c is None else c.parts.as_lists(),
            }
        )
    return {
        "command": "check",
        "instance": _instance_block(inst),
        "complete": alloc.complete,
        "verdicts": {
            "ef": envy.ef,
            "ef1": envy.ef1,
            "efl": envy.efl,
            "efx": envy.efx,
            "eefx": eefx_ok,
        },
        "pairs": pairs,
        "agents": agents,
    }


def _fmt_item(g):
    return "-" if g is None else f"g{g + 1}"


def render_check(rep: dict) -> str:
    v = rep["verdicts"]
    out = [
        "complete: " + ("yes" if rep["complete"] else "no"),
        "  ".join(f"{k.upper()}: {'pass' if v[k] else 'FAIL'}" for k in ("ef", "ef1", "efl", "efx", "eefx")),
        "",
    ]
    rows = [
        [
            f"{p['i'] + 1}->{p['j'] + 1}",
            *("ok" if p[k] else "no" for k in ("ef", "ef1", "efl", "efx")),
            _fmt_item(p["ef1_item"]),
            _fmt_item(p["efl_item"]),
            _fmt_item(p["efx_violator"]),
        ]
        for p in rep["pairs"]
    ]
    out.append(render_table(["pair", "EF", "EF1", "EFL", "EFX", "EF1 item", "EFL item", "EFX violator"], rows))
    out.append("")
    rows = []
    for a in rep["agents"]:
        cert = a["certificate"]
        rows.append(
            [
                str(a["agent"] + 1),
                "{" + ",".join(f"g{g + 1}" for g in a["bundle"]) + "}",
                a["value"],
                "yes" if a["eefx_feasible"] else "no",
                "-" if cert is None else " ".join("{" + ",".join(f"g{g + 1}" for g in p) + "}" for p in cert),
            ]
        )
    out.append(render_table(["agent", "bundle", "value", "EEFX feasible", "certificate"], rows))
    return "\n".join(out)


def cmd_check(args) -> int:
    inst = load_instance(args.instance).instance
    alloc = load_allocation(args.allocation, inst)
    rep = check_report(inst, alloc)
    _emit(args, rep, render_check(rep))
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    inst = load_instance(args.instance).instance
    start = time.perf_counter()
    extra = {}
    if args.oracle:
        alloc = brute_force_solve(inst, "EFL+EEFX", budget=args.budget)
        if alloc is None:
            raise _Exit(EXIT_AUDIT, "brute-force search found no EFL+EEFX allocation")
        extra = {"method": "oracle"}
    else:
        try:
            res = solve_efl_eefx(inst, threshold=args.threshold, divide=args.divide)
        except AuditFailure as exc:
            Path(args.dump).write_text(dumps(exc.dump), encoding="utf-8")
            raise _Exit(EXIT_AUDIT, f"{exc}; state written to {args.dump}") from exc
        except DivideError as exc:
            raise _Exit(EXIT_AUDIT, str(exc)) from exc
        alloc = res.allocation
        extra = {
            "method": "lone-divider",
            "threshold": args.threshold,
            "thresholds": [fv(res.thresholds[a]) for a in range(inst.n)],
            "perturbed": res.perturbed,
            "rounds": res.state.round,
            "reassignments": res.state.reassignments,
        }
    rep = check_report(inst, alloc)
    rep["command"] = "solve"
    rep["solver"] = extra
    if args.timing:
        rep["timing_seconds"] = round(time.perf_counter() - start, 6)
    if args.out:
        Path(args.out).write_text(dumps(allocation_to_dict(alloc)), encoding="utf-8")
    head = "allocation: " + " ".join(format_items(b) for b in alloc.bundles)
    _emit(args, rep, head + "\n" + render_check(rep))
    v = rep["verdicts"]
    if not (v["efl"] and v["eefx"] and rep["complete"]):
        raise _Exit(EXIT_AUDIT, "allocation failed the EFL/EEFX audit")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    inst = random_instance(args.seed, args.n, args.m, args.vmax, non_degenerate=args.non_degenerate)
    text = dumps(instance_to_dict(inst))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _instance_summary(r) -> dict:
    return {
        "label": r.label,
        "ok": r.ok,
        "chain_ok": r.chain.ok,
        "chain_perturbed": r.chain.perturbed,
        "chain_violations": r.chain.violations,
        "shares": [
            {k: (fv(v) if k != "agent" else v) for k, v in row.items()} for row in r.chain.rows
        ],
        "residual_feasible": [t.ok for t in r.residual],
        "removal_families": sum(t.families for t in r.residual),
        "residual_witness": next(
            ({"agent": t.agent, "removed": list(t.witness)} for t in r.residual if t.witness is not None),
            None,
        ),
        "constructive_failure": next(
            (t.constructive_failure for t in r.residual if t.constructive_failure), None
        ),
        "solved": r.solved,
        "solver_error": r.solver_error,
        "oracle_found": r.oracle_found,
        "allocation": r.allocation,
    }


def cmd_verify(args) -> int:
    start = time.perf_counter()
    if args.instance:
        inst = load_instance(args.instance).instance
        results = [verify_instance(inst, oracle_budget=args.budget)]
        rep = {"command": "verify", "source": "file", "instances": [_instance_summary(results[0])]}
    else:
        suite = verify_suite(args.seed, args.count, args.n, (args.m_min, args.m_max), args.vmax, args.budget)
        results = suite.instances
        rep = {
            "command": "verify",
            "source": "random",
            "config": {
                "seed": args.seed,
                "count": args.count,
                "n": args.n,
                "m_min": args.m_min,
                "m_max": args.m_max,
                "vmax": args.vmax,
                "budget": args.budget,
            },
            "instances": [_instance_summary(r) for r in results],
        }
    passed = sum(r.ok for r in results)
    rep["passed"] = passed
    rep["total"] = len(results)
    if args.timing:
        rep["timing_seconds"] = round(time.perf_counter() - start, 6)
    rows = [
        [
            str(k + 1),
            "pass" if s["ok"] else "FAIL",
            "ok" if s["chain_ok"] else "no",
            "ok" if all(s["residual_feasible"]) else "no",
            "ok" if s["solved"] else "no",
            {True: "found", False: "none", None: "skipped"}[s["oracle_found"]],
        ]
        for k, s in enumerate(rep["instances"])
    ]
    table = render_table(["#", "result", "share chain", "theta residual", "solver", "oracle"], rows)
    _emit(args, rep, table + f"\n{passed}/{len(results)} pass")
    if passed != len(results):
        bad = [s for s in rep["instances"] if not s["ok"]]
        Path(args.witness).write_text(dumps({"failures": bad}), encoding="utf-8")
        raise _Exit(EXIT_VERIFY, f"{len(bad)} instance(s) failed; details in {args.witness}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairdiv", description="Exact EFL/EEFX fair division tools.")
    p.add_argument("--version", action="version", version=f"fairdiv {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="print the machine-readable report")
        sp.add_argument("--timing", action="store_true", help="include wall-clock time in the report")

    a = sub.add_parser("analyze", help="MMS, MXS, theta and RMMS for every agent")
    a.add_argument("instance")
    a.add_argument("--perturb", action="store_true", help="scale to integers and perturb first")
    common(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", help="find an EFL and EEFX allocation")
    s.add_argument("instance")
    s.add_argument("--threshold", choices=["theta", "rmms", "mms"], default="theta")
    s.add_argument("--divide", choices=["auto", "constructive", "bruteforce"], default="auto")
    s.add_argument("--oracle", action="store_true", help="use the brute-force scan instead")
    s.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="max assignments for --oracle")
    s.add_argument("--out", help="write the allocation file here")
    s.add_argument("--dump", default="fairdiv-dump.json", help="state dump path on audit failure")
    common(s)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="run every checker on a given allocation")
    c.add_argument("instance")
    c.add_argument("allocation")
    common(c)
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("gen", help="seeded random instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--m", type=int, default=8)
    g.add_argument("--vmax", type=int, default=20)
    g.add_argument("--non-degenerate", action="store_true", help="perturb the generated values")
    g.add_argument("--out", help="write here instead of stdout")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", help="check the share chain, residual feasibility and the solver")
    v.add_argument("instance", nargs="?")
    v.add_argument("--suite", choices=["random"], default="random")
    v.add_argument("--count", type=int, default=100)
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--n", type=int, default=3)
    v.add_argument("--m-min", type=int, default=4)
    v.add_argument("--m-max", type=int, default=8)
    v.add_argument("--vmax", type=int, default=20)
    v.add_argument("--budget", type=int, default=10**5, help="max assignments for the oracle scan")
    v.add_argument("--witness", default="fairdiv-witness.json", help="failure details path")
    common(v)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"fairdiv: {exc}", file=sys.stderr)
        return exc.code
    except UsageError as exc:
        print(f"fairdiv: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ResourceError as exc:
        print(f"fairdiv: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvariantViolation as exc:
        print(f"fairdiv: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
