"""Command-line front end.

Subcommands: ``verify`` (run the pipeline on a problem file), ``bench``
(generate seeded random instances and tabulate full-vs-ablated runtimes),
and ``check-model`` (encoding-fidelity report for a model artifact).

Exit codes for ``verify``: 0 optimal/feasible, 1 infeasible, 2 budget hit
(time or gap limit), 3 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import BenchConfig, BenchRow, format_table, generate_instance
from .encodings import encode
from .errors import ChainboundError, InvalidParameter
from .markov import QuerySense, validate
from .models import load_model, save_model
from .probfile import load_problem, report_dict, save_problem
from .solver import ProblemBuilder, Status, milp_solve
from .verifier import STAGES, VerifyConfig, ablation_run, verify

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_BUDGET = 2
EXIT_INPUT = 3


def _add_verify_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("problem", help="problem specification file (JSON)")
    p.add_argument("--sense", choices=["min", "max"], help="override the query sense")
    p.add_argument("--gap", type=float, default=1e-4, help="relative optimality gap")
    p.add_argument("--time-limit", type=float, default=None, help="seconds for the final solve")
    p.add_argument("--bounds-only", action="store_true", help="stop after the bound stages")
    p.add_argument(
        "--ablate",
        action="append",
        default=[],
        choices=[s.replace("_", "-") for s in STAGES],
        help="disable a bound stage (and everything after it); repeatable",
    )
    p.add_argument("--seed", type=int, default=0, help="seed echoed into the report")
    p.add_argument("--json-out", metavar="PATH", help="also write the report to PATH")
    p.add_argument(
        "--debug-dump-lp", metavar="PATH", help="dump the assembled program as text"
    )


def cmd_verify(args) -> int:
    try:
        spec = load_problem(args.problem)
        if args.sense:
            spec.query = replace(spec.query, sense=QuerySense(args.sense))
        report = validate(spec)
        if not report.is_valid:
            print(f"error: {args.problem}: spec invalid", file=sys.stderr)
            for issue in report.errors:
                print(f"  {issue}", file=sys.stderr)
            return EXIT_INPUT
        config = VerifyConfig(
            gap_tol=args.gap,
            time_limit=args.time_limit,
            bounds_only=args.bounds_only,
            ablate=frozenset(a.replace("-", "_") for a in args.ablate),
            debug_dump_path=args.debug_dump_lp,
        )
        result = verify(spec, config)
    except ChainboundError as exc:
        print(f"error: {args.problem}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = report_dict(result, config, problem_path=args.problem)
    out["seed"] = args.seed
    text = json.dumps(out, indent=1)
    print(text)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n")

    if result.status in ("optimal", "feasible", "bounds_only"):
        return EXIT_OK
    if result.status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_BUDGET


def _add_bench_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory for instances and results")
    p.add_argument("--n-states", type=int, default=5)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--prob-model", choices=["logistic", "tree"], default="logistic")
    p.add_argument("--reward-model", choices=["linear", "tree"], default="linear")
    p.add_argument("--tree-depth", type=int, default=4)
    p.add_argument("--p-rows", type=int, default=1, help="modeled transition rows")
    p.add_argument("--n-train", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sense", choices=["min", "max"], default="max")
    p.add_argument("--gap", type=float, default=1e-4)
    p.add_argument("--time-limit", type=float, default=300.0, help="per-run limit (seconds)")
    p.add_argument(
        "--ablate-stage",
        action="append",
        default=[],
        choices=[s.replace("_", "-") for s in STAGES],
        help="extra ablated variants to run (default: v-init)",
    )
    p.add_argument("--full-table", action="store_true", help="run every ablation stage")


def cmd_bench(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = BenchConfig(
        n_states=args.n_states,
        prob_model=args.prob_model,
        reward_model=args.reward_model,
        tree_depth=args.tree_depth,
        n_p_rows=args.p_rows,
        n_train=args.n_train,
        sense=QuerySense(args.sense),
    )
    vconfig = VerifyConfig(gap_tol=args.gap, time_limit=args.time_limit)

    if args.full_table:
        stages = list(STAGES)
    elif args.ablate_stage:
        stages = [s.replace("-", "_") for s in args.ablate_stage]
    else:
        stages = ["v_init"]
    variants = {"full": frozenset()} | {s: frozenset([s]) for s in stages}

    rows: list[BenchRow] = []
    for k in range(args.instances):
        seed = args.seed + k
        spec = generate_instance(cfg, seed)
        inst_dir = outdir / f"instance_{seed:04d}"
        inst_dir.mkdir(exist_ok=True)
        refs = []
        for mi, model in enumerate(spec.models):
            ref = f"model_{mi}.json"
            save_model(model, inst_dir / ref)
            refs.append(ref)
        save_problem(spec, inst_dir / "problem.json", model_refs=refs)
        for name, disabled in variants.items():
            res = ablation_run(spec, disabled, vconfig)
            rows.append(BenchRow(seed, name, res.status, res.value, res.runtime, res.n_nodes))
            print(
                f"instance {seed}: {name:>10} -> {res.status:>10} "
                f"value={res.value if res.value is None else round(res.value, 6)} "
                f"({res.runtime:.2f}s)",
                flush=True,
            )

    with open(outdir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "variant", "status", "value", "runtime_sec", "nodes"])
        for r in rows:
            w.writerow([r.seed, r.variant, r.status, r.value, f"{r.runtime:.4f}", r.n_nodes])
    table = format_table(rows)
    (outdir / "results.txt").write_text(table + "\n")
    print()
    print(table)
    return EXIT_OK


def _add_check_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("model", help="model artifact file (JSON)")
    p.add_argument(
        "--box",
        default="-1:1",
        help="input box: '--box=-1:1' (all features) or '--box=-1:1,0:10,...' per feature",
    )
    p.add_argument("--features", type=int, default=None, help="feature count when the model does not imply one")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out", metavar="PATH")


def _parse_box(text: str, m: int) -> tuple[np.ndarray, np.ndarray]:
    parts = text.split(",")
    if len(parts) == 1:
        parts = parts * m
    if len(parts) != m:
        raise InvalidParameter(f"--box has {len(parts)} ranges but the model takes {m} features")
    lo, hi = [], []
    for part in parts:
        try:
            a, b = part.split(":")
            lo.append(float(a))
            hi.append(float(b))
        except ValueError as exc:
            raise InvalidParameter(f"--box: cannot parse range {part!r}") from exc
    return np.array(lo), np.array(hi)


def check_model_fidelity(model, lo, hi, samples: int, seed: int) -> dict:
    """Sample the box, compare the native evaluation against the MILP
    encoding solved with the input pinned, and report the worst deviation.

    Points closer than 1e-9 to a decision boundary are skipped for tree,
    ensemble, and rule models (the encoding is deliberately tie-agnostic
    there)."""
    rng = np.random.default_rng(seed)
    thresholds: dict[int, list[float]] = {}
    for nodes in ([model.nodes] if model.kind == "DecisionTree" else model.trees or []):
        for node in nodes:
            if not node.is_leaf:
                thresholds.setdefault(node.feature, []).append(node.threshold)
    for rule in model.rules:
        for atom in rule.atoms:
            thresholds.setdefault(atom.feature, []).append(atom.const)

    # The encoding is built once over the whole box (so envelope segments
    # and big-M values reflect it); each sample is pinned with equality rows
    # rather than by shrinking the bounds.
    builder = ProblemBuilder()
    xs = [builder.add_var(f"x{i}", lo[i], hi[i]) for i in range(len(lo))]
    enc = encode(model, builder, xs)
    gap = enc.gap_bound
    pin_rows = []
    for k, xv in enumerate(xs):
        builder.add_constraint({xv: 1.0}, "=", 0.0, f"pin{k}")
        pin_rows.append(builder.n_constraints - 1)

    max_dev = 0.0
    used = 0
    attempts = 0
    while used < samples and attempts < samples * 10:
        attempts += 1
        x = rng.uniform(lo, hi)
        if any(abs(x[f] - t) < 1e-9 for f, ts in thresholds.items() for t in ts):
            continue
        used += 1
        native = model.evaluate(x)
        for k, (xv, row) in enumerate(zip(xs, pin_rows)):
            builder.set_constraint_rhs(row, float(x[k]))
        for j, yv in enumerate(enc.output_vars):
            for maximize in (False, True):
                builder.set_objective({yv: 1.0}, maximize=maximize)
                res = milp_solve(builder.build_milp())
                if res.status != Status.OPTIMAL:
                    raise ChainboundError(f"fixed-input solve failed: {res.status}")
                max_dev = max(max_dev, abs(res.objective - native[j]))
    return {
        "samples": used,
        "max_deviation": max_dev,
        "envelope_gap": gap,
        "within_gap": bool(max_dev <= max(gap, 1e-6)),
    }


def cmd_check_model(args) -> int:
    try:
        model = load_model(args.model)
        m = model.n_inputs or args.features
        if m is None:
            raise InvalidParameter("model does not fix a feature count; pass --features")
        lo, hi = _parse_box(args.box, m)
        report = check_model_fidelity(model, lo, hi, args.samples, args.seed)
    except (ChainboundError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {args.model}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = {"model": args.model, "kind": model.kind, **report}
    text = json.dumps(report, indent=1)
    print(text)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chainbound",
        description="Certified bounds for Markov processes with model-driven parameters",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_verify_args(sub.add_parser("verify", help="verify a problem file"))
    _add_bench_args(sub.add_parser("bench", help="random-instance benchmark with ablations"))
    _add_check_args(sub.add_parser("check-model", help="encoding fidelity report"))
    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "bench":
        return cmd_bench(args)
    return cmd_check_model(args)


if __name__ == "__main__":
    sys.exit(main())
