"""Command-line harness: partition graphs, run seed sweeps, self-validate.

Exit codes: 0 success (and, for partition/validate, all checks passed),
1 a check or reported invariant failed, 2 configuration or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exp3 import ArmsTooFewError
from .graph import Graph, GraphError, read_edge_list
from .partition import (
    compute_centers_informed,
    compute_centers_uninformed,
    partition_to_json,
    validate_partition,
)
from .simulate import (
    LossOracle,
    RunResult,
    bernoulli_losses,
    degree_bound,
    individual_bound,
    matrix_losses,
    run_informed,
    run_uninformed,
    switching_losses,
    uninformed_degree_bound,
)
from .suites import SUITES, run_suite

CSV_COLUMNS = [
    "seed",
    "agent",
    "degree",
    "mass_m",
    "mass_d",
    "delay",
    "regret",
    "regret_semi",
    "bound_individual",
    "bound_degree",
    "setup_steps",
]


def parse_adversary(spec: str, arms: int, seed: int) -> LossOracle:
    """Build a loss oracle from its one-line description.

    Forms: ``bernoulli:m1,m2,...`` (one mean per arm), ``matrix:path.csv``
    (steps x arms values in [0,1]), ``switch:arm0@0,arm3@50000`` (favored
    arm gets loss 0, the rest 1, switching at the given steps).
    """
    kind, sep, rest = spec.partition(":")
    if not sep:
        raise ValueError(f"adversary spec {spec!r} missing ':'")
    if kind == "bernoulli":
        means = [float(tok) for tok in rest.split(",") if tok != ""]
        if len(means) != arms:
            raise ValueError(f"bernoulli spec has {len(means)} means, run uses {arms} arms")
        return bernoulli_losses(means, seed)
    if kind == "matrix":
        table = np.atleast_2d(np.loadtxt(rest, delimiter=",", dtype=float))
        if table.shape[1] != arms:
            raise ValueError(f"loss table has {table.shape[1]} columns, run uses {arms} arms")
        return matrix_losses(table)
    if kind == "switch":
        switches = []
        for tok in rest.split(","):
            if not tok.startswith("arm") or "@" not in tok:
                raise ValueError(f"bad switch entry {tok!r}; expected e.g. arm2@500")
            arm_s, step_s = tok[3:].split("@", 1)
            switches.append((int(step_s), int(arm_s)))
        return switching_losses(switches, arms)
    raise ValueError(f"unknown adversary kind {kind!r}")


@dataclass
class RunConfig:
    """Validated sweep parameters; construction fails fast on bad input."""

    graph_path: str
    arms: int
    horizon: int
    setting: str
    n_upper: int | None
    adversary_spec: str
    seeds: int
    adversary_seed: int
    policy_seed: int
    debug_invariants: bool
    workers: int

    def check(self, g: Graph) -> None:
        if self.arms < 2:
            raise ArmsTooFewError(f"need at least 2 arms, got {self.arms}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.seeds < 1:
            raise ValueError(f"need at least one seed, got {self.seeds}")
        if self.setting == "uninformed":
            if self.n_upper is None:
                raise ValueError("uninformed runs need --nbar (known upper bound on N)")
            if self.n_upper < g.node_count:
                raise ValueError(
                    f"--nbar {self.n_upper} is below the actual node count {g.node_count}"
                )
        parse_adversary(self.adversary_spec, self.arms, self.adversary_seed)  # fail fast


def _run_single(cfg: RunConfig, g: Graph, index: int, log_prefix: str | None) -> RunResult:
    a_seed = cfg.adversary_seed + index
    p_seed = cfg.policy_seed + index
    oracle = parse_adversary(cfg.adversary_spec, cfg.arms, a_seed)
    sink = None
    try:
        if log_prefix is not None:
            sink = open(f"{log_prefix}-seed{index}.jsonl", "w", encoding="utf-8")
        if cfg.setting == "informed":
            return run_informed(g, cfg.arms, cfg.horizon, oracle, p_seed,
                                debug=cfg.debug_invariants, log_sink=sink)
        return run_uninformed(g, cfg.arms, cfg.n_upper, cfg.horizon, oracle, p_seed,
                              debug=cfg.debug_invariants, log_sink=sink)
    finally:
        if sink is not None:
            sink.close()


def _pool_worker(payload) -> tuple[int, RunResult]:
    cfg_fields, graph_path, index, log_prefix = payload
    cfg = RunConfig(**cfg_fields)
    g = read_edge_list(graph_path)
    return index, _run_single(cfg, g, index, log_prefix)


def sweep(cfg: RunConfig, g: Graph, log_prefix: str | None = None) -> list[RunResult]:
    """All seed runs, in seed order regardless of scheduling."""
    if cfg.workers <= 1:
        return [_run_single(cfg, g, i, log_prefix) for i in range(cfg.seeds)]
    payloads = [
        (cfg.__dict__.copy(), cfg.graph_path, i, log_prefix) for i in range(cfg.seeds)
    ]
    out: dict[int, RunResult] = {}
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        for index, result in pool.map(_pool_worker, payloads):
            out[index] = result
    return [out[i] for i in range(cfg.seeds)]


def results_rows(cfg: RunConfig, g: Graph, results: list[RunResult]) -> list[dict]:
    rows = []
    for index, res in enumerate(results):
        part = res.partition
        for v in range(res.node_count):
            closed = g.closed_degree(v)
            if cfg.setting == "uninformed":
                b12 = uninformed_degree_bound(closed, cfg.arms, cfg.n_upper, cfg.horizon)
            else:
                b12 = degree_bound(closed, cfg.arms, cfg.horizon)
            rows.append(
                {
                    "seed": index,
                    "agent": v,
                    "degree": closed,
                    "mass_m": part.mass_m[v],
                    "mass_d": part.mass_d[v],
                    "delay": part.delay[v],
                    "regret": float(res.regret[v]),
                    "regret_semi": float(res.semi_regret[v]),
                    "bound_individual": individual_bound(part.mass_value(v), cfg.arms, cfg.horizon),
                    "bound_degree": b12,
                    "setup_steps": res.setup_steps,
                }
            )
    rows.sort(key=lambda r: (r["seed"], r["agent"]))
    return rows


def write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(
                [repr(float(r[c])) if isinstance(r[c], float) else int(r[c]) for c in CSV_COLUMNS]
            )


def summary_doc(cfg: RunConfig, g: Graph, results: list[RunResult], rows: list[dict]) -> dict:
    n = g.node_count
    per_agent = []
    for v in range(n):
        mine = [r for r in rows if r["agent"] == v]
        mean_sr = float(np.mean([r["regret_semi"] for r in mine]))
        per_agent.append(
            {
                "agent": v,
                "degree": mine[0]["degree"],
                "mass_m": mine[0]["mass_m"],
                "mass_d": mine[0]["mass_d"],
                "delay": mine[0]["delay"],
                "mean_regret": float(np.mean([r["regret"] for r in mine])),
                "mean_regret_semi": mean_sr,
                "bound_individual": mine[0]["bound_individual"],
                "bound_degree": mine[0]["bound_degree"],
                "within_individual": mean_sr <= mine[0]["bound_individual"],
                "within_degree_bound": mean_sr <= mine[0]["bound_degree"],
            }
        )
    per_seed = [
        {
            "seed": i,
            "adversary_seed": cfg.adversary_seed + i,
            "policy_seed": cfg.policy_seed + i,
            "digest": res.digest,
            "setup_steps": res.setup_steps,
            "best_arm": res.best_arm,
            "luby_budget_exhaustions": res.luby_budget_exhaustions,
            "debug_violations": len(res.debug_violations),
        }
        for i, res in enumerate(results)
    ]
    return {
        "config": {
            "graph": cfg.graph_path,
            "node_count": n,
            "arms": cfg.arms,
            "horizon": cfg.horizon,
            "setting": cfg.setting,
            "n_upper": cfg.n_upper,
            "adversary": cfg.adversary_spec,
            "seeds": cfg.seeds,
            "adversary_seed_base": cfg.adversary_seed,
            "policy_seed_base": cfg.policy_seed,
            "debug_invariants": cfg.debug_invariants,
        },
        "per_seed": per_seed,
        "per_agent": per_agent,
        "aggregate": {
            "mean_regret": float(np.mean([r["regret"] for r in rows])),
            "mean_regret_semi": float(np.mean([r["regret_semi"] for r in rows])),
            "mean_policy_regret_semi": float(
                np.mean([np.mean(res.policy_semi_regret) for res in results])
            ),
        },
    }


def cmd_partition(args) -> int:
    g = read_edge_list(args.graph)
    if args.setting == "informed":
        comp = compute_centers_informed(g, args.arms).component_map
        setup_note = "setup steps charged: 0 (graph known in advance)"
        exhausted = 0
    else:
        if args.nbar is None:
            raise ValueError("uninformed partitioning needs --nbar")
        if args.nbar < g.node_count:
            raise ValueError(f"--nbar {args.nbar} is below the actual node count {g.node_count}")
        election = compute_centers_uninformed(
            g, args.arms, args.nbar, args.horizon, np.random.default_rng(args.policy_seed)
        )
        comp = election.final_map
        exhausted = sum(1 for c in election.luby_calls if c.result.exhausted)
        setup_note = (
            f"setup steps charged: {election.total_steps} "
            f"(protocol {election.protocol_steps} + final pass {election.final_pass_steps}; "
            f"election round budget {election.luby_round_budget})"
        )
    partition = comp.to_partition()
    report = validate_partition(g, partition)
    print(f"graph {args.graph}: {g.node_count} nodes, arms {args.arms}, setting {args.setting}")
    print(f"centers: {list(partition.centers)}")
    print(setup_note)
    if exhausted:
        print(f"WARNING: {exhausted} election(s) exhausted their round budget")
    for line in report.lines():
        print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(partition_to_json(partition), fh, indent=1)
            fh.write("\n")
        print(f"partition written to {args.out}")
    return 0 if report.ok else 1


def cmd_simulate(args) -> int:
    cfg = RunConfig(
        graph_path=args.graph,
        arms=args.arms,
        horizon=args.horizon,
        setting=args.setting,
        n_upper=args.nbar,
        adversary_spec=args.adversary,
        seeds=args.seeds,
        adversary_seed=args.adversary_seed,
        policy_seed=args.policy_seed,
        debug_invariants=args.debug_invariants,
        workers=args.workers,
    )
    g = read_edge_list(args.graph)
    cfg.check(g)
    results = sweep(cfg, g, args.log)
    rows = results_rows(cfg, g, results)
    doc = summary_doc(cfg, g, results, rows)
    if args.out:
        write_csv(f"{args.out}.csv", rows)
        with open(f"{args.out}.json", "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.out}.csv and {args.out}.json")
    agg = doc["aggregate"]
    print(
        f"{cfg.setting} sweep: {cfg.seeds} seed(s), mean regret {agg['mean_regret']:.2f}, "
        f"mean semi-expected regret {agg['mean_regret_semi']:.2f}"
    )
    for row in doc["per_agent"]:
        print(
            f"  agent {row['agent']:>3} mass ({row['mass_m']},{row['mass_d']}) "
            f"semi {row['mean_regret_semi']:>10.2f} vs bounds "
            f"{row['bound_individual']:>10.1f} / {row['bound_degree']:>12.1f}"
        )
    violations = sum(len(res.debug_violations) for res in results)
    if violations:
        print(f"DEBUG INVARIANT VIOLATIONS: {violations}")
        for res in results:
            for line in res.debug_violations[:5]:
                print("  " + line)
        return 1
    return 0


def cmd_validate(args) -> int:
    report = run_suite(args.suite, args.seed)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def make_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="coopmab", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    part = sub.add_parser("partition", help="compute and validate a center partition")
    part.add_argument("--graph", required=True, help="edge-list file")
    part.add_argument("--arms", type=int, required=True)
    part.add_argument("--setting", choices=["informed", "uninformed"], default="informed")
    part.add_argument("--nbar", type=int, default=None, help="known upper bound on node count")
    part.add_argument("--horizon", type=int, default=100_000,
                      help="horizon the uninformed election budget is tuned for")
    part.add_argument("--policy-seed", type=int, default=0)
    part.add_argument("--out", default=None, help="write the partition as JSON here")
    part.set_defaults(func=cmd_partition)

    sim = sub.add_parser("simulate", help="run a seed sweep and write CSV + JSON results")
    sim.add_argument("--graph", required=True)
    sim.add_argument("--arms", type=int, required=True)
    sim.add_argument("--horizon", type=int, required=True)
    sim.add_argument("--setting", choices=["informed", "uninformed"], default="informed")
    sim.add_argument("--nbar", type=int, default=None)
    sim.add_argument("--adversary", required=True,
                     help="bernoulli:0.4,0.5 | matrix:losses.csv | switch:arm0@0,arm3@50000")
    sim.add_argument("--seeds", type=int, default=1, help="number of (adversary, policy) seed pairs")
    sim.add_argument("--adversary-seed", type=int, default=0, help="base seed; run i adds i")
    sim.add_argument("--policy-seed", type=int, default=10_000, help="base seed; run i adds i")
    sim.add_argument("--out", default=None, help="output prefix for .csv and .json")
    sim.add_argument("--log", default=None, help="prefix for per-seed JSON-lines round logs")
    sim.add_argument("--debug-invariants", action="store_true",
                     help="audit every center update; nonzero exit on any violation")
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    val = sub.add_parser("validate", help="run a randomized self-check suite")
    val.add_argument("suite", choices=sorted(SUITES))
    val.add_argument("--seed", type=int, default=0)
    val.set_defaults(func=cmd_validate)
    return top


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (GraphError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
