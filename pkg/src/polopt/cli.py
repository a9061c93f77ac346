"""The polopt command line.

Subcommands: optimize-exact, optimize-sample, baselines, experiment,
gen-instance, emit-rules. All outputs are deterministic given the seed:
reports carry no timestamps and JSON is emitted with sorted keys.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .core import Mode, Policy
from .exact import (
    brute_force_optimal,
    guess_and_check,
    iterative_elimination,
    sort_and_optimize,
)
from .experiment import (
    ALGORITHMS,
    ExperimentPlan,
    compute_baselines,
    ingest_dataset,
    render_witness,
    report_to_csv,
    report_to_json,
    run_experiment,
)
from .generators import (
    ImpossibilityParams,
    VertexCoverInstance,
    gen_impossibility_model,
    gen_random_instance,
    gen_vertex_cover_rankings,
)
from .models import (
    FrequencyDistribution,
    NormalizationModel,
    RankingModel,
    RankingPopulation,
    load_population,
    load_withcount,
    population_space,
    save_population,
)
from .rules import Dictionary, load_rule_config, save_rule_config, standard_rule_set
from .sampling import SampleOracle, SamplingConfig


def _write_json(path: str | None, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_model(path: str, kind: str, fmt: str | None):
    if fmt is None:
        with open(path, encoding="utf-8") as fh:
            head = fh.read(1)
        if head == "[":
            fmt = "population"
        elif head == "{":
            fmt = "probs"
        else:
            fmt = "withcount"
    if kind == "ranking":
        if fmt != "population":
            raise SystemExit("ranking model input must be a population JSON file")
        population = load_population(path)
        return RankingModel(population_space(population), population)
    if fmt == "withcount":
        return NormalizationModel(load_withcount(path))
    if fmt == "probs":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return NormalizationModel(FrequencyDistribution(dict(obj["probs"])))
    raise SystemExit(f"cannot read a {kind} model from format {fmt!r}")


def _result_payload(result, space=None) -> dict:
    payload: dict = {"schema": 1}
    if result.best_active is not None:
        payload["best_active"] = sorted(result.best_active)
    if result.best_value is not None:
        payload["best_value"] = result.best_value
    if result.estimate is not None:
        payload["estimate"] = result.estimate
    if result.best_allowed is not None:
        payload["best_allowed"] = sorted(result.best_allowed)
    if result.draws_used is not None:
        payload["draws_used"] = result.draws_used
    if result.trace is not None:
        payload["trace"] = [
            {
                "active": sorted(step.active),
                "top_password": step.top_password,
                "value": step.value,
                "unbannable": list(step.unbannable),
            }
            for step in result.trace
        ]
    return payload


def _cmd_optimize_exact(args) -> int:
    mode, rules = load_rule_config(args.rules)
    if args.mode:
        mode = Mode(args.mode)
    model = _load_model(args.input, args.model, args.input_format)
    if args.alg == "sort-opt":
        if args.model != "normalization":
            raise SystemExit("sort-opt runs on the normalization model")
        result = sort_and_optimize(model.dist, args.k)
    elif args.alg == "guess-check":
        result = guess_and_check(model, rules, args.k, mode=mode)
    elif args.alg == "iter-elim":
        result = iterative_elimination(model, rules, mode=mode)
    else:
        result = brute_force_optimal(model, rules, mode, args.k)
    payload = _result_payload(result)
    payload.update({"algorithm": args.alg, "mode": Mode(mode).value, "k": args.k})
    if result.best_active is not None:
        payload["witness"] = render_witness(result.best_active, rules, mode)
    _write_json(args.out, payload)
    return 0


def _cmd_optimize_sample(args) -> int:
    mode, rules = load_rule_config(args.rules)
    if args.mode:
        mode = Mode(args.mode)
    model = _load_model(args.input, args.model, args.input_format)
    cfg = SamplingConfig(
        epsilon=args.epsilon,
        delta=args.delta,
        k=args.k,
        sample_size=args.sample_size,
        max_iterations=args.max_iterations,
    )
    oracle = SampleOracle(model, args.seed, max_draws=args.max_draws)
    fn, needed_mode = ALGORITHMS[args.alg]
    if Mode(mode) is not needed_mode:
        raise SystemExit(f"{args.alg} runs in {needed_mode.value} mode, rules are {mode}")
    result = fn(oracle, rules, cfg)
    payload = _result_payload(result)
    payload.update(
        {
            "algorithm": args.alg,
            "mode": Mode(mode).value,
            "k": args.k,
            "seed": args.seed,
            "witness": render_witness(result.best_active, rules, mode),
        }
    )
    _write_json(args.out, payload)
    return 0


def _cmd_baselines(args) -> int:
    mode, rules = load_rule_config(args.rules)
    if Mode(mode) is not Mode.POSITIVE:
        raise SystemExit("baselines expect the positive-form rule file")
    dist = ingest_dataset(args.dataset)
    model = NormalizationModel(dist)
    payload = compute_baselines(model, rules)
    payload["schema"] = 1
    payload["dataset"] = {
        "path": args.dataset,
        "total_count": dist.total_count,
        "distinct_count": dist.distinct_count,
    }
    _write_json(args.out, payload)
    return 0


def _cmd_experiment(args) -> int:
    plan = ExperimentPlan.from_json(args.plan)
    try:
        report = run_experiment(plan)
    except KeyboardInterrupt:  # pragma: no cover - interactive path
        raise
    if args.out_json:
        with open(args.out_json, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report))
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write(report_to_csv(report))
    if not args.out_json and not args.out_csv:
        sys.stdout.write(report_to_json(report))
    return 1 if report.get("partial") else 0


def _cmd_gen_instance(args) -> int:
    if args.kind == "vertex-cover":
        edges = tuple(
            tuple(int(x) for x in pair.split("-")) for pair in args.edges.split(",")
        )
        inst = VertexCoverInstance(g=args.g, edges=edges, t=args.t)
        built = gen_vertex_cover_rankings(inst, seed=args.seed)
        save_rule_config(args.out_rules, Mode.SINGLETON, built.rules)
        save_population(args.out_data, built.population)
        _write_json(
            args.out,
            {
                "schema": 1,
                "kind": "vertex-cover",
                "g": inst.g,
                "edges": [list(e) for e in inst.edges],
                "t": inst.t,
                "k": inst.k,
                "seed": args.seed,
                "rules_file": args.out_rules,
                "population_file": args.out_data,
            },
        )
        return 0
    if args.kind == "impossibility":
        params = ImpossibilityParams(
            c=args.c, n_passwords=args.n, t=args.block_size or None,
            length_x=args.length_x or None, r=args.r or None,
        )
        model = gen_impossibility_model(params)
        payload = {
            "schema": 1,
            "kind": "impossibility",
            "c": args.c,
            "q": params.q,
            "n_passwords": args.n,
            "t": model.t,
            "length_x": model.length_x,
            "r": model.r,
            "passwords": list(model.space.passwords),
            "seed": args.seed,
        }
        if args.draws:
            rng = np.random.default_rng(args.seed)
            lists = [list(model.sample_ranking(rng)) for _ in range(args.draws)]
            save_population(args.out_data, RankingPopulation.from_lists(lists))
            payload["population_file"] = args.out_data
            payload["draws"] = args.draws
        _write_json(args.out, payload)
        return 0
    inst = gen_random_instance(args.n, args.m, args.users, args.model, args.seed)
    save_rule_config(args.out_rules, Mode.POSITIVE, inst.rules)
    with open(args.out_data, "w", encoding="utf-8") as fh:
        fh.write(inst.to_json())
    _write_json(
        args.out,
        {
            "schema": 1,
            "kind": "random",
            "model": args.model,
            "n_passwords": args.n,
            "m": args.m,
            "users": args.users,
            "seed": args.seed,
            "rules_file": args.out_rules,
            "instance_file": args.out_data,
        },
    )
    return 0


def _cmd_emit_rules(args) -> int:
    dictionary = Dictionary.from_file(args.dictionary)
    rules = standard_rule_set(args.mode, dictionary)
    save_rule_config(args.out, args.mode, rules)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polopt",
        description="construct optimal and near-optimal password composition policies",
    )
    parser.add_argument("--version", action="version", version=f"polopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize-exact", help="full-information optimizers")
    p.add_argument("--model", choices=["ranking", "normalization"], required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--rules", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument(
        "--alg",
        choices=["guess-check", "iter-elim", "sort-opt", "brute"],
        default="brute",
    )
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=["withcount", "probs", "population"])
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_optimize_exact)

    p = sub.add_parser("optimize-sample", help="sample-access optimizers")
    p.add_argument("--model", choices=["ranking", "normalization"], required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--rules", required=True)
    p.add_argument("--alg", choices=sorted(ALGORITHMS), required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-draws", type=int, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=["withcount", "probs", "population"])
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_optimize_sample)

    p = sub.add_parser("baselines", help="Table-style baseline rows for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rules", required=True, help="positive-form rule config")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_baselines)

    p = sub.add_parser("experiment", help="multi-run sampling protocol from a plan file")
    p.add_argument("--plan", required=True)
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-csv", default=None)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("gen-instance", help="structured or random test instances")
    p.add_argument("--kind", choices=["vertex-cover", "impossibility", "random"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="metadata JSON (stdout by default)")
    p.add_argument("--out-rules", default="rules.json")
    p.add_argument("--out-data", default="instance.json")
    p.add_argument("--g", type=int, default=3, help="vertex count (vertex-cover)")
    p.add_argument("--edges", default="0-1,1-2", help='e.g. "0-1,1-2" (vertex-cover)')
    p.add_argument("--t", type=int, default=1, help="cover threshold (vertex-cover)")
    p.add_argument("--c", type=float, default=2.0, help="target constant (impossibility)")
    p.add_argument("--n", type=int, default=12, help="password count")
    p.add_argument("--block-size", type=int, default=0, help="block size override (impossibility)")
    p.add_argument("--length-x", type=int, default=0, help="|X| override (impossibility)")
    p.add_argument("--r", type=int, default=0, help="block count override (impossibility)")
    p.add_argument("--draws", type=int, default=0, help="also sample a population")
    p.add_argument("--m", type=int, default=4, help="rule count (random)")
    p.add_argument("--users", type=int, default=10, help="list count (random)")
    p.add_argument("--model", choices=["ranking", "normalization"], default="ranking")
    p.set_defaults(fn=_cmd_gen_instance)

    p = sub.add_parser("emit-rules", help="write the standard 21-rule config")
    p.add_argument("--mode", choices=["positive", "negative"], default="positive")
    p.add_argument("--dictionary", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_emit_rules)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
