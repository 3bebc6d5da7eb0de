"""Command-line entry point.

Sub-commands: ``linreg`` and ``dfo`` run the two experiment protocols and
emit long-format CSV; ``mse-validate`` compares the Monte-Carlo estimator
MSE against its closed form; ``theory`` prints any closed-form value;
``gridsearch`` drives the hyperparameter sweep.  Runs are deterministic in
their flags, and a flag set can be saved to / replayed from a plain
key-value config file.  The worker count for fanning out seeds and grid
cells is taken from the GENSMOOTH_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import estimators, theory
from .errors import GensmoothError, UnsupportedSamplerError
from .optimizer import RunConfig, grid_search, run
from .problems import DFO_NAMES, ProblemSpec, build_problem
from .randomness import RngStream, derive, standard_normal
from .samplers import ALL_KINDS, IID_KINDS, SamplerSpec, bes_shrinkage_scale, gs_shrinkage_variance

CSV_HEADER = "command,algo,estimator,L,N,d,c,lr,seed,round,metric,value"

# Flags that make up a reproducible experiment manifest, per command.
_MANIFEST_KEYS = {
    "linreg": ["d", "L", "N", "algo", "estimator", "c", "lr", "rounds", "iters",
               "seeds", "standardize_rewards", "mc_samples", "out"],
    "dfo": ["obj", "d", "L", "N", "algo", "estimator", "c", "lr", "rounds",
            "iters", "seeds", "standardize_rewards", "noise_level", "out"],
    "gridsearch": ["experiment", "obj", "d", "L", "N", "algo", "estimator",
                   "rounds", "iters", "c_grid", "lr_grid", "selection_seeds",
                   "seeds", "standardize_rewards", "noise_level", "mc_samples",
                   "out"],
}


def _worker_count() -> int:
    value = os.environ.get("GENSMOOTH_WORKERS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _map_runs(configs):
    """Run configs in order, fanning out to processes when configured."""
    workers = _worker_count()
    if workers == 1 or len(configs) <= 1:
        return [run(cfg) for cfg in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def _parse_seeds(text: str) -> list[int]:
    """Either a count ("5" means seeds 0..4) or an explicit list ("3,5,8")."""
    if "," in text:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    return list(range(int(text)))


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_row(command: str, config: RunConfig, seed: int, round_index: int,
             metric: str, value: float) -> str:
    fields = [
        command, config.algo, config.estimator, str(config.L), str(config.N),
        str(config.problem.d), _format_value(config.c),
        _format_value(config.learning_rate), str(seed), str(round_index),
        metric, _format_value(value),
    ]
    return ",".join(fields)


def _write_output(lines: list[str], out_path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def save_manifest(path: str, command: str, values: dict) -> None:
    """Write the flag values of a run as ``key = value`` lines."""
    lines = [f"command = {command}"]
    for key in _MANIFEST_KEYS[command]:
        value = values.get(key)
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_manifest(path: str) -> dict:
    """Parse a ``key = value`` config file into a string-valued dict."""
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise GensmoothError(f"bad config line: {raw.rstrip()}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge precedence: built-in defaults < config file < explicit flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        loaded = load_manifest(args.config)
        loaded.pop("command", None)
        merged.update(loaded)
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    missing = [key for key, value in merged.items() if value is None]
    if missing:
        raise GensmoothError(
            "missing required parameters: " + ", ".join(sorted(missing)))
    return merged


def _experiment_configs(command: str, values: dict) -> tuple[list[RunConfig], list[int]]:
    seeds = _parse_seeds(str(values["seeds"]))
    if command == "linreg":
        problem = ProblemSpec(kind="linreg", d=int(values["d"]),
                              mc_samples=int(values["mc_samples"]))
    else:
        problem = ProblemSpec(kind="dfo", d=int(values["d"]),
                              objective=str(values["obj"]),
                              noise_level=float(values["noise_level"]))
    configs = [
        RunConfig(
            problem=problem,
            algo=str(values["algo"]),
            estimator=str(values["estimator"]),
            c=float(values["c"]),
            L=int(values["L"]),
            N=int(values["N"]),
            learning_rate=float(values["lr"]),
            rounds=int(values["rounds"]),
            iters_per_round=int(values["iters"]),
            standardize_rewards=_parse_bool(values["standardize_rewards"]),
            seed=seed,
        )
        for seed in seeds
    ]
    return configs, seeds


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _emit_experiment(command: str, values: dict) -> tuple[list[str], list]:
    configs, seeds = _experiment_configs(command, values)
    records = _map_runs(configs)
    lines = [CSV_HEADER]
    for seed, config, record in zip(seeds, configs, records):
        for row in record.rows:
            lines.append(_csv_row(command, config, seed, row.round_index,
                                  "test_loss" if command == "linreg" else "objective",
                                  row.test_metric))
            if command == "linreg":
                lines.append(_csv_row(command, config, seed, row.round_index,
                                      "grad_mse", row.grad_mse))
        if record.diverged:
            print(f"warning: seed {seed} diverged at round/iteration "
                  f"{record.diverged_at}", file=sys.stderr)
    return lines, records


def _summary(command: str, values: dict, records) -> dict:
    final = {}
    for record in records:
        key = str(record.config.seed)
        final[key] = record.rows[-1].test_metric if record.rows else None
    return {"command": command,
            "parameters": {k: str(v) for k, v in values.items()},
            "final_test_metric_by_seed": final}


def cmd_experiment(command: str, args: argparse.Namespace) -> int:
    defaults = {
        "d": None, "L": None, "N": "1", "algo": None, "estimator": "fd",
        "c": None, "lr": None, "rounds": "100", "iters": "10", "seeds": "5",
        "standardize_rewards": "false", "out": "-",
    }
    if command == "linreg":
        defaults["mc_samples"] = "1000"
    else:
        defaults["obj"] = None
        defaults["noise_level"] = "0.1"
    values = _resolve(args, defaults)
    if args.save_config:
        save_manifest(args.save_config, command, values)
    lines, records = _emit_experiment(command, values)
    _write_output(lines, str(values["out"]))
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(_summary(command, values, records), fh, indent=2)
    return 0


def cmd_mse_validate(args: argparse.Namespace) -> int:
    if args.algo not in IID_KINDS:
        print(f"error: algo {args.algo!r} has non-IID direction entries; "
              "the closed-form MSE does not apply", file=sys.stderr)
        return 2
    root = RngStream(args.seed)
    model = build_problem(
        ProblemSpec(kind="linreg", d=args.d, mc_samples=args.mc_samples),
        derive(root, 0))
    theta = standard_normal(derive(root, 1), args.d)
    spec = SamplerSpec.for_kind(args.algo, args.L, args.d)
    cfg = estimators.EstimatorConfig(kind=args.estimator, c=args.c, L=args.L,
                                     N=args.N)
    empirical = estimators.empirical_mse(model, theta, cfg, spec,
                                         args.replications, derive(root, 2))
    gradient = model.analytic_gradient(theta)
    stats = theory.ProblemStatistics(
        grad_norm_sq=float(gradient @ gradient),
        noise_trace=model.noise_trace(theta, args.noise_mc, derive(root, 3)))
    closed = theory.fd_mse_closed_form(theory.distribution_moments(spec),
                                       args.L, args.N, args.d, stats)
    rel_error = abs(empirical.total - closed.total) / closed.total
    print(f"empirical:   total={empirical.total:.6g} "
          f"bias_sq={empirical.squared_bias:.6g} "
          f"trace_var={empirical.trace_variance:.6g}")
    print(f"closed-form: total={closed.total:.6g} "
          f"bias_sq={closed.squared_bias:.6g} "
          f"trace_var={closed.trace_variance:.6g}")
    print(f"relative_error = {rel_error:.6g}")
    return 0


def cmd_theory(args: argparse.Namespace) -> int:
    if args.subquery == "moments":
        spec = SamplerSpec.for_kind(args.algo, args.L or 1, args.d or 1)
        moments = theory.distribution_moments(spec)
        print(f"variance = {moments.variance!r}")
        print(f"kurtosis = {moments.kurtosis!r}")
    elif args.subquery == "mse":
        spec = SamplerSpec.for_kind(args.algo, args.L, args.d)
        stats = theory.ProblemStatistics(grad_norm_sq=args.grad_norm_sq,
                                         noise_trace=args.noise_trace)
        mse = theory.fd_mse_closed_form(theory.distribution_moments(spec),
                                        args.L, args.N, args.d, stats)
        print(f"total = {mse.total!r}")
        print(f"squared_bias = {mse.squared_bias!r}")
        print(f"trace_variance = {mse.trace_variance!r}")
        print(f"gradient_term = {mse.gradient_term!r}")
        print(f"noise_term = {mse.noise_term!r}")
    elif args.subquery == "shrinkage":
        print(f"sigma2_star = {gs_shrinkage_variance(args.L, args.d)!r}")
        print(f"m_star = {bes_shrinkage_scale(args.L, args.d)!r}")
    elif args.subquery == "gap":
        stats = theory.ProblemStatistics(grad_norm_sq=args.grad_norm_sq,
                                         noise_trace=args.noise_trace)
        print(f"gap = {theory.mse_gap_gss_vs_bess(args.L, args.N, args.d, stats)!r}")
    elif args.subquery == "bound":
        value = theory.convergence_bound(args.M, args.B, args.delta, args.mu,
                                         args.T)
        print(f"bound = {value!r}")
    return 0


def cmd_gridsearch(args: argparse.Namespace) -> int:
    defaults = {
        "experiment": None, "d": None, "L": None, "N": "1", "algo": None,
        "estimator": "fd", "rounds": "100", "iters": "10",
        "c_grid": None, "lr_grid": None, "selection_seeds": None,
        "seeds": "", "standardize_rewards": "false", "out": "-",
        "obj": "sphere", "noise_level": "0.1", "mc_samples": "1000",
    }
    values = _resolve(args, defaults)
    if args.save_config:
        save_manifest(args.save_config, "gridsearch", values)
    command = str(values["experiment"])
    if command not in ("linreg", "dfo"):
        raise GensmoothError(f"experiment must be linreg or dfo, got {command!r}")
    if command == "linreg":
        problem = ProblemSpec(kind="linreg", d=int(values["d"]),
                              mc_samples=int(values["mc_samples"]))
    else:
        problem = ProblemSpec(kind="dfo", d=int(values["d"]),
                              objective=str(values["obj"]),
                              noise_level=float(values["noise_level"]))
    base = RunConfig(
        problem=problem, algo=str(values["algo"]),
        estimator=str(values["estimator"]), c=1.0, L=int(values["L"]),
        N=int(values["N"]), learning_rate=1.0, rounds=int(values["rounds"]),
        iters_per_round=int(values["iters"]),
        standardize_rewards=_parse_bool(values["standardize_rewards"]))
    eval_seeds = _parse_seeds(str(values["seeds"])) if values["seeds"] else None
    result = grid_search(base,
                         _parse_float_list(str(values["c_grid"])),
                         _parse_float_list(str(values["lr_grid"])),
                         _parse_seeds(str(values["selection_seeds"])),
                         eval_seeds=eval_seeds)
    print(f"selected_c = {result.c!r}")
    print(f"selected_lr = {result.learning_rate!r}")
    lines = [CSV_HEADER]
    for cell in result.cells:
        for seed, metric in zip(_parse_seeds(str(values["selection_seeds"])),
                                cell.per_seed):
            config = RunConfig(
                problem=problem, algo=str(values["algo"]),
                estimator=str(values["estimator"]), c=cell.c, L=int(values["L"]),
                N=int(values["N"]), learning_rate=cell.learning_rate,
                rounds=int(values["rounds"]), iters_per_round=int(values["iters"]))
            lines.append(_csv_row("gridsearch", config, seed,
                                  int(values["rounds"]) - 1,
                                  "final_test_metric", metric))
    if str(values["out"]) != "-":
        _write_output(lines, str(values["out"]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gensmooth",
        description="Derivative-free optimization experiments with "
                    "generalized-smoothing gradient estimators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_obj: bool):
        p.add_argument("--d", type=int)
        p.add_argument("--L", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--algo", choices=ALL_KINDS)
        p.add_argument("--estimator", choices=("fd", "at"))
        p.add_argument("--c", type=float)
        p.add_argument("--lr", type=float)
        p.add_argument("--rounds", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--seeds", type=str,
                       help="seed count (5 means 0..4) or comma list (3,5,8)")
        p.add_argument("--standardize-rewards", dest="standardize_rewards",
                       action="store_const", const=True)
        p.add_argument("--out", type=str, help="CSV output path, - for stdout")
        p.add_argument("--config", type=str, help="load flags from a config file")
        p.add_argument("--save-config", dest="save_config", type=str)
        p.add_argument("--summary", type=str, help="write a JSON summary here")
        if with_obj:
            p.add_argument("--obj", choices=DFO_NAMES)
            p.add_argument("--noise-level", dest="noise_level", type=float)
        else:
            p.add_argument("--mc-samples", dest="mc_samples", type=int)

    add_common(sub.add_parser("linreg", help="regression experiment"), False)
    add_common(sub.add_parser("dfo", help="noisy benchmark experiment"), True)

    p = sub.add_parser("mse-validate",
                       help="Monte-Carlo estimator MSE against its closed form")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--algo", choices=ALL_KINDS, required=True)
    p.add_argument("--estimator", choices=("fd", "at"), default="fd")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--replications", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=1000)
    p.add_argument("--noise-mc", dest="noise_mc", type=int, default=200000)

    p = sub.add_parser("theory", help="print closed-form values")
    tsub = p.add_subparsers(dest="subquery", required=True)
    q = tsub.add_parser("moments")
    q.add_argument("--algo", choices=IID_KINDS, required=True)
    q.add_argument("--L", type=int)
    q.add_argument("--d", type=int)
    q = tsub.add_parser("mse")
    q.add_argument("--algo", choices=IID_KINDS, required=True)
    q.add_argument("--L", type=int, required=True)
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--grad-norm-sq", dest="grad_norm_sq", type=float, required=True)
    q.add_argument("--noise-trace", dest="noise_trace", type=float, required=True)
    q = tsub.add_parser("shrinkage")
    q.add_argument("--L", type=int, required=True)
    q.add_argument("--d", type=int, required=True)
    q = tsub.add_parser("gap")
    q.add_argument("--L", type=int, required=True)
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--grad-norm-sq", dest="grad_norm_sq", type=float, required=True)
    q.add_argument("--noise-trace", dest="noise_trace", type=float, required=True)
    q = tsub.add_parser("bound")
    q.add_argument("--M", type=float, required=True)
    q.add_argument("--B", type=float, required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--T", type=int, required=True)

    p = sub.add_parser("gridsearch", help="hyperparameter sweep")
    p.add_argument("--experiment", choices=("linreg", "dfo"))
    p.add_argument("--d", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--algo", choices=ALL_KINDS)
    p.add_argument("--estimator", choices=("fd", "at"))
    p.add_argument("--rounds", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--c-grid", dest="c_grid", type=str)
    p.add_argument("--lr-grid", dest="lr_grid", type=str)
    p.add_argument("--selection-seeds", dest="selection_seeds", type=str)
    p.add_argument("--seeds", type=str,
                   help="evaluation seeds, enforced disjoint from selection")
    p.add_argument("--standardize-rewards", dest="standardize_rewards",
                   action="store_const", const=True)
    p.add_argument("--obj", choices=DFO_NAMES)
    p.add_argument("--noise-level", dest="noise_level", type=float)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--out", type=str)
    p.add_argument("--config", type=str)
    p.add_argument("--save-config", dest="save_config", type=str)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("linreg", "dfo"):
            return cmd_experiment(args.command, args)
        if args.command == "mse-validate":
            return cmd_mse_validate(args)
        if args.command == "theory":
            return cmd_theory(args)
        if args.command == "gridsearch":
            return cmd_gridsearch(args)
    except UnsupportedSamplerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GensmoothError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
