"""Command-line interface: generate synthetic data, run a single estimator,
score an estimate, run config-driven sweeps, and replay bundled scenarios.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import generators as gen
from . import matio
from . import metrics
from .estimators import SolverHyperparams
from .experiments import (
    ESTIMATORS,
    REPLICATES,
    config_from_toml,
    default_spec,
    replicate_config,
    run_sweep,
    write_csv,
)
from .graphs import CovEstimate, GsoKind, SignalMatrix, laplacian_from_adjacency
from .prox import SolverConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_INT_HP = {"h_bound", "t_rw"}


def _parse_hp(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--hp expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in SolverHyperparams.__dataclass_fields__:
            raise UsageError(f"unknown hyperparameter {key!r}")
        out[key] = int(value) if key in _INT_HP else float(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latentgraph",
                     description="graph topology inference with hidden nodes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write synthetic graph/signal CSVs")
    p_gen.add_argument("--model", choices=["rbf", "er"], default="rbf")
    p_gen.add_argument("--n", type=int, default=20)
    p_gen.add_argument("--p", type=float, default=0.2, help="edge probability (er)")
    p_gen.add_argument("--sigma", type=float, default=0.5, help="kernel length-scale (rbf)")
    p_gen.add_argument("--kernel-threshold", type=float, default=0.75)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out-graph", required=True)
    p_gen.add_argument("--signals", choices=["smooth", "stationary", "bandlimited"])
    p_gen.add_argument("--m", type=int, default=100)
    p_gen.add_argument("--order", type=int, default=3, help="filter order (stationary)")
    p_gen.add_argument("--band-size", type=int, default=5)
    p_gen.add_argument("--band-start", type=int, default=0)
    p_gen.add_argument("--noise", type=float, default=0.0)
    p_gen.add_argument("--out-signals")

    p_inf = sub.add_parser("infer", help="run one estimator on a covariance or signal CSV")
    p_inf.add_argument("--alg", required=True, choices=sorted(ESTIMATORS))
    p_inf.add_argument("--cov", help="O x O covariance CSV")
    p_inf.add_argument("--signals", help="O x M signals CSV (sample covariance is formed)")
    p_inf.add_argument("--center", action="store_true", help="subtract row means")
    p_inf.add_argument("--out", required=True, help="path for the estimated shift block")
    p_inf.add_argument("--out-coupling", help="optional path for the latent coupling estimate")
    p_inf.add_argument("--hp", action="append", default=[], metavar="KEY=VALUE")
    p_inf.add_argument("--max-iters", type=int, default=2000)
    p_inf.add_argument("--rel-tol", type=float, default=1e-7)

    p_eval = sub.add_parser("evaluate", help="score an estimate against a ground truth")
    p_eval.add_argument("--est", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--threshold", type=float, default=0.1)
    p_eval.add_argument("--laplacian", action="store_true",
                        help="treat the estimate as Laplacian-like (flip off-diagonal sign)")

    p_sweep = sub.add_parser("sweep", help="run a TOML-configured experiment sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--trials", type=int)
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--hp", action="append", default=[], metavar="KEY=VALUE",
                         help="hyperparameter override applied to every estimator")

    p_rep = sub.add_parser("replicate", help="run a bundled benchmark scenario")
    p_rep.add_argument("scenario", choices=sorted(REPLICATES))
    p_rep.add_argument("--trials", type=int)
    p_rep.add_argument("--seed", type=int, default=0)
    p_rep.add_argument("--workers", type=int, default=1)
    p_rep.add_argument("--out")
    p_rep.add_argument("--timings", action="store_true")
    return parser


def _cmd_generate(args) -> int:
    model = gen.Rbf(args.sigma, args.kernel_threshold) if args.model == "rbf" else gen.ErdosRenyi(args.p)
    graph = gen.gen_graph(model, args.n, args.seed)
    matio.save_matrix(graph.matrix, args.out_graph)
    print(f"wrote {args.n} x {args.n} adjacency to {args.out_graph}")
    if args.signals:
        if not args.out_signals:
            raise UsageError("--signals requires --out-signals")
        if args.signals == "smooth":
            sig = gen.gen_smooth_signals(laplacian_from_adjacency(graph), args.m, args.seed + 1)
        elif args.signals == "stationary":
            sig = gen.gen_stationary_signals(graph, args.order, args.m, args.seed + 1)
        else:
            sig = gen.gen_bandlimited_signals(
                laplacian_from_adjacency(graph), args.band_size, args.band_start, args.m, args.seed + 1
            )
        if args.noise > 0.0:
            sig = gen.add_awgn(sig, args.noise, args.seed + 2)
        matio.save_matrix(sig.data, args.out_signals)
        print(f"wrote {sig.n_nodes} x {sig.n_samples} signals to {args.out_signals}")
    return 0


def _cmd_infer(args) -> int:
    if bool(args.cov) == bool(args.signals):
        raise UsageError("provide exactly one of --cov or --signals")
    spec = default_spec(args.alg, max_iters=args.max_iters, rel_tol=args.rel_tol,
                        **_parse_hp(args.hp))
    if args.cov:
        cov = CovEstimate(matio.load_matrix(args.cov, kind="covariance"))
    else:
        signals = SignalMatrix(matio.load_matrix(args.signals))
        cov = gen.sample_covariance(signals, center=args.center)
    runner, _ = ESTIMATORS[args.alg]
    result = runner(cov, spec)
    matio.save_matrix(result.s_o_hat, args.out)
    print(f"{args.alg}: status={result.status.value} wrote estimate to {args.out}")
    if args.out_coupling:
        if result.k_hat is None:
            raise UsageError(f"{args.alg} does not produce a latent coupling estimate")
        matio.save_matrix(result.k_hat, args.out_coupling)
        print(f"wrote coupling estimate to {args.out_coupling}")
    return 0


def _cmd_evaluate(args) -> int:
    est_m = matio.load_matrix(args.est)
    truth_m = matio.load_matrix(args.truth)
    est_support = metrics.binarize(est_m, args.threshold, laplacian=args.laplacian)
    truth_support = metrics.edge_set_from_adjacency(truth_m)
    f1, prec, rec = metrics.fscore(est_support, truth_support)
    nmi_val = metrics.nmi(est_support, truth_support, est_m.shape[0])
    perfect = int(metrics.perfect_recovery(est_support, truth_support))
    print(f"fscore={f1:.4f} precision={prec:.4f} recall={rec:.4f} nmi={nmi_val:.4f} perfect={perfect}")
    return 0


def _apply_overrides(config, args):
    from dataclasses import replace

    if getattr(args, "trials", None):
        config = replace(config, trials=args.trials)
    if getattr(args, "seed", None):
        config = replace(config, base_seed=args.seed)
    overrides = _parse_hp(getattr(args, "hp", []) or [])
    if overrides:
        new_specs = tuple(
            spec.__class__(name=spec.name, hp=spec.hp.replace(**overrides),
                           cfg=spec.cfg, threshold=spec.threshold)
            for spec in config.estimators
        )
        config = replace(config, estimators=new_specs)
    return config


def _cmd_sweep(args) -> int:
    config = config_from_toml(args.config)
    config = _apply_overrides(config, args)
    rows = run_sweep(config, workers=args.workers)
    write_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_replicate(args) -> int:
    from dataclasses import replace

    config = replicate_config(args.scenario, trials=args.trials, base_seed=args.seed)
    if args.timings:
        config = replace(config, timings=True)
    out = args.out or f"{args.scenario}.csv"
    rows = run_sweep(config, workers=args.workers)
    write_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "infer": _cmd_infer,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "replicate": _cmd_replicate,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
