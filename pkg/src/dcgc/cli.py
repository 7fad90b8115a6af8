"""Command line entry points: gen, run, eval, sweep, gradcheck.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. Hyperparameters come from defaults, then an optional JSON config
file (--config), then flags; later sources win.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time

import numpy as np

from .clusteval import clustering_metrics
from .encoder import export_embeddings
from .errors import ConfigError, DataError, DcgcError, NumericError
from .figures import loss_figure, sweep_figure
from .gradcheck import TOLERANCE, run_gradient_checks
from .graphio import (
    SbmSpec,
    export_graph,
    generate_sbm,
    homophily_ratio,
    load_graph,
)
from .pipeline import TrainConfig, run_dcgc
from .report import load_report, save_report, summarize_repeats

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DATA_DIR_ENV = "DCGC_DATA_DIR"

METRIC_NAMES = ("acc", "nmi", "ari", "f1")


def _parse_ints(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")


def _parse_floats(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}")


def _resolve_data_dir(args) -> str:
    if getattr(args, "data", None):
        return args.data
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return env
    raise ConfigError(f"no data directory: pass --data or set {DATA_DIR_ENV}")


def _graph_from_dir(data_dir: str):
    attrs = os.path.join(data_dir, "attributes.csv")
    edges = os.path.join(data_dir, "edges.txt")
    labels = os.path.join(data_dir, "labels.txt")
    for required in (attrs, edges):
        if not os.path.exists(required):
            raise DataError(f"missing {required}")
    return load_graph(attrs, edges, labels if os.path.exists(labels) else None)


def _add_train_flags(sp, skip=()) -> None:
    """Flags mirroring TrainConfig fields (kebab-case). Defaults stay None
    so a flag left unset never overrides the config file."""
    opts = [
        ("--k", int, "number of clusters"),
        ("--epochs-pretrain", int, "contrastive pretraining epochs"),
        ("--epochs-finetune", int, "dual-center fine-tuning epochs"),
        ("--t", int, "propagation depth of the filterbank"),
        ("--target-update-interval", int,
         "epochs between target distribution refreshes"),
        ("--tau", float, "neighbor-similarity gate threshold"),
        ("--beta", float, "contrastive weight in the fine-tuning loss"),
        ("--gamma", float, "dual-center weight in the fine-tuning loss"),
        ("--lam", float, "feature-center share of the KL term"),
        ("--embed-dim", int, "embedding width"),
        ("--learning-rate", float, "optimizer step size"),
        ("--seed", int, "base random seed"),
        ("--batch-size", int, "contrastive minibatch size (default: full)"),
        ("--kmeans-n-init", int, "k-means restarts"),
        ("--pseudo-refresh-interval", int,
         "epochs between pseudo-label refreshes during pretraining"),
    ]
    for flag, typ, help_text in opts:
        if flag.lstrip("-").replace("-", "_") in skip:
            continue
        sp.add_argument(flag, type=typ, default=None, help=help_text)
    if "supervision_mode" not in skip:
        sp.add_argument("--supervision-mode", default=None,
                        choices=["neighbor_distribution", "pseudo_label", "none"],
                        help="how negative-pair weights are supervised")
    if "center_mode" not in skip:
        sp.add_argument("--center-mode", default=None,
                        choices=["dual", "feature_only", "nd_only"],
                        help="which center families drive the KL term")
    sp.add_argument("--learnable-lambda", action="store_true", default=None,
                    help="learn the KL mixing weight instead of fixing it")
    sp.add_argument("--normalize-reconstruction", action="store_true",
                    default=None, help="divide the reconstruction loss by N^2")


def _config_from_args(args) -> TrainConfig:
    field_names = {f.name for f in dataclasses.fields(TrainConfig)}
    values = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}")
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(file_values) - field_names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(file_values)
    for name in field_names:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    if "k" not in values:
        raise ConfigError("k is required (--k flag or config file)")
    try:
        return TrainConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e))


def _print_metrics(metrics: dict) -> None:
    print("  ".join(f"{name} {metrics[name]:.4f}" for name in METRIC_NAMES))


def cmd_gen(args) -> int:
    sizes = _parse_ints(args.blocks)
    spec = SbmSpec(block_sizes=tuple(sizes), p_in=args.p_in, p_out=args.p_out,
                   attribute_dim=args.attribute_dim,
                   attribute_separation=args.separation,
                   noise_std=args.noise_std)
    try:
        g = generate_sbm(spec, seed=args.seed)
    except ValueError as e:
        raise ConfigError(str(e))
    h = homophily_ratio(g)
    meta = {
        "blocks": ",".join(str(s) for s in sizes),
        "p_in": spec.p_in,
        "p_out": spec.p_out,
        "attribute_dim": spec.attribute_dim,
        "attribute_separation": spec.attribute_separation,
        "noise_std": spec.noise_std,
        "seed": args.seed,
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
    }
    if h is not None:
        meta["homophily"] = f"{h:.6f}"
    paths = export_graph(g, args.out, meta=meta)
    print("wrote " + " ".join(paths[key] for key in sorted(paths)))
    line = f"n_nodes {g.n_nodes}  n_edges {g.n_edges}"
    if h is not None:
        line += f"  homophily {h:.4f}"
    print(line)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()  # config problems surface before any data is touched
    if args.repeats < 1:
        raise ConfigError(f"--repeats must be >= 1 (got {args.repeats})")
    if args.embedding_out and args.repeats != 1:
        raise ConfigError("--embedding-out needs a single run, not --repeats")
    g = _graph_from_dir(_resolve_data_dir(args))
    if args.repeats == 1:
        rep = run_dcgc(g, cfg, return_embedding=bool(args.embedding_out))
        if args.embedding_out:
            export_embeddings(np.asarray(rep.embedding), args.embedding_out)
            print(f"wrote {args.embedding_out}")
            rep.embedding = None  # the CSV is the export; keep the JSON lean
        save_report(rep, args.out)
        print(f"wrote {args.out}")
        if rep.metrics is not None:
            _print_metrics(rep.metrics)
        else:
            print("no labels in dataset; metrics skipped")
        first = rep.to_dict()
    else:
        reports = []
        for r in range(args.repeats):
            reports.append(run_dcgc(g, dataclasses.replace(cfg, seed=cfg.seed + r)))
        summary = summarize_repeats(reports)
        payload = {"summary": summary, "runs": [rep.to_dict() for rep in reports]}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out} ({args.repeats} runs, seeds {summary['seeds']})")
        if summary["mean"] is not None:
            for name in METRIC_NAMES:
                print(f"{name} {summary['mean'][name]:.4f} "
                      f"± {summary['std'][name]:.4f}")
        else:
            print("no labels in dataset; metrics skipped")
        first = reports[0].to_dict()
    if not args.no_figures:
        fig_path = os.path.splitext(args.out)[0] + "_loss.png"
        loss_figure(first, fig_path)
        print(f"wrote {fig_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    g = _graph_from_dir(_resolve_data_dir(args))
    if g.labels is None:
        raise DataError("dataset has no labels.txt; nothing to evaluate against")
    try:
        rep = load_report(args.report)
    except OSError as e:
        raise DataError(f"cannot read report: {e}")
    except (json.JSONDecodeError, TypeError) as e:
        raise DataError(f"not a run report: {args.report} ({e})")
    pred = np.asarray(rep.predicted)
    if pred.shape != (g.n_nodes,):
        raise DataError(
            f"report holds {pred.size} labels but the dataset has {g.n_nodes} nodes"
        )
    metrics = clustering_metrics(pred, g.labels).as_dict()
    _print_metrics(metrics)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    taus = _parse_floats(args.tau_grid)
    betas = _parse_floats(args.beta_grid) if args.beta_grid else [cfg.beta]
    if not taus or not betas:
        raise ConfigError("sweep grids must be non-empty")
    g = _graph_from_dir(_resolve_data_dir(args))
    rows = []
    for tau in taus:
        for beta in betas:
            row = {"tau": tau, "beta": beta, "seed": cfg.seed,
                   "seconds": None, "error": ""}
            for name in METRIC_NAMES:
                row[name] = None
            started = time.perf_counter()
            try:
                rep = run_dcgc(g, dataclasses.replace(cfg, tau=tau, beta=beta))
                row["seconds"] = time.perf_counter() - started
                if rep.metrics is not None:
                    row.update(rep.metrics)
                print(f"tau {tau:g} beta {beta:g}: "
                      + (f"acc {row['acc']:.4f}" if row["acc"] is not None
                         else "done") + f" ({row['seconds']:.1f}s)")
            except DcgcError as e:
                row["seconds"] = time.perf_counter() - started
                row["error"] = str(e)
                print(f"tau {tau:g} beta {beta:g}: failed: {e}")
            rows.append(row)
    columns = ["tau", "beta", "seed", *METRIC_NAMES, "seconds", "error"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: ("" if row[c] is None else row[c])
                             for c in columns})
    print(f"wrote {args.out}")
    scored = [r for r in rows if r["acc"] is not None]
    if scored:
        best = max(scored, key=lambda r: r["acc"])
        print(f"best acc {best['acc']:.4f} at tau {best['tau']:g} "
              f"beta {best['beta']:g}")
        if not args.no_figures:
            fig_path = os.path.splitext(args.out)[0] + "_heatmap.png"
            sweep_figure(rows, fig_path)
            print(f"wrote {fig_path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    worst = run_gradient_checks(trials=args.trials, seed=args.seed,
                                eps=args.eps)
    failed = False
    for name, err in worst.items():
        ok = err <= TOLERANCE
        failed = failed or not ok
        print(f"{name:15s} {err:.3e}  {'pass' if ok else 'FAIL'}")
    if failed:
        print(f"gradient check failed (tolerance {TOLERANCE:g})",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcgc",
        description="dual-center graph clustering: data generation, "
                    "training runs, evaluation, sweeps, gradient checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic block-model dataset")
    gen.add_argument("--blocks", default="50,50",
                     help="comma-separated block sizes")
    gen.add_argument("--p-in", type=float, default=0.5,
                     help="within-block edge probability")
    gen.add_argument("--p-out", type=float, default=0.1,
                     help="between-block edge probability")
    gen.add_argument("--attribute-dim", type=int, default=16)
    gen.add_argument("--separation", type=float, default=2.0,
                     help="distance between block attribute means")
    gen.add_argument("--noise-std", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="dcgc_data", help="output directory")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="train on a dataset and write a report")
    run.add_argument("--data", default=None,
                     help=f"dataset directory (default: ${DATA_DIR_ENV})")
    run.add_argument("--config", default=None,
                     help="JSON file of config fields; flags win")
    run.add_argument("--out", default="report.json", help="report path")
    run.add_argument("--repeats", type=int, default=1,
                     help="run this many consecutive seeds; report mean ± std")
    run.add_argument("--no-figures", action="store_true",
                     help="skip rendering the loss-trace figure")
    run.add_argument("--embedding-out", default=None,
                     help="also write the fused embedding to this CSV")
    _add_train_flags(run)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="recompute metrics for a saved report")
    ev.add_argument("--report", required=True, help="report JSON from `run`")
    ev.add_argument("--data", default=None,
                    help=f"dataset directory (default: ${DATA_DIR_ENV})")
    ev.add_argument("--out", default=None, help="optional metrics JSON path")
    ev.set_defaults(func=cmd_eval)

    sweep = sub.add_parser("sweep", help="grid over tau and beta")
    sweep.add_argument("--data", default=None,
                       help=f"dataset directory (default: ${DATA_DIR_ENV})")
    sweep.add_argument("--config", default=None,
                       help="JSON file of config fields; flags win")
    sweep.add_argument("--out", default="sweep.csv", help="CSV summary path")
    sweep.add_argument("--tau-grid", default="0.1,0.3,0.5,0.7,0.9",
                       help="comma-separated tau values")
    sweep.add_argument("--beta-grid", default=None,
                       help="comma-separated beta values (default: config beta)")
    sweep.add_argument("--no-figures", action="store_true",
                       help="skip rendering the heatmap figure")
    _add_train_flags(sweep, skip=("tau", "beta"))
    sweep.set_defaults(func=cmd_sweep)

    gc = sub.add_parser("gradcheck",
                        help="compare tape gradients with finite differences")
    gc.add_argument("--trials", type=int, default=20,
                    help="random instances per loss")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--eps", type=float, default=1e-5,
                    help="finite-difference step")
    gc.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
