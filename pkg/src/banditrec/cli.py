"""Command-line entry points.

  banditrec run --config cfg.json [--override key=value ...] --out DIR
  banditrec report --in DIR
  banditrec simtrain --logs logs.jsonl --out model.json [options]
  banditrec genworld --seed N --out DIR [options]

Exit code 0 on success; failures print one machine-readable JSON error line
to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from banditrec import io as brio
from banditrec.harness import ExperimentConfig, emit_report, reload_report, run_experiment
from banditrec.simulator import (
    estimate_propensity,
    gen_synthetic_world,
    select_threshold,
    train_simulator_debiased,
)


def _apply_override(doc: dict, spec: str) -> None:
    """Apply one 'dotted.key=value' override; values parse as JSON when possible."""
    if "=" not in spec:
        raise ValueError(f"override must look like key=value, got {spec!r}")
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def cmd_run(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    for ov in args.override or []:
        _apply_override(doc, ov)
    config = ExperimentConfig(**doc)
    summary, results = run_experiment(config)
    paths = emit_report(summary, results, config, args.out)
    print(json.dumps({
        "policy": summary.policy,
        "mode": summary.mode,
        "mean_cum_ctr": summary.mean_cum_ctr,
        "std_cum_ctr": summary.std_cum_ctr,
        "out": paths,
    }))
    return 0


def cmd_report(args) -> int:
    config, summary, results = reload_report(args.in_dir)
    emit_report(summary, results, config, args.in_dir)
    if summary is None:
        print(json.dumps({"out": args.in_dir, "trials": 0}))
    else:
        print(json.dumps({
            "policy": summary.policy,
            "mean_cum_ctr": summary.mean_cum_ctr,
            "std_cum_ctr": summary.std_cum_ctr,
            "out": args.in_dir,
        }))
    return 0


def cmd_simtrain(args) -> int:
    logs = brio.read_logs(args.logs)
    rng = np.random.default_rng(args.seed)
    n_val = max(1, int(round(args.val_frac * len(logs))))
    idx = rng.permutation(len(logs))
    val = [logs[k] for k in idx[:n_val]]
    train = [logs[k] for k in idx[n_val:]] or logs
    propensities = estimate_propensity(train)
    model = train_simulator_debiased(
        train, propensities, args.k,
        dim=args.dim, epochs=args.epochs, learning_rate=args.lr,
        seed=args.seed, flip_prob=args.flip,
    )
    model.threshold = select_threshold(model, val)
    brio.write_simulator(model, args.out, seed=args.seed)
    print(json.dumps({
        "out": args.out,
        "users": len(model.user_vecs),
        "items": len(model.item_vecs),
        "threshold": model.threshold,
    }))
    return 0


def cmd_genworld(args) -> int:
    world = gen_synthetic_world(
        args.seed, args.topics, args.items_per_topic, args.users, args.dim,
        args.sharpness, flip_prob=args.flip, topic_imbalance=args.imbalance,
        impressions_per_user=args.impressions_per_user,
        items_per_impression=args.items_per_impression,
    )
    os.makedirs(args.out, exist_ok=True)
    paths = {
        "catalog": os.path.join(args.out, "catalog.jsonl"),
        "embeddings": os.path.join(args.out, "embeddings.jsonl"),
        "logs": os.path.join(args.out, "logs.jsonl"),
        "simulator": os.path.join(args.out, "simulator.json"),
    }
    world.catalog.to_jsonl(paths["catalog"])
    brio.write_embeddings(world.item_table, paths["embeddings"])
    brio.write_logs(world.logs, paths["logs"])
    brio.write_simulator(world.model, paths["simulator"], seed=args.seed)
    print(json.dumps({"out": paths, "items": len(world.item_table), "users": len(world.users)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="banditrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--override", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="recompute summaries from an output directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simtrain", help="fit a user-choice simulator from logged interactions")
    p.add_argument("--logs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=4, help="negatives sampled per positive")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--flip", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simtrain)

    p = sub.add_parser("genworld", help="generate a synthetic world's interchange files")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--topics", type=int, default=8)
    p.add_argument("--items-per-topic", type=int, default=200)
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--dim", type=int, default=12)
    p.add_argument("--sharpness", type=float, default=4.0)
    p.add_argument("--flip", type=float, default=0.1)
    p.add_argument("--imbalance", type=float, default=0.0)
    p.add_argument("--impressions-per-user", type=int, default=20)
    p.add_argument("--items-per-impression", type=int, default=5)
    p.set_defaults(func=cmd_genworld)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a machine-readable error line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
