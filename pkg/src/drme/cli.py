"""Command-line entry point.

Subcommands:
  run <config.json> [--set k=v]... [--seed n]   run an experiment per seed
  sanity [--method ld|svgd|hmc]                 analytic sampler checks

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
The JSON config schema is documented in the README; CSV rows go to the
configured output path with header step,method,seed,avg_acc,task_accs,wall_ms.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np

from .evaluate import AttackConfig, pgd_attack
from .evolution import EvolutionConfig
from .nnet import init_mlp
from .stream import ConfigError, StreamSpec, make_split_stream_from_idx, make_synthetic_stream
from .train import TrainConfig, run_continual, run_iid_offline

CSV_HEADER = ["step", "method", "seed", "avg_acc", "task_accs", "wall_ms"]

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["stream", "train", "output", "seeds"],
    "properties": {
        "stream": {"type": "object"},
        "train": {"type": "object"},
        "attack": {"type": "object"},
        "model": {
            "type": "object",
            "properties": {"hidden": {"type": "array", "items": {"type": "integer"}}},
        },
        "output": {"type": "string"},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
    },
}


def _build_configs(raw: dict):
    jsonschema.validate(raw, CONFIG_SCHEMA)
    stream_spec = StreamSpec(**raw["stream"])
    stream_spec.validate()
    train_raw = dict(raw["train"])
    evo_raw = train_raw.pop("evolution", {})
    if isinstance(evo_raw.get("clamp"), list):
        evo_raw["clamp"] = tuple(evo_raw["clamp"])
    train_cfg = TrainConfig(evolution=EvolutionConfig(**evo_raw), **train_raw)
    train_cfg.validate()
    attack_cfg = None
    if "attack" in raw:
        attack_raw = dict(raw["attack"])
        if isinstance(attack_raw.get("clamp"), list):
            attack_raw["clamp"] = tuple(attack_raw["clamp"])
        attack_cfg = AttackConfig(**attack_raw)
        attack_cfg.validate()
    hidden = raw.get("model", {}).get("hidden", [64])
    return stream_spec, train_cfg, attack_cfg, hidden


def _apply_overrides(raw: dict, pairs: list[str]) -> dict:
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass  # keep as string
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return raw


def _single_run(stream_spec, train_cfg, attack_cfg, hidden, seed):
    spec = StreamSpec(**{**stream_spec.__dict__, "seed": stream_spec.seed + seed})
    if spec.source == "synthetic":
        stream = make_synthetic_stream(spec)
    else:
        stream = make_split_stream_from_idx(spec)
    ss = np.random.SeedSequence([stream_spec.seed, seed])
    init_ss, train_ss = ss.spawn(2)
    model = init_mlp([stream.dim, *hidden, stream.num_classes], seed=init_ss)
    cfg = TrainConfig(**{**train_cfg.__dict__, "seed": seed})
    cfg.seed = train_ss
    if train_cfg.method == "IidOffline":
        model, metrics = run_iid_offline(stream, model, cfg)
    else:
        model, metrics = run_continual(stream, model, cfg)
    for row in metrics.rows:
        row.seed = seed
    robust = None
    if attack_cfg is not None:
        X = np.concatenate([ts[0] for ts in stream.test_sets])
        y = np.concatenate([ts[1] for ts in stream.test_sets])
        robust = pgd_attack(model, X, y, attack_cfg)
    return metrics, robust


def cmd_run(args) -> int:
    try:
        with open(args.config) as f:
            raw = json.load(f)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    try:
        raw = _apply_overrides(raw, args.set or [])
        if args.seed is not None:
            raw["seeds"] = [args.seed]
        stream_spec, train_cfg, attack_cfg, hidden = _build_configs(raw)
    except (jsonschema.ValidationError, ConfigError, ValueError, TypeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2

    seeds = raw["seeds"]
    workers = max(1, min(len(seeds), int(os.environ.get("DRME_THREADS", "1"))))
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(
                    lambda s: _single_run(stream_spec, train_cfg, attack_cfg, hidden, s),
                    seeds))
        else:
            results = [_single_run(stream_spec, train_cfg, attack_cfg, hidden, s)
                       for s in seeds]
    except Exception as exc:  # runtime failure, not a usage error
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 1

    out_path = raw["output"]
    write_header = not os.path.exists(out_path) or os.path.getsize(out_path) == 0
    with open(out_path, "a", newline="") as f:
        writer = csv.writer(f)
        if write_header:
            writer.writerow(CSV_HEADER)
        for metrics, _ in results:
            for row in metrics.rows:
                writer.writerow([row.step, row.method, row.seed,
                                 repr(row.avg_acc),
                                 ";".join(repr(a) for a in row.task_accs),
                                 f"{row.wall_ms:.3f}"])

    finals = np.array([m.final_avg_acc for m, _ in results])
    summary = {
        "method": train_cfg.method,
        "seeds": seeds,
        "final_avg_acc": {"mean": float(finals.mean()), "std": float(finals.std())},
    }
    if attack_cfg is not None:
        robust = {}
        for eps in attack_cfg.epsilons:
            vals = np.array([r[eps] for _, r in results])
            robust[str(eps)] = {"mean": float(vals.mean()), "std": float(vals.std())}
        summary["robust_acc"] = robust
    summary_path = os.path.splitext(out_path)[0] + ".summary.json"
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_sanity(args) -> int:
    from .sanity import run_sanity

    checks = run_sanity([args.method] if args.method else None)
    ok = True
    for check in checks:
        print(check)
        ok = ok and check.passed
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="drme",
                                     description="Memory-evolution continual learning runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the JSON experiment config")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (dotted keys, JSON values)")
    p_run.add_argument("--seed", type=int, help="run a single seed instead of the list")
    p_run.set_defaults(func=cmd_run)

    p_sanity = sub.add_parser("sanity", help="analytic stationarity checks")
    p_sanity.add_argument("--method", choices=["ld", "svgd", "hmc"],
                          help="check only this evolver")
    p_sanity.set_defaults(func=cmd_sanity)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    return args.func(args)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
