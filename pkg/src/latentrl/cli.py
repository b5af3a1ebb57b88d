"""Command-line entry points.

Subcommands: attack, baseline, sweep-alpha, sweep-episodes, report, and
export-world. Runs are described by a JSON config file; a handful of flags
override the common fields. Exit codes: 0 success, 2 config error,
3 oracle error, 4 numeric failure.
"""

import argparse
import dataclasses
import json
import shlex
import sys
from pathlib import Path

from .errors import ConfigError, NumericError, OracleError
from .harness import (
    ExperimentConfig,
    OracleSpec,
    Seeds,
    attack_query_budget,
    build_world,
    load_summary,
    random_search_baseline,
    run_attack,
    sweep_alpha,
    sweep_episodes,
)
from .oracles import save_world

EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_NUMERIC = 4


def _parse_synth_params(text):
    """synth:k=16,d=32,K=10,... -> OracleSpec kwargs."""
    fields = {
        "k": ("latent_dim", int),
        "d": ("feature_dim", int),
        "K": ("num_classes", int),
        "separation": ("separation", float),
        "temperature": ("temperature", float),
        "perturbation": ("perturbation", float),
        "gain": ("generator_gain", float),
        "anchor_range": ("anchor_range", float),
        "classifier_offset": ("classifier_offset", float),
        "sample_spread": ("sample_spread", float),
        "samples_per_class": ("samples_per_class", int),
    }
    kwargs = {}
    if text:
        for item in text.split(","):
            if not item:
                continue
            if "=" not in item:
                raise ConfigError(f"bad synthetic oracle parameter {item!r}")
            key, value = item.split("=", 1)
            if key not in fields:
                raise ConfigError(f"unknown synthetic oracle parameter {key!r}")
            name, cast = fields[key]
            kwargs[name] = cast(value)
    return kwargs


def parse_oracle_flag(text):
    if text.startswith("synth:"):
        return OracleSpec(kind="synthetic", **_parse_synth_params(text[len("synth:") :]))
    if text == "synth":
        return OracleSpec(kind="synthetic")
    if text.startswith("cmd:"):
        return OracleSpec(
            kind="external", command=tuple(shlex.split(text[len("cmd:") :]))
        )
    raise ConfigError(
        f"--oracle must look like synth:<params> or cmd:<command>, got {text!r}"
    )


def load_config(args):
    if args.config:
        text = Path(args.config).read_text()
        config = ExperimentConfig.from_json(text)
    else:
        config = ExperimentConfig()
    replacements = {}
    if getattr(args, "oracle", None):
        spec = parse_oracle_flag(args.oracle)
        if spec.kind == "synthetic":
            replacements["env"] = dataclasses.replace(
                config.env,
                latent_dim=spec.latent_dim,
                num_classes=spec.num_classes,
                target_class=min(config.env.target_class, spec.num_classes - 1),
            )
        else:
            # external peers announce their own dims; the handshake checks them
            spec = dataclasses.replace(
                spec,
                latent_dim=config.env.latent_dim,
                num_classes=config.env.num_classes,
            )
        replacements["oracle"] = spec
    if getattr(args, "seed", None) is not None:
        replacements["seeds"] = Seeds(
            world=args.seed, agent=args.seed + 1, episodes=args.seed + 2
        )
    if getattr(args, "episodes", None) is not None:
        replacements["max_episodes"] = args.episodes
    if getattr(args, "algorithm", None):
        replacements["algorithm"] = args.algorithm
    if getattr(args, "out", None):
        replacements["output_dir"] = args.out
    if replacements:
        replacements["config_text"] = None  # re-derive the echo from the final config
        config = dataclasses.replace(config, **replacements)
    return config


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--oracle", help="synth:<params> or cmd:<command>")
    parser.add_argument("--seed", type=int, help="base seed (world/agent/episodes)")
    parser.add_argument("--episodes", type=int, help="episodes per target class")
    parser.add_argument("--algorithm", choices=("sac", "td3", "ddpg"))
    parser.add_argument("--out", help="output directory for reports")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentrl",
        description="Latent-space inversion of query-only classifiers with RL agents",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="train one agent per class and report metrics")
    _add_common(p)
    p.add_argument("--resume", action="store_true", help="resume from checkpoints in --out")

    p = sub.add_parser("baseline", help="random-search control at a query budget")
    _add_common(p)
    p.add_argument(
        "--budget",
        type=int,
        default=None,
        help="total query budget (default: matched to the attack configuration)",
    )

    p = sub.add_parser("sweep-alpha", help="accuracy/diversity trade-off sweep")
    _add_common(p)
    p.add_argument(
        "--alphas",
        default="0.0,0.3,0.6,0.9,0.97",
        help="comma-separated diversity factors (default includes the 0.00/0.97 endpoints)",
    )
    p.add_argument("--samples", type=int, default=None, help="exploit samples per factor")

    p = sub.add_parser("sweep-episodes", help="attack accuracy vs episode budget")
    _add_common(p)
    p.add_argument(
        "--checkpoints",
        default=None,
        help="comma-separated ascending episode counts (default: 0 and max_episodes)",
    )

    p = sub.add_parser("report", help="print the summary stored in a run directory")
    p.add_argument("--dir", required=True, help="directory written by a previous run")

    p = sub.add_parser("export-world", help="write a synthetic world file for adapters")
    _add_common(p)
    p.add_argument("--world-out", required=True, help="world JSON destination")
    p.add_argument(
        "--classifier",
        choices=("target", "evaluation"),
        default="target",
        help="which classifier's centroids to export",
    )
    return parser


def _print_summary(summary):
    m = summary.metrics
    print(f"kind: {summary.kind} ({summary.algorithm})")
    if summary.partial:
        print(f"PARTIAL RUN: {summary.failure}")
    print(f"queries: {m.queries_used}  ledger: {summary.ledger}")

    def fmt(x):
        return "-" if x is None else f"{x:.4f}"

    print(
        f"attack_acc={fmt(m.attack_accuracy)} knn={fmt(m.knn_dist)} "
        f"feat={fmt(m.feat_dist)} density={fmt(m.density)} coverage={fmt(m.coverage)}"
    )
    for row in summary.per_class_metrics:
        print(
            f"  class {row['class']}: acc={fmt(row['attack_acc'])} "
            f"knn={fmt(row['knn'])} feat={fmt(row['feat'])} "
            f"density={fmt(row['density'])} coverage={fmt(row['coverage'])} "
            f"queries={row['queries']}"
        )


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "attack":
            config = load_config(args)
            summary = run_attack(config, resume=args.resume)
            _print_summary(summary)
            if summary.partial:
                return EXIT_ORACLE
        elif args.command == "baseline":
            config = load_config(args)
            budget = args.budget
            if budget is None:
                budget = attack_query_budget(config) * len(
                    config.target_classes or range(config.env.num_classes)
                )
            summary = random_search_baseline(config, budget)
            _print_summary(summary)
        elif args.command == "sweep-alpha":
            config = load_config(args)
            alphas = [float(a) for a in args.alphas.split(",") if a]
            rows = sweep_alpha(config, alphas, args.samples)
            print("alpha,attack_acc,density,coverage,queries")
            for r in rows:
                print(
                    f"{r['alpha']},{r['attack_acc']},{r['density']},"
                    f"{r['coverage']},{r['queries']}"
                )
        elif args.command == "sweep-episodes":
            config = load_config(args)
            if args.checkpoints:
                checkpoints = [int(c) for c in args.checkpoints.split(",") if c]
            else:
                checkpoints = [0, config.max_episodes]
            rows = sweep_episodes(config, checkpoints)
            print("episodes,attack_acc,queries")
            for r in rows:
                print(f"{r['episodes']},{r['attack_acc']},{r['queries']}")
        elif args.command == "report":
            summary = load_summary(args.dir)
            _print_summary(summary)
        elif args.command == "export-world":
            config = load_config(args)
            if config.oracle.kind != "synthetic":
                raise ConfigError("export-world needs a synthetic oracle spec")
            world = build_world(config)
            save_world(args.world_out, world, args.classifier)
            print(f"wrote {args.world_out}")
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
