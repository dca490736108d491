"""Command-line entry point.

    tempogr [--config FILE] COMMAND [--<key> VALUE ...]

Every config key is also a flag (``--user-tau 10``); flags win over the file.
Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 missing or mismatched
upstream artifact.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from tempogr import corpus, engine
from tempogr.config import EngineConfig
from tempogr.errors import ConfigError, EngineError
from tempogr.prompting import PromptVariant
from tempogr.synthetic import SyntheticConfig, generate

log = logging.getLogger("tempogr")

PATH_KEYS = ("events", "metadata", "artifact_dir", "stopwords")

SYNTHETIC_CFG = """\
# generated by gen-synthetic
events = events.jsonl
metadata = metadata.jsonl
artifact_dir = artifacts
# the generator's short gaps are 1-4 days and long gaps 90-180 days; a fast
# user-side decay lets the scorer tell them apart
user_tau = 10
user_c = 0.02
seed = {seed}
"""


def _write_jsonl(path, rows) -> int:
    n = 0
    out = sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")
    try:
        for row in rows:
            out.write(json.dumps(row, sort_keys=True) + "\n")
            n += 1
    finally:
        if out is not sys.stdout:
            out.close()
    return n


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _config_flags(top: bool) -> argparse.ArgumentParser:
    # the subcommand copies suppress their defaults so options given before
    # the command name are not reset by the subparser
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("config overrides")
    unset = None if top else argparse.SUPPRESS
    for f in fields(EngineConfig):
        flag = "--" + f.name.replace("_", "-")
        group.add_argument(flag, dest=f"cfg_{f.name}", metavar=f.name.upper(), default=unset)
    parent.add_argument("--config", default=unset, help="key = value config file")
    parent.add_argument(
        "--force", action="store_true", default=False if top else argparse.SUPPRESS,
        help="accept fingerprint mismatches",
    )
    parent.add_argument("-v", "--verbose", action="store_true", default=False if top else argparse.SUPPRESS)
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _config_flags(top=False)
    parser = argparse.ArgumentParser(
        prog="tempogr", description=__doc__.split("\n\n")[0], parents=[_config_flags(top=True)]
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("preprocess", parents=[common], help="k-core filter, sequences and leave-one-out splits")
    sub.add_parser("assign-ids", parents=[common], help="TF-IDF keyword identifiers")
    sub.add_parser("build-graph", parents=[common], help="item transition graph from train sequences")
    sub.add_parser("train", parents=[common], help="fit the built-in scorer and write its header")

    p = sub.add_parser("render-prompts", parents=[common], help="export rendered prompts as JSON Lines")
    p.add_argument("--role", choices=("train", "valid", "test"), default="test")
    p.add_argument("--output", default=None, help="default: <artifact_dir>/prompts.<role>.jsonl")

    p = sub.add_parser("recommend", parents=[common], help="ranked identifiers per held-out user")
    p.add_argument("--role", choices=("valid", "test"), default="test")
    p.add_argument("--output", default=None)

    p = sub.add_parser("evaluate", parents=[common], help="Recall/NDCG report")
    p.add_argument("--role", choices=("valid", "test"), default="test")
    p.add_argument("--sweep-lambda", action="store_true", help="pick lambda on valid by N@10 first")
    p.add_argument("--output", default=None)

    p = sub.add_parser("rerank", parents=[common], help="trend-rerank external candidate lists")
    p.add_argument("--candidates", required=True)
    p.add_argument("--output", default="-")
    p.add_argument("--trend-table", default=None, help="fixed trend table JSON")
    p.add_argument("--day", type=int, default=None, help="recommendation day index for every user")
    p.add_argument("--save-table", default=None, help="write the table used (requires --day)")

    p = sub.add_parser("ablate", parents=[common], help="evaluate each prompt variant")
    p.add_argument("--variants", default=",".join(v.value for v in PromptVariant))
    p.add_argument("--role", choices=("valid", "test"), default="test")
    p.add_argument("--output", default=None)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write the temporal-shift dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=SyntheticConfig.n_users)
    p.add_argument("--items", type=int, default=SyntheticConfig.n_items)
    p.add_argument("--cluster-size", type=int, default=SyntheticConfig.cluster_size)
    return parser


def resolve_config(args) -> EngineConfig:
    cfg = EngineConfig()
    if args.config:
        cfg = EngineConfig.from_file(args.config)
        base = Path(args.config).resolve().parent
        for key in PATH_KEYS:
            value = getattr(cfg, key)
            if value and not Path(value).is_absolute():
                setattr(cfg, key, str(base / value))
    overrides = {
        k[len("cfg_"):]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None
    }
    return EngineConfig.from_mapping(overrides, cfg).validate()


def cmd_gen_synthetic(args, cfg: EngineConfig) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events, catalog = generate(
        SyntheticConfig(n_users=args.users, n_items=args.items, cluster_size=args.cluster_size, seed=cfg.seed)
    )
    corpus.write_events(out / "events.jsonl", events)
    corpus.write_metadata(out / "metadata.jsonl", catalog)
    (out / "engine.cfg").write_text(SYNTHETIC_CFG.format(seed=cfg.seed), encoding="utf-8")
    log.info("wrote %d events, %d items to %s", len(events), len(catalog), out)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return _dispatch(args, cfg)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream closed stdout early (e.g. piped into head)
        sys.stderr.close()
        return 0


def _dispatch(args, cfg: EngineConfig) -> int:
    store = engine.ArtifactStore(cfg, force=args.force)
    root = Path(cfg.artifact_dir)
    cmd = args.command
    if cmd == "gen-synthetic":
        cmd_gen_synthetic(args, cfg)
    elif cmd == "preprocess":
        log.info("preprocess: %s", engine.preprocess(cfg, store))
    elif cmd == "assign-ids":
        log.info("assign-ids: %s", engine.assign_ids(cfg, store))
    elif cmd == "build-graph":
        log.info("build-graph: %s", engine.build_graph_stage(cfg, store))
    elif cmd == "train":
        log.info("train: %s", engine.train(cfg, store))
    elif cmd == "render-prompts":
        split = store.load_split()
        ids, graph = store.load_ids(), store.load_graph()
        out = args.output or str(root / f"prompts.{args.role}.jsonl")
        _write_jsonl(out, engine.prompts(cfg, split, ids, graph, args.role))
    elif cmd == "recommend":
        loaded = engine.load(cfg, store, args.role)
        out = args.output or str(root / f"recommendations.{args.role}.jsonl")
        _write_jsonl(out, engine.recommendations(loaded, args.role))
    elif cmd == "evaluate":
        loaded = engine.load(cfg, store, args.role)
        report = engine.run_evaluate(cfg, loaded, args.role, sweep=args.sweep_lambda)
        _write_json(args.output or root / f"report.{args.role}.json", report)
        print(json.dumps(report["overall"], sort_keys=True))
    elif cmd == "ablate":
        loaded = engine.load(cfg, store, args.role)
        variants = [v for v in args.variants.split(",") if v]
        try:
            variants = [PromptVariant.parse(v).value for v in variants]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        obj, table = engine.run_ablate(cfg, loaded, variants, args.role)
        out = Path(args.output or root / f"ablation.{args.role}.json")
        _write_json(out, obj)
        out.with_suffix(".csv").write_text(table, encoding="utf-8")
        print(table, end="")
    elif cmd == "rerank":
        split = store.load_split()
        catalog = [r.item for r in store.load_catalog()]
        table = engine.load_trend_table(args.trend_table) if args.trend_table else None
        if args.save_table:
            if args.day is None:
                raise ConfigError("--save-table needs --day")
            counts = engine.trend_counts(cfg, split)
            table = counts.table(args.day, cfg.N)
            _write_json(args.save_table, table.to_json())
        rows = [json.loads(line) for line in open(args.candidates, encoding="utf-8") if line.strip()]
        _write_jsonl(args.output, engine.rerank_candidates(cfg, split, catalog, rows, table, args.day))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
