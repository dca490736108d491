"""Prompt-variant ablation and trend sweep on the synthetic temporal-shift data.

Runs in memory (no artifact directory) and prints one CSV block of overall
Recall/NDCG per lambda. Per-interval-group cells go to --json-out.

    python3 scripts/run_synthetic_ablation.py --users 2000 --items 300 --seed 7
"""

import argparse
import json
import logging
from dataclasses import asdict, dataclass, replace

from tempogr import engine
from tempogr.config import EngineConfig
from tempogr.corpus import interval_group
from tempogr.evaluation import ablate_variants, ablation_csv, select_lambda
from tempogr.prompting import PromptVariant
from tempogr.synthetic import SyntheticConfig, generate


@dataclass(frozen=True)
class ExperimentConfig:
    users: int = 2000
    items: int = 300
    cluster_size: int = 10
    seed: int = 7
    lams: tuple[float, ...] = (0.0, 0.5, 1.0)
    json_out: str = ""


def parse_args() -> ExperimentConfig:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = ExperimentConfig()
    ap.add_argument("--users", type=int, default=d.users)
    ap.add_argument("--items", type=int, default=d.items)
    ap.add_argument("--cluster-size", type=int, default=d.cluster_size)
    ap.add_argument("--seed", type=int, default=d.seed)
    ap.add_argument("--lams", default=",".join(map(str, d.lams)), help="comma-separated trend weights")
    ap.add_argument("--json-out", default="", help="also write every report to this file")
    a = ap.parse_args()
    lams = tuple(float(x) for x in a.lams.split(",") if x)
    return ExperimentConfig(a.users, a.items, a.cluster_size, a.seed, lams, a.json_out)


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    exp = parse_args()
    events, catalog = generate(SyntheticConfig(exp.users, exp.items, exp.cluster_size, seed=exp.seed))
    cfg = EngineConfig(user_tau=10, user_c=0.02, seed=exp.seed)
    loaded = engine.in_memory(cfg, events, catalog)
    groups = interval_group(loaded.split, cfg.boundaries)
    variants = [v.value for v in PromptVariant]

    out = {"experiment": asdict(exp), "config": cfg.hyperparameters(), "runs": {}}
    for lam in exp.lams:
        pipe = replace(loaded.pipeline, lam=lam)
        table = ablate_variants(pipe, loaded.split, variants, "test", groups, threads=cfg.threads)
        print(f"# lambda = {lam}")
        print(ablation_csv(table))
        out["runs"][str(lam)] = {name: rep.to_json() for name, rep in table.items()}

    best, scores = select_lambda(loaded.pipeline, loaded.split, threads=cfg.threads)
    print(f"# lambda selected on valid N@10: {best}")
    out["lambda_sweep"] = {"selected": best, "valid_N@10": {str(k): v for k, v in scores.items()}}
    if exp.json_out:
        with open(exp.json_out, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
