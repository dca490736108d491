"""Write a small review-style fixture (Amazon-like ids, Zipf item popularity).

Sparse enough that 5-core filtering needs several rounds to converge.

    python3 scripts/make_amazon_fixture.py tests/fixtures
"""

import argparse
import json
from pathlib import Path

import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path)
    ap.add_argument("--users", type=int, default=400)
    ap.add_argument("--items", type=int, default=250)
    ap.add_argument("--seed", type=int, default=2014)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    alnum = np.array(list("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"))
    users = ["A" + "".join(rng.choice(alnum, 13)) for _ in range(args.users)]
    asins = ["B00" + "".join(rng.choice(alnum, 7)) for _ in range(args.items)]
    pop = 1.0 / np.arange(1, args.items + 1) ** 1.1
    pop /= pop.sum()
    words = "shampoo lotion brush serum mascara polish cream gel soap mask oil balm spray comb".split()

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "amazon_events.jsonl", "w") as fh:
        for u in users:
            n = int(rng.geometric(0.12)) + 1
            start = int(rng.integers(1_300_000_000, 1_400_000_000))
            for k, j in enumerate(rng.choice(args.items, size=n, p=pop)):
                ts = start + k * int(rng.integers(1, 40)) * 86400
                fh.write(json.dumps({"user": u, "item": asins[j], "timestamp": ts}) + "\n")
    with open(args.out / "amazon_metadata.jsonl", "w") as fh:
        for a in asins:
            w = rng.choice(words, 3, replace=False)
            fh.write(json.dumps({
                "item": a,
                "title": f"{w[0]} {w[1]} {a.lower()}",
                "brand": str(rng.choice(["Acme", "Lumen", "Nordic"])),
                "categories": ["Beauty", str(w[2]).title()],
                "description": f"gentle {w[0]} for daily use",
            }) + "\n")


if __name__ == "__main__":
    main()
