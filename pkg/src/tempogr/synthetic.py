"""Seeded temporal-shift dataset for behavioural checks.

Items come in clusters that share two keywords. Each user has a home cluster
visited over a long early phase, then drifts to a second cluster. Every later
interaction follows a gap rule: after a short gap the user stays in the cluster
of the previous item; after a long gap they return to the home cluster. Within a
cluster, a rotating "hot" item is picked more often than the rest, which gives
the recent-popularity (trend) signal.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from tempogr.corpus import SECONDS_PER_DAY, Interaction, ItemRecord
from tempogr.identifiers import DEFAULT_STOPWORDS

_CONSONANTS = [c for c in string.ascii_lowercase if c not in "aeiou"]
_VOWELS = list("aeiou")


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int = 2000
    n_items: int = 300
    cluster_size: int = 20
    seed: int = 7
    start_day: int = 16000  # 2013-10-22
    horizon_days: int = 700
    home_len: tuple[int, int] = (3, 6)
    home_gap: tuple[int, int] = (5, 20)
    drift_gap: tuple[int, int] = (40, 80)
    short_gap: tuple[int, int] = (1, 4)
    long_gap: tuple[int, int] = (90, 180)
    p_short: float = 0.5
    hot_period: int = 14
    p_hot: float = 0.6


def _words(rng: np.random.Generator, n: int) -> list[str]:
    seen: set[str] = set()
    out = []
    while len(out) < n:
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3))
        if word not in seen and word not in DEFAULT_STOPWORDS:
            seen.add(word)
            out.append(word)
    return out


def _between(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


def generate(cfg: SyntheticConfig = SyntheticConfig()) -> tuple[list[Interaction], list[ItemRecord]]:
    rng = np.random.default_rng(cfg.seed)
    n_clusters = cfg.n_items // cfg.cluster_size
    if n_clusters < 2:
        raise ValueError("need at least two clusters")
    n_items = n_clusters * cfg.cluster_size
    vocab = _words(rng, 2 * n_clusters + 3 * n_items)
    cluster_words = [vocab[2 * c: 2 * c + 2] for c in range(n_clusters)]
    unique = vocab[2 * n_clusters:]

    catalog = []
    members = []
    for c in range(n_clusters):
        cw1, cw2 = cluster_words[c]
        ids = []
        for k in range(cfg.cluster_size):
            idx = c * cfg.cluster_size + k
            u1, u2, u3 = unique[3 * idx: 3 * idx + 3]
            item = f"item{idx:04d}"
            ids.append(item)
            catalog.append(
                ItemRecord(
                    item=item,
                    title=f"{cw1} {cw2} {u1}",
                    categories=(f"{cw1} {cw2}",),
                    description=f"{cw1} {cw2} {u2} {u3}",
                )
            )
        members.append(ids)

    n_epochs = cfg.horizon_days // cfg.hot_period + 2
    hot = rng.integers(0, cfg.cluster_size, size=(n_clusters, n_epochs))

    def pick(cluster: int, day: int) -> str:
        if rng.random() < cfg.p_hot:
            return members[cluster][hot[cluster, (day - cfg.start_day) // cfg.hot_period]]
        return members[cluster][int(rng.integers(cfg.cluster_size))]

    events = []
    for u in range(cfg.n_users):
        home = int(rng.integers(n_clusters))
        drift = (home + 1 + int(rng.integers(n_clusters - 1))) % n_clusters
        n_home = _between(rng, cfg.home_len)
        gaps = [_between(rng, cfg.home_gap) for _ in range(n_home - 1)]
        gaps.append(_between(rng, cfg.drift_gap))
        clusters = [home] * n_home + [drift]
        for _ in range(2):
            if rng.random() < cfg.p_short:
                gaps.append(_between(rng, cfg.short_gap))
                clusters.append(clusters[-1])
            else:
                gaps.append(_between(rng, cfg.long_gap))
                clusters.append(home)
        span = sum(gaps)
        day = cfg.start_day + int(rng.integers(0, max(cfg.horizon_days - span, 1)))
        offsets = [0, *np.cumsum(gaps).tolist()]
        user = f"user{u:05d}"
        for off, cluster in zip(offsets, clusters):
            d = day + int(off)
            second = int(rng.integers(SECONDS_PER_DAY))
            events.append(Interaction(user, pick(cluster, d), d * SECONDS_PER_DAY + second))
    return events, catalog
