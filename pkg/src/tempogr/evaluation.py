"""Leave-one-out full-ranking evaluation: Recall@k, NDCG@k, interval groups, ablations."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from tempogr.corpus import GROUPS, HeldOut, SplitDataset
from tempogr.decoding import beam_search, full_rank, require_beam
from tempogr.identifiers import IdTrie, TextualId
from tempogr.prompting import PromptConfig, PromptVariant, prompt_features
from tempogr.scoring import ScoringContext, ScoringModel
from tempogr.transition import TransitionGraph
from tempogr.trend import DailyCounts, aggregate

DEFAULT_CUTOFFS = (5, 10)
LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def recall_at_k(rank: int | None, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 if rank is not None and rank <= k else 0.0


def ndcg_at_k(rank: int | None, k: int) -> float:
    """Single relevant item: 1 / log2(rank + 1) inside the cutoff."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if rank is None or rank > k:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def conservative_rank(ranked: Sequence[tuple[str, float]], target: str) -> int | None:
    """1-based rank of ``target``; other items with an equal score count as ahead."""
    score = next((s for item, s in ranked if item == target), None)
    if score is None:
        return None
    return sum(1 for _, s in ranked if s >= score)


def metrics_from_ranks(ranks: Iterable[int | None], cutoffs: Sequence[int] = DEFAULT_CUTOFFS) -> dict:
    ranks = list(ranks)
    out: dict = {"users": len(ranks)}
    for k in cutoffs:
        n = len(ranks)
        out[f"R@{k}"] = math.fsum(recall_at_k(r, k) for r in ranks) / n if n else 0.0
        out[f"N@{k}"] = math.fsum(ndcg_at_k(r, k) for r in ranks) / n if n else 0.0
    return out


@dataclass
class MetricsReport:
    cutoffs: tuple[int, ...]
    overall: dict
    groups: dict[str, dict] = field(default_factory=dict)
    config_fingerprint: str = ""

    def to_json(self) -> dict:
        return {
            "cutoffs": list(self.cutoffs),
            "overall": self.overall,
            "groups": self.groups,
            "config_fingerprint": self.config_fingerprint,
        }


@dataclass
class Pipeline:
    """Everything needed to turn a held-out history into a final ranking."""

    model: ScoringModel
    trie: IdTrie
    ids: Mapping[str, TextualId]
    graph: TransitionGraph
    prompt: PromptConfig = field(default_factory=PromptConfig)
    B: int = 20
    exact: bool = False
    lam: float = 0.0
    N: int = 7
    trend_counts: DailyCounts | None = None
    fingerprint: str = ""

    def __post_init__(self):
        self._names = {i: t.rendered for i, t in self.ids.items()}

    @property
    def names(self) -> dict[str, str]:
        return self._names

    def with_variant(self, variant: PromptVariant | str) -> "Pipeline":
        return replace(self, prompt=replace(self.prompt, variant=PromptVariant.parse(variant)))

    def context(self, held: HeldOut) -> ScoringContext:
        feats = prompt_features(held.prefix, held.day, self.graph, self.prompt, self.ids)
        return ScoringContext(feats, self.prompt.variant)

    def generate(self, ctx: ScoringContext) -> list[tuple[str, float]]:
        if self.exact:
            return full_rank(self.model, ctx, self.trie)
        return beam_search(self.model, ctx, self.trie, self.B)

    def rerank(self, ranked: Sequence[tuple[str, float]], day: int, lam: float | None = None):
        lam = self.lam if lam is None else lam
        if self.trend_counts is None:
            raise ValueError("trend reranking needs trend_counts")
        return aggregate(ranked, self.trend_counts.table(day, self.N), lam, names=self._names)

    def final_ranking(self, held: HeldOut, lam: float | None = None) -> list[tuple[str, float]]:
        ranked = self.generate(self.context(held))
        lam = self.lam if lam is None else lam
        if lam > 0:
            return [(e.item, e.final_score) for e in self.rerank(ranked, held.day, lam)]
        return ranked


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _check_beam(pipeline: Pipeline, cutoffs: Sequence[int]) -> None:
    if not pipeline.exact:
        require_beam(pipeline.B, max(cutoffs))


def _report(
    ranks: Mapping[str, int | None],
    groups: Mapping[str, str] | None,
    cutoffs: Sequence[int],
    fingerprint: str,
) -> MetricsReport:
    report = MetricsReport(tuple(cutoffs), metrics_from_ranks(ranks.values(), cutoffs), {}, fingerprint)
    if groups is not None:
        for g in GROUPS:
            report.groups[g] = metrics_from_ranks((r for u, r in ranks.items() if groups.get(u) == g), cutoffs)
    return report


def user_ranks(pipeline: Pipeline, split: SplitDataset, role: str = "test", threads: int = 1) -> dict[str, int | None]:
    held = split.held_out(role)
    users = list(held)
    ranks = _map(lambda u: conservative_rank(pipeline.final_ranking(held[u]), held[u].item), users, threads)
    return dict(zip(users, ranks))


def evaluate(
    pipeline: Pipeline,
    split: SplitDataset,
    role: str = "test",
    groups: Mapping[str, str] | None = None,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    threads: int = 1,
) -> MetricsReport:
    """Mean Recall/NDCG over held-out users, ranked on the final (trend-adjusted) scores."""
    _check_beam(pipeline, cutoffs)
    ranks = user_ranks(pipeline, split, role, threads)
    return _report(ranks, groups, cutoffs, pipeline.fingerprint)


def select_lambda(
    pipeline: Pipeline,
    split: SplitDataset,
    grid: Sequence[float] = LAMBDA_GRID,
    metric: str = "N@10",
    threads: int = 1,
) -> tuple[float, dict[float, float]]:
    """Pick lambda on the validation split; ties go to the smaller lambda.

    Beam outputs are computed once and only the trend aggregation is repeated.
    """
    _check_beam(pipeline, DEFAULT_CUTOFFS)
    held = split.valid
    users = list(held)
    beams = _map(lambda u: pipeline.generate(pipeline.context(held[u])), users, threads)
    scores: dict[float, float] = {}
    for lam in grid:
        ranks = []
        for u, ranked in zip(users, beams):
            final = ranked if lam == 0 else [(e.item, e.final_score) for e in pipeline.rerank(ranked, held[u].day, lam)]
            ranks.append(conservative_rank(final, held[u].item))
        scores[lam] = metrics_from_ranks(ranks)[metric]
    best = max(grid, key=lambda lam: (scores[lam], -lam))
    return best, scores


def ablate_variants(
    pipeline: Pipeline,
    split: SplitDataset,
    variants: Iterable[PromptVariant | str] = tuple(PromptVariant),
    role: str = "test",
    groups: Mapping[str, str] | None = None,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    threads: int = 1,
) -> dict[str, MetricsReport]:
    """One evaluation per prompt variant, everything else held fixed."""
    table = {}
    for v in variants:
        v = PromptVariant.parse(v)
        table[v.value] = evaluate(pipeline.with_variant(v), split, role, groups, cutoffs, threads)
    return table


def ablation_csv(table: Mapping[str, MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    rows = list(table.items())
    if not rows:
        return ""
    metric_names = [k for k in rows[0][1].overall if k != "users"]
    writer.writerow(["variant", *metric_names, "users"])
    for name, rep in rows:
        writer.writerow([name, *(f"{rep.overall[m]:.6f}" for m in metric_names), rep.overall["users"]])
    return buf.getvalue()
