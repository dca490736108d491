"""Scoring contract for ID decoding, and a closed-form built-in scorer.

A scoring model answers one question: given a prompt context and a valid trie
prefix, what is the log-probability of each allowed next token (END included)?
Decoding and evaluation only ever talk to that method, so a fine-tuned
encoder-decoder can be swapped in for :class:`BuiltinScorer`.

The built-in scorer assigns every catalog item a positive mass

    m(j) = s_cont(j) + epsilon * s_trans(j) + delta_pop * pop(j) + delta_floor

and marginalizes it over the trie, so the probability of token ``t`` after
prefix ``rho`` is M(rho + t) / M(rho), where M(node) sums the masses of the
items below the node. The product along a full path is m(j) / M(root).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
from scipy import sparse

from tempogr.corpus import SplitDataset
from tempogr.errors import DataError, NoOutgoingTransitions
from tempogr.identifiers import END, IdTrie, TextualId, TfIdfVector, build_trie
from tempogr.prompting import PromptFeatures, PromptPair, PromptVariant
from tempogr.transition import DecayParams, TransitionGraph, time_weight


class ScoringModel(Protocol):
    def next_token_logprobs(self, ctx: "ScoringContext", prefix: Sequence[str]) -> dict[str, float]: ...


@dataclass(frozen=True)
class ScoringConfig:
    epsilon: float = 0.01
    L: int = 2
    delta_pop: float = 1e-3
    delta_floor: float = 1e-9
    decay: DecayParams = field(default_factory=DecayParams)
    # decay applied to the user's own history; None reuses ``decay``
    user_decay: DecayParams | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.delta_floor <= 0 or self.delta_pop < 0:
            raise ValueError("delta_floor must be > 0 and delta_pop >= 0")

    @property
    def history_decay(self) -> DecayParams:
        return self.user_decay or self.decay


@dataclass(frozen=True)
class ScoringContext:
    """Prompt features as seen through one prompt variant.

    Time information the variant does not verbalize is hidden from the scorer:
    without intervals to the recommendation date, history ages are measured from
    the last history item, and with no time at all every age is zero.
    """

    features: PromptFeatures
    variant: PromptVariant = PromptVariant.TARGET_RELATIVE_ABSOLUTE

    @classmethod
    def from_prompt(cls, pair: PromptPair) -> "ScoringContext":
        return cls(pair.features, pair.variant)

    @property
    def items(self) -> tuple[str, ...]:
        return self.features.items

    @property
    def ages(self) -> tuple[int, ...]:
        days = self.features.days
        if self.variant is PromptVariant.NONE:
            return (0,) * len(days)
        if self.variant.shows_target_intervals:
            return self.features.target_intervals
        return tuple(days[-1] - d for d in days)


def _id_token_matrix(trie: IdTrie, vectors: Mapping[str, TfIdfVector]) -> sparse.csr_matrix:
    """Row-normalized TF-IDF weights restricted to each item's ID tokens."""
    vocab: dict[str, int] = {}
    rows, cols, vals = [], [], []
    for r, item in enumerate(trie.items):
        weights = vectors[item].weights if item in vectors else {}
        entries = [(tok, weights.get(tok, 0.0)) for tok in dict.fromkeys(trie.path(item))]
        norm = math.sqrt(sum(w * w for _, w in entries))
        if norm == 0.0:
            continue
        for tok, w in entries:
            if w > 0.0:
                rows.append(r)
                cols.append(vocab.setdefault(tok, len(vocab)))
                vals.append(w / norm)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(trie), max(len(vocab), 1)))


class BuiltinScorer:
    """Content + transition + popularity item masses marginalized over the ID trie."""

    def __init__(
        self,
        trie: IdTrie,
        content: sparse.csr_matrix,
        transitions: sparse.csr_matrix,
        popularity: np.ndarray,
        config: ScoringConfig,
    ):
        self.trie = trie
        self.config = config
        self._content = content
        self._transitions = transitions
        self._popularity = popularity
        n_nodes, n_items = len(trie.nodes), len(trie)
        rows = [node.index for node in trie.nodes for _ in node.leaf_items]
        cols = [i for node in trie.nodes for i in node.leaf_items]
        self._subtree = sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_items)
        )
        self._node_masses = lru_cache(maxsize=512)(self._compute_node_masses)

    def _history_indices(self, items: Iterable[str]) -> list[int]:
        index = self.trie.item_index
        return [index[i] for i in items if i in index]

    def content_scores(self, ctx: ScoringContext) -> np.ndarray:
        idx, weights = [], []
        decay = self.config.history_decay
        for item, age in zip(ctx.items, ctx.ages):
            j = self.trie.item_index.get(item)
            if j is not None:
                idx.append(j)
                weights.append(time_weight(age, decay))
        if not idx:
            return np.zeros(len(self.trie))
        query = sparse.csr_matrix(np.asarray(weights)) @ self._content[idx]
        return np.asarray((self._content @ query.T).todense()).ravel()

    def transition_scores(self, ctx: ScoringContext) -> np.ndarray:
        last = ctx.items[-self.config.L:]
        if not last:
            return np.zeros(len(self.trie))
        idx = self._history_indices(last)
        total = np.asarray(self._transitions[idx].sum(axis=0)).ravel() if idx else np.zeros(len(self.trie))
        return total / len(last)

    def masses(self, ctx: ScoringContext) -> np.ndarray:
        cfg = self.config
        m = self.content_scores(ctx)
        if cfg.epsilon:
            m = m + cfg.epsilon * self.transition_scores(ctx)
        return m + cfg.delta_pop * self._popularity + cfg.delta_floor

    def item_mass(self, ctx: ScoringContext, item: str) -> float:
        return float(self.masses(ctx)[self.trie.item_index[item]])

    def _compute_node_masses(self, ctx: ScoringContext) -> np.ndarray:
        return self._subtree @ self.masses(ctx)

    def next_token_logprobs(self, ctx: ScoringContext, prefix: Sequence[str]) -> dict[str, float]:
        try:
            node = self.trie.node_for(prefix)
        except KeyError:
            raise ValueError(f"invalid prefix {tuple(prefix)!r}") from None
        M = self._node_masses(ctx)
        base = M[node.index]
        return {tok: math.log(M[child.index] / base) for tok, child in node.children.items()}

    def item_logprob(self, ctx: ScoringContext, item: str) -> float:
        """ln m(item) - ln M(root): the full-path score, in closed form."""
        M = self._node_masses(ctx)
        leaf = self.trie.node_for((*self.trie.path(item), END))
        return math.log(M[leaf.index]) - math.log(M[self.trie.root.index])


def fit(
    split: SplitDataset,
    graph: TransitionGraph,
    ids: Mapping[str, TextualId],
    vectors: Iterable[TfIdfVector],
    config: ScoringConfig = ScoringConfig(),
    trie: IdTrie | None = None,
) -> BuiltinScorer:
    """Precompute the scorer's statistics from train-split artifacts."""
    if not split.train:
        raise DataError("empty train split")
    trie = trie if trie is not None else build_trie(ids)
    vecs = {v.item: v for v in vectors}
    content = _id_token_matrix(trie, vecs)

    index = trie.item_index
    rows, cols, vals = [], [], []
    for src in graph.sources():
        if src not in index:
            continue
        try:
            row = graph.transition_row(src, config.decay)
        except NoOutgoingTransitions:
            continue
        for dst, p in row.items():
            if dst in index:
                rows.append(index[src])
                cols.append(index[dst])
                vals.append(p)
    n = len(trie)
    transitions = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    counts = Counter(item for seq in split.train.values() for item in seq.items)
    total = sum(counts.values())
    popularity = np.array([counts.get(item, 0) / total for item in trie.items])
    return BuiltinScorer(trie, content, transitions, popularity, config)


def teacher_forced_nll(
    model: ScoringModel, trie: IdTrie, examples: Iterable[tuple[ScoringContext, str]]
) -> float:
    """Mean over examples of -sum_t log P(token_t | ctx, tokens_<t), END included."""
    total, n = 0.0, 0
    for ctx, item in examples:
        if item not in trie.item_index:
            raise DataError(f"target {item!r} has no identifier")
        prefix: list[str] = []
        nll = 0.0
        for tok in (*trie.path(item), END):
            nll -= model.next_token_logprobs(ctx, prefix)[tok]
            prefix.append(tok)
        total += nll
        n += 1
    if n == 0:
        raise ValueError("no examples")
    return total / n
