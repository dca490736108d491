"""Trie-constrained decoding of item identifiers."""

from __future__ import annotations

import math
from typing import Sequence

from tempogr.identifiers import END, SEPARATOR, IdTrie
from tempogr.scoring import ScoringModel


class BeamTooSmall(ValueError):
    pass


def require_beam(B: int, k: int) -> None:
    if B < k:
        raise BeamTooSmall(f"beam too small for k: B={B} < {k}")


def _allowed_scores(model: ScoringModel, ctx, trie: IdTrie, prefix: Sequence[str]):
    """Model log-probs restricted to the trie continuations of ``prefix``."""
    node = trie.node_for(prefix)
    logprobs = model.next_token_logprobs(ctx, prefix)
    for tok, child in node.children.items():
        lp = logprobs.get(tok, -math.inf)
        if lp != -math.inf:
            yield tok, child, lp


def beam_search(model: ScoringModel, ctx, trie: IdTrie, B: int) -> list[tuple[str, float]]:
    """Width-``B`` beam search; returns up to ``B`` (item, beam_score), best first.

    A hypothesis finishes when it takes the END token. Open hypotheses are pruned
    to the ``B`` best; finished ones are kept in a separate pool of size ``B``,
    and the search stops once no open hypothesis can still beat the worst of a
    full pool (scores only decrease as tokens are added). Equal scores are
    ordered by rendered ID.
    """
    if B < 1:
        raise ValueError("beam width must be >= 1")
    open_: list[tuple[float, tuple[str, ...]]] = [(0.0, ())]
    finished: list[tuple[float, str, str]] = []
    while open_:
        candidates = []
        for score, prefix in open_:
            for tok, child, lp in _allowed_scores(model, ctx, trie, prefix):
                total = score + lp
                if tok == END:
                    finished.append((total, SEPARATOR.join(prefix), child.item))
                else:
                    candidates.append((total, (*prefix, tok)))
        finished.sort(key=lambda f: (-f[0], f[1]))
        del finished[B:]
        candidates.sort(key=lambda c: (-c[0], SEPARATOR.join(c[1])))
        open_ = candidates[:B]
        if len(finished) == B and open_ and open_[0][0] < finished[-1][0]:
            break
    return [(item, score) for score, _, item in finished]


def full_rank(model: ScoringModel, ctx, trie: IdTrie) -> list[tuple[str, float]]:
    """Score every catalog item by its full-path log-probability, best first."""
    scored = []
    stack: list[tuple[tuple[str, ...], float]] = [((), 0.0)]
    while stack:
        prefix, score = stack.pop()
        for tok, child, lp in _allowed_scores(model, ctx, trie, prefix):
            total = score + lp
            if tok == END:
                scored.append((total, SEPARATOR.join(prefix), child.item))
            else:
                stack.append(((*prefix, tok), total))
    scored.sort(key=lambda f: (-f[0], f[1]))
    return [(item, score) for score, _, item in scored]
