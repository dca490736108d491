"""Keyword identifiers: TF-IDF over item metadata, unique ID assignment and the decoding trie."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from tempogr.corpus import ItemRecord
from tempogr.errors import DataError

TFIDF_VARIANT = "tf=count/len; idf=ln((1+n)/(1+df))+1"
END = "<end>"
SEPARATOR = "-"

_WORD = re.compile(r"[a-z0-9]+")

DEFAULT_STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been before
    being below between both but by can could did do does doing down during each few for
    from further had has have having he her here hers herself him himself his how i if in
    into is it its itself just me more most my myself no nor not now of off on once only or
    other our ours ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too under until up
    very was we were what when where which while who whom why will with would you your
    yours yourself yourselves s t amp nbsp br quot
    """.split()
)


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


def document_terms(record: ItemRecord, stopwords: Iterable[str] = DEFAULT_STOPWORDS) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    text = " ".join(record.text_fields()).lower()
    return [w for w in _WORD.findall(text) if w not in stop]


@dataclass(frozen=True)
class TfIdfVector:
    item: str
    weights: Mapping[str, float]

    def ranked_terms(self) -> list[str]:
        """Terms by descending score, ties in lexicographic order."""
        return sorted(self.weights, key=lambda t: (-self.weights[t], t))


def compute_tf_idf(
    catalog: list[ItemRecord], stopwords: Iterable[str] = DEFAULT_STOPWORDS
) -> list[TfIdfVector]:
    """tf = count / document length, idf = ln((1 + n_docs) / (1 + df)) + 1."""
    if not catalog:
        raise DataError("empty catalog")
    stop = frozenset(stopwords)
    docs = [document_terms(rec, stop) for rec in catalog]
    empty = [rec.item for rec, terms in zip(catalog, docs) if not terms]
    if empty:
        raise DataError(f"items with empty documents after normalization: {', '.join(empty)}")
    df = Counter(t for terms in docs for t in set(terms))
    n_docs = len(docs)
    idf = {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}
    vectors = []
    for rec, terms in zip(catalog, docs):
        counts = Counter(terms)
        length = len(terms)
        vectors.append(TfIdfVector(rec.item, {t: c / length * idf[t] for t, c in counts.items()}))
    return vectors


@dataclass(frozen=True)
class TextualId:
    item: str
    tokens: tuple[str, ...]

    @property
    def rendered(self) -> str:
        return SEPARATOR.join(self.tokens)

    def __str__(self):
        return self.rendered


def tokenize(rendered: str) -> list[str]:
    if not rendered:
        raise ValueError("cannot tokenize an empty identifier")
    tokens = rendered.split(SEPARATOR)
    if any(not t for t in tokens):
        raise ValueError(f"empty token segment in {rendered!r}")
    return tokens


def assign_textual_ids(vectors: list[TfIdfVector], n_keywords: int = 5) -> dict[str, TextualId]:
    """Top-scoring keywords per item, made unique across the catalog.

    Items are processed in input order. On a collision the item takes its next-best
    term, one at a time; once its terms run out, the smallest integer suffix >= 2 that
    makes the ID unique is appended.
    """
    if n_keywords < 1:
        raise ValueError("n_keywords must be >= 1")
    used: set[str] = set()
    ids: dict[str, TextualId] = {}
    for vec in vectors:
        ranked = vec.ranked_terms()
        tokens = ranked[:n_keywords]
        rest = iter(ranked[n_keywords:])
        while SEPARATOR.join(tokens) in used:
            nxt = next(rest, None)
            if nxt is None:
                suffix = 2
                while SEPARATOR.join([*tokens, str(suffix)]) in used:
                    suffix += 1
                tokens = [*tokens, str(suffix)]
                break
            tokens = [*tokens, nxt]
        tid = TextualId(vec.item, tuple(tokens))
        used.add(tid.rendered)
        ids[vec.item] = tid
    return ids


@dataclass
class TrieNode:
    index: int
    children: dict[str, "TrieNode"] = field(default_factory=dict)
    item: str | None = None  # set only on END leaves
    leaf_items: list[int] = field(default_factory=list)  # catalog indices below this node


class IdTrie:
    """Prefix tree over ID tokens. Every complete ID ends with an explicit END edge."""

    def __init__(self):
        self.root = TrieNode(0)
        self.nodes: list[TrieNode] = [self.root]
        self.items: list[str] = []
        self.item_index: dict[str, int] = {}
        self._paths: dict[str, tuple[str, ...]] = {}

    def _child(self, node: TrieNode, token: str) -> TrieNode:
        nxt = node.children.get(token)
        if nxt is None:
            nxt = TrieNode(len(self.nodes))
            self.nodes.append(nxt)
            node.children[token] = nxt
        return nxt

    def insert(self, item: str, tokens: Iterable[str]) -> None:
        tokens = tuple(tokens)
        if not tokens or END in tokens:
            raise ValueError(f"invalid token path for {item!r}: {tokens}")
        if item in self.item_index:
            raise DataError(f"item {item!r} inserted twice")
        node = self.root
        for tok in tokens:
            node = self._child(node, tok)
        if END in node.children:
            raise DataError(
                f"duplicate identifier {SEPARATOR.join(tokens)!r} for {item!r} "
                f"and {node.children[END].item!r}"
            )
        idx = len(self.items)
        self.items.append(item)
        self.item_index[item] = idx
        self._paths[item] = tokens
        leaf = self._child(node, END)
        leaf.item = item
        node = self.root
        node.leaf_items.append(idx)
        for tok in (*tokens, END):
            node = node.children[tok]
            node.leaf_items.append(idx)

    def __len__(self):
        return len(self.items)

    def node_for(self, prefix: Iterable[str]) -> TrieNode:
        node = self.root
        for tok in prefix:
            try:
                node = node.children[tok]
            except KeyError:
                raise KeyError(f"prefix {tuple(prefix)!r} is not a path in the trie") from None
        return node

    def allowed(self, prefix: Iterable[str]) -> list[str]:
        return sorted(self.node_for(prefix).children)

    def lookup(self, tokens: Iterable[str]) -> str | None:
        """Item id for a complete token path (without END), else None."""
        try:
            node = self.node_for(tokens)
        except KeyError:
            return None
        leaf = node.children.get(END)
        return leaf.item if leaf is not None else None

    def __contains__(self, tokens) -> bool:
        return self.lookup(tokens) is not None

    def path(self, item: str) -> tuple[str, ...]:
        """Token path for ``item``, END excluded."""
        return self._paths[item]

    def iter_paths(self) -> Iterator[tuple[tuple[str, ...], str]]:
        """Depth-first enumeration of every (tokens, item) in the accepted language."""
        stack = [(self.root, ())]
        while stack:
            node, prefix = stack.pop()
            for tok, child in node.children.items():
                if tok == END:
                    yield prefix, child.item
                else:
                    stack.append((child, (*prefix, tok)))


def build_trie(ids: Mapping[str, TextualId]) -> IdTrie:
    trie = IdTrie()
    for item, tid in ids.items():
        trie.insert(item, tid.tokens)
    return trie


def save_id_map(path, ids: Mapping[str, TextualId], n_keywords: int, header: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        head = {"tfidf_variant": TFIDF_VARIANT, "n_keywords": n_keywords, **(header or {})}
        fh.write(json.dumps({"header": head}, sort_keys=True) + "\n")
        for tid in ids.values():
            fh.write(json.dumps({"item": tid.item, "tokens": list(tid.tokens)}) + "\n")


def load_id_map(path) -> tuple[dict[str, TextualId], dict]:
    ids: dict[str, TextualId] = {}
    header: dict = {}
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "header" in obj:
                header = obj["header"]
                continue
            try:
                ids[obj["item"]] = TextualId(obj["item"], tuple(obj["tokens"]))
            except (KeyError, TypeError):
                raise DataError(f"{path}: line {lineno}: bad ID record") from None
    return ids, header
