"""Pipeline stages and artifact persistence.

Artifacts live in one directory. Each carries a header with the data
fingerprint (hash of the input files and the config keys that shape the
artifacts); a stage refuses to combine artifacts whose fingerprints disagree
with each other or with the current config, unless forced.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from tempogr import corpus, identifiers
from tempogr.config import EngineConfig, digest, file_checksum
from tempogr.corpus import ItemRecord, SplitDataset
from tempogr.errors import DataError, DependencyError
from tempogr.evaluation import (
    MetricsReport,
    Pipeline,
    ablate_variants,
    ablation_csv,
    evaluate,
    select_lambda,
)
from tempogr.identifiers import IdTrie, TextualId, TfIdfVector
from tempogr.prompting import build_prompt
from tempogr.scoring import BuiltinScorer, fit
from tempogr.transition import TransitionGraph, build_graph, load_graph, save_graph
from tempogr.trend import DailyCounts, TrendTable, load_trend_table, rerank_external

log = logging.getLogger(__name__)

SPLITS, CATALOG, IDS, GRAPH, MODEL = "splits.jsonl", "catalog.jsonl", "ids.jsonl", "graph.json", "model.json"
PRODUCER = {SPLITS: "preprocess", CATALOG: "preprocess", IDS: "assign-ids", GRAPH: "build-graph", MODEL: "train"}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def stopword_set(cfg: EngineConfig) -> frozenset[str]:
    if cfg.stopwords:
        return identifiers.load_stopwords(cfg.stopwords)
    return identifiers.DEFAULT_STOPWORDS


def data_fingerprint(cfg: EngineConfig) -> str | None:
    """None when the input files are not available to hash."""
    try:
        inputs = {"events": file_checksum(cfg.events), "metadata": file_checksum(cfg.metadata)}
        if cfg.stopwords:
            inputs["stopwords"] = file_checksum(cfg.stopwords)
    except OSError:
        return None
    keys = {"k_core": cfg.k_core, "n_keywords": cfg.n_keywords, "exclude_self": cfg.exclude_self}
    return digest({"inputs": inputs, "config": keys})


class ArtifactStore:
    def __init__(self, cfg: EngineConfig, force: bool = False):
        self.cfg = cfg
        self.root = Path(cfg.artifact_dir)
        self.force = force
        self._fingerprint: str | None = None
        self._seen: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            fp = data_fingerprint(self.cfg)
            if fp is None:
                # inputs gone: trust the recorded lineage
                fp = self._seen.get(SPLITS) or self._read_header(SPLITS).get("fingerprint", "")
            self._fingerprint = fp
        return self._fingerprint

    def header(self) -> dict:
        return {"fingerprint": self.fingerprint}

    def require(self, name: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise DependencyError(f"{p} is missing: run {PRODUCER[name]} first")
        return p

    def _read_header(self, name: str) -> dict:
        p = self.require(name)
        if name.endswith(".jsonl"):
            with open(p, encoding="utf-8") as fh:
                first = json.loads(fh.readline() or "{}")
            return first.get("header", {})
        with open(p, encoding="utf-8") as fh:
            return json.load(fh).get("header", {})

    def check(self, name: str, header: Mapping) -> None:
        got = header.get("fingerprint")
        self._seen[name] = got
        expected = self.fingerprint
        if got != expected:
            msg = (
                f"{self.path(name)} has fingerprint {got}, expected {expected}; "
                f"rerun {PRODUCER[name]} or pass --force"
            )
            if not self.force:
                raise DependencyError(msg)
            log.warning(msg)

    # loaders

    def load_split(self) -> SplitDataset:
        split, header = corpus.load_split(self.require(SPLITS))
        self.check(SPLITS, header)
        return split

    def load_catalog(self) -> list[ItemRecord]:
        self.check(CATALOG, self._read_header(CATALOG))
        return corpus.load_metadata(self.path(CATALOG))

    def load_ids(self) -> dict[str, TextualId]:
        ids, header = identifiers.load_id_map(self.require(IDS))
        self.check(IDS, header)
        return ids

    def load_graph(self) -> TransitionGraph:
        graph, header = load_graph(self.require(GRAPH))
        self.check(GRAPH, header)
        return graph


# stages


def preprocess(cfg: EngineConfig, store: ArtifactStore) -> dict:
    events = corpus.load_events(cfg.events)
    catalog = corpus.load_metadata(cfg.metadata)
    kept = corpus.k_core_filter(events, cfg.k_core)
    if not kept:
        raise DataError(f"no interactions survive {cfg.k_core}-core filtering")
    known = {r.item for r in catalog}
    missing = sorted({e.item for e in kept} - known)
    if missing:
        raise DataError(f"{len(missing)} items lack metadata, e.g. {missing[:3]}")
    used = {e.item for e in kept}
    catalog = [r for r in catalog if r.item in used]
    split = corpus.leave_one_out_split(corpus.build_sequences(kept))
    store.root.mkdir(parents=True, exist_ok=True)
    corpus.save_split(store.path(SPLITS), split, store.header())
    corpus.write_metadata(store.path(CATALOG), catalog, store.header())
    return {"events": len(events), "kept": len(kept), "users": len(split.train), "items": len(catalog)}


def tfidf_vectors(cfg: EngineConfig, catalog: list[ItemRecord]) -> list[TfIdfVector]:
    return identifiers.compute_tf_idf(catalog, stopword_set(cfg))


def assign_ids(cfg: EngineConfig, store: ArtifactStore) -> dict:
    catalog = store.load_catalog()
    ids = identifiers.assign_textual_ids(tfidf_vectors(cfg, catalog), cfg.n_keywords)
    identifiers.build_trie(ids)  # asserts injectivity
    identifiers.save_id_map(store.path(IDS), ids, cfg.n_keywords, store.header())
    return {"items": len(ids)}


def build_graph_stage(cfg: EngineConfig, store: ArtifactStore) -> dict:
    split = store.load_split()
    graph = build_graph(split.train.values(), exclude_self=cfg.exclude_self)
    save_graph(store.path(GRAPH), graph, store.header())
    return {"sources": len(graph.sources()), "pairs": graph.n_occurrences()}


def _model_header(cfg: EngineConfig, store: ArtifactStore) -> dict:
    return {
        **store.header(),
        "scoring": asdict(cfg.scoring_config()),
        "checksums": {name: file_checksum(store.require(name)) for name in (SPLITS, CATALOG, IDS, GRAPH)},
    }


def train(cfg: EngineConfig, store: ArtifactStore) -> dict:
    """Writes the model header; statistics are rebuilt from source artifacts on load."""
    store.load_split()
    store.load_catalog()
    store.load_ids()
    store.load_graph()
    header = _model_header(cfg, store)
    store.path(MODEL).write_text(_dump({"header": header}), encoding="utf-8")
    return {"scoring": header["scoring"]}


@dataclass
class Loaded:
    split: SplitDataset
    catalog: list[ItemRecord]
    ids: dict[str, TextualId]
    trie: IdTrie
    graph: TransitionGraph
    model: BuiltinScorer
    pipeline: Pipeline
    data_fp: str


def trend_counts(cfg: EngineConfig, split: SplitDataset, role: str = "test") -> DailyCounts:
    events = split.train_interactions()
    if cfg.trend_include_valid and role == "test":
        events += split.valid_interactions()
    return DailyCounts(events)


def config_fingerprint(cfg: EngineConfig, data_fp: str) -> str:
    return digest({"data": data_fp, "hyperparameters": cfg.hyperparameters()})


def make_pipeline(cfg, split, ids, trie, graph, model, data_fp: str, role: str = "test") -> Pipeline:
    return Pipeline(
        model=model,
        trie=trie,
        ids=ids,
        graph=graph,
        prompt=cfg.prompt_config(),
        B=cfg.B,
        exact=cfg.exact,
        lam=cfg.lam,
        N=cfg.N,
        trend_counts=trend_counts(cfg, split, role),
        fingerprint=config_fingerprint(cfg, data_fp),
    )


def load(cfg: EngineConfig, store: ArtifactStore, role: str = "test") -> Loaded:
    model_path = store.require(MODEL)
    header = json.loads(model_path.read_text(encoding="utf-8"))["header"]
    store.check(MODEL, header)
    for name, checksum in header.get("checksums", {}).items():
        if file_checksum(store.require(name)) != checksum:
            msg = f"{store.path(name)} changed since train; rerun train or pass --force"
            if not store.force:
                raise DependencyError(msg)
            log.warning(msg)
    if header.get("scoring") != asdict(cfg.scoring_config()):
        msg = "scoring hyperparameters differ from the trained model; rerun train or pass --force"
        if not store.force:
            raise DependencyError(msg)
        log.warning(msg)
    split = store.load_split()
    catalog = store.load_catalog()
    ids = store.load_ids()
    graph = store.load_graph()
    trie = identifiers.build_trie(ids)
    model = fit(split, graph, ids, tfidf_vectors(cfg, catalog), cfg.scoring_config(), trie)
    pipe = make_pipeline(cfg, split, ids, trie, graph, model, store.fingerprint, role)
    return Loaded(split, catalog, ids, trie, graph, model, pipe, store.fingerprint)


def in_memory(cfg: EngineConfig, events, catalog: list[ItemRecord], role: str = "test") -> Loaded:
    """All stages without touching disk; used by tests and experiment scripts."""
    kept = corpus.k_core_filter(events, cfg.k_core)
    used = {e.item for e in kept}
    catalog = [r for r in catalog if r.item in used]
    split = corpus.leave_one_out_split(corpus.build_sequences(kept))
    vectors = tfidf_vectors(cfg, catalog)
    ids = identifiers.assign_textual_ids(vectors, cfg.n_keywords)
    trie = identifiers.build_trie(ids)
    graph = build_graph(split.train.values(), exclude_self=cfg.exclude_self)
    model = fit(split, graph, ids, vectors, cfg.scoring_config(), trie)
    data_fp = digest({"events": [(e.user, e.item, e.timestamp) for e in events], "catalog": [r.item for r in catalog]})
    pipe = make_pipeline(cfg, split, ids, trie, graph, model, data_fp, role)
    return Loaded(split, catalog, ids, trie, graph, model, pipe, data_fp)


def report_json(cfg: EngineConfig, report: MetricsReport, extra: Mapping | None = None) -> dict:
    out = report.to_json()
    out["config"] = cfg.hyperparameters()
    out["out_of_grid"] = cfg.out_of_grid()
    if extra:
        out.update(extra)
    return out


def run_evaluate(cfg: EngineConfig, loaded: Loaded, role: str = "test", sweep: bool = False) -> dict:
    pipe = loaded.pipeline
    extra = {"role": role}
    if sweep:
        lam, scores = select_lambda(pipe, loaded.split, threads=cfg.threads)
        pipe = replace(pipe, lam=lam)
        extra["lambda_sweep"] = {"selected": lam, "valid_N@10": {str(k): v for k, v in scores.items()}}
        cfg = replace(cfg, lam=lam)
        pipe.fingerprint = config_fingerprint(cfg, loaded.data_fp)
    groups = corpus.interval_group(loaded.split, cfg.boundaries, role)
    report = evaluate(pipe, loaded.split, role, groups, threads=cfg.threads)
    return report_json(cfg, report, extra)


def run_ablate(cfg: EngineConfig, loaded: Loaded, variants: Iterable[str], role: str = "test") -> tuple[dict, str]:
    groups = corpus.interval_group(loaded.split, cfg.boundaries, role)
    table = ablate_variants(loaded.pipeline, loaded.split, variants, role, groups, threads=cfg.threads)
    obj = {
        "role": role,
        "config": cfg.hyperparameters(),
        "rows": {name: rep.to_json() for name, rep in table.items()},
    }
    return obj, ablation_csv(table)


def recommendations(loaded: Loaded, role: str = "test") -> Iterable[dict]:
    pipe = loaded.pipeline
    for user, held in loaded.split.held_out(role).items():
        ranked = pipe.generate(pipe.context(held))
        if pipe.lam > 0:
            entries = pipe.rerank(ranked, held.day)
            rows = [
                {"item": e.item, "beam_score": e.beam_score, "trend_score": e.trend_score, "final_score": e.final_score}
                for e in entries
            ]
        else:
            rows = [{"item": item, "beam_score": score} for item, score in ranked]
        yield {"user": user, "ranked": rows}


def prompts(cfg: EngineConfig, split: SplitDataset, ids, graph, role: str = "test") -> Iterable[dict]:
    """Rendered contexts for an external trainer. ``train`` yields one example per train position."""
    pcfg = cfg.prompt_config()
    if role == "train":
        for user, seq in split.train.items():
            for t in range(1, len(seq)):
                pair = build_prompt(seq.head(t), corpus.day_index(seq.timestamps[t]), ids, graph, pcfg)
                yield {"user": user, "c_u": pair.c_u, "c_v": pair.c_v, "target": ids[seq.items[t]].rendered}
        return
    for user, held in split.held_out(role).items():
        pair = build_prompt(held.prefix, held.day, ids, graph, pcfg)
        yield {"user": user, "c_u": pair.c_u, "c_v": pair.c_v, "target": ids[held.item].rendered}


def rerank_candidates(
    cfg: EngineConfig,
    split: SplitDataset,
    catalog_items: Iterable[str],
    rows: Iterable[dict],
    table: TrendTable | None = None,
    day: int | None = None,
) -> Iterable[dict]:
    counts = trend_counts(cfg, split, "test") if table is None else None
    catalog_items = set(catalog_items)
    for lineno, row in enumerate(rows, start=1):
        try:
            user = row["user"]
            cands = [(c["item"], float(c["score"])) for c in row["ranked"]]
        except (KeyError, TypeError, ValueError):
            raise DataError(f"candidates line {lineno}: expected user and ranked[{{item, score}}]") from None
        tab = table
        if tab is None:
            t_rec = day
            held = split.test.get(user)
            if t_rec is None and held is not None:
                t_rec = held.day
            if t_rec is None:
                raise DataError(f"candidates line {lineno}: no recommendation day for user {user!r}; pass --day")
            tab = counts.table(t_rec, cfg.N)
        entries = rerank_external(cands, tab, cfg.lam, catalog=catalog_items)
        out = []
        for e in entries:
            rec = {"item": e.item, "score": e.beam_score, "trend_score": e.trend_score, "final_score": e.final_score}
            if not e.in_catalog:
                rec["in_catalog"] = False
            out.append(rec)
        yield {"user": user, "ranked": out}

