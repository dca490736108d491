"""Time-aware generative recommendation engine."""

from tempogr.corpus import (
    Interaction,
    ItemRecord,
    SplitDataset,
    UserSequence,
    build_sequences,
    interval_group,
    k_core_filter,
    leave_one_out_split,
    load_events,
    load_metadata,
)
from tempogr.decoding import beam_search, full_rank
from tempogr.evaluation import MetricsReport, evaluate, ndcg_at_k, recall_at_k
from tempogr.identifiers import (
    IdTrie,
    TextualId,
    assign_textual_ids,
    build_trie,
    compute_tf_idf,
    tokenize,
)
from tempogr.prompting import PromptVariant, render_transition_context, render_user_context
from tempogr.scoring import BuiltinScorer, ScoringConfig, ScoringContext, fit
from tempogr.transition import DecayParams, TransitionGraph, build_graph, time_weight
from tempogr.trend import TrendTable, aggregate, build_trend_table, rerank_external, trend_score

__version__ = "0.1.0"
