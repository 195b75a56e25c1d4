"""Per-sentence predictors: dependency length, information status, surprisals.

The seven-column feature vector follows a fixed, versioned order (the same
order used in the feature table files):

    trigram_surp, dep_length, pcfg_surp, is_score,
    lstm_surp, adaptive_lstm_surp, lex_rept_surp

Surprisal totals come from the n-gram and LSTM scorers; PCFG surprisal is
never computed here, only ingested from an external column keyed by
sentence id (variants use "<sent_id>.v<k>").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lstm as neural
from . import ngram
from .corpus import DependencyTree
from .variantgen import VariantSet

FEATURE_COLUMNS = (
    "trigram_surp",
    "dep_length",
    "pcfg_surp",
    "is_score",
    "lstm_surp",
    "adaptive_lstm_surp",
    "lex_rept_surp",
)

CONTENT_POS = frozenset({"NOUN", "PROPN", "VERB", "ADJ", "ADV"})


@dataclass(frozen=True)
class FeatureVector:
    trigram_surp: float = 0.0
    dep_length: int = 0
    pcfg_surp: float = 0.0
    is_score: int = 0
    lstm_surp: float = 0.0
    adaptive_lstm_surp: float = 0.0
    lex_rept_surp: float = 0.0

    def __post_init__(self):
        if self.is_score not in (-1, 0, 1):
            raise ValueError("is_score must be -1, 0 or +1")
        if self.dep_length < 0:
            raise ValueError("dep_length must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in FEATURE_COLUMNS], dtype=float)


@dataclass
class IsConfig:
    subject_object_relations: frozenset = frozenset({"k1", "k2", "k4"})
    content_pos: frozenset = CONTENT_POS
    pronoun_pos: str = "PRON"


def dependency_length(tree: DependencyTree) -> int:
    """Sum over arcs of the number of words intervening between head and dependent."""
    total = 0
    for tok in tree.tokens:
        if tok.head != 0:
            total += abs(tok.head - tok.index) - 1
    return total


def _mention_key(form: str, lemma: str) -> str:
    key = lemma if lemma and lemma != "_" else form
    return key.casefold()


def is_score(target: DependencyTree, context: DependencyTree | None,
             cfg: IsConfig | None = None) -> int:
    """Given/New ordering score of the subject/object constituents.

    A subject or object root dependent is Given when its head is a pronoun
    or any content word in its span was mentioned in the context sentence;
    otherwise New.  The score compares the two leftmost tagged
    constituents: Given-New = +1, New-Given = -1, anything else (including
    fewer than two tagged constituents) = 0.
    """
    cfg = cfg or IsConfig()
    mentioned = set()
    if context is not None:
        mentioned = {_mention_key(t.form, t.lemma) for t in context.tokens}
    root = target.root()
    tagged: list[tuple[int, bool]] = []  # (leftmost position, is_given)
    for child in target.children_of(root.index):
        if child.deprel not in cfg.subject_object_relations:
            continue
        lo, hi = target.subtree_span(child.index)
        given = child.upos == cfg.pronoun_pos
        if not given:
            for pos in range(lo, hi + 1):
                tok = target.token_at(pos)
                if tok.upos in cfg.content_pos and _mention_key(tok.form, tok.lemma) in mentioned:
                    given = True
                    break
        tagged.append((lo, given))
    tagged.sort()
    if len(tagged) < 2:
        return 0
    first, second = tagged[0][1], tagged[1][1]
    if first and not second:
        return 1
    if not first and second:
        return -1
    return 0


@dataclass
class ScorerBundle:
    """Handles to the trained scorers; None fields score as zero."""

    trigram: ngram.TrigramLm | None = None
    lstm: neural.LstmLm | None = None
    cache_mu: float = 0.05
    cache_h_max: int = 100
    adapt: neural.AdaptationConfig = field(default_factory=neural.AdaptationConfig)
    is_cfg: IsConfig = field(default_factory=IsConfig)


@dataclass
class FeatureRow:
    doc_id: str
    sent_id: str
    variant_id: int
    vector: FeatureVector


def row_key(sent_id: str, variant_id: int) -> str:
    return sent_id if variant_id == 0 else "%s.v%d" % (sent_id, variant_id)


def ingest_external_features(lines) -> dict[str, float]:
    """Parse a (sentence_id, value) tab-separated column."""
    mapping: dict[str, float] = {}
    for row_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError("row %d: expected 2 columns, got %d" % (row_no, len(parts)))
        sid, value_s = parts
        try:
            value = float(value_s)
        except ValueError:
            raise ValueError("row %d: non-numeric value %r" % (row_no, value_s)) from None
        if sid in mapping:
            raise ValueError("duplicate sentence id %r" % sid)
        mapping[sid] = value
    return mapping


def assemble_features(
    variant_set: VariantSet,
    scorers: ScorerBundle,
    external: dict[str, float] | None = None,
) -> list[FeatureRow]:
    """One feature row for the reference and each variant of the set.

    Every row is scored under the same context conditioning: the cache is
    filled once from the context sentence, and one adaptation step serves
    all targets.  When ``external`` is None the pcfg column is zero.
    """
    ref = variant_set.reference
    context = variant_set.context
    trees = [ref] + [variant_set.variant_tree(i) for i in range(len(variant_set.orders))]
    forms = [t.forms() for t in trees]

    tri_totals = [0.0] * len(trees)
    lex_totals = [0.0] * len(trees)
    if scorers.trigram is not None:
        cache = ngram.CacheState(mu=scorers.cache_mu, h_max=scorers.cache_h_max)
        if context is not None:
            cache = ngram.update_cache(cache, context.forms(), scorers.trigram.vocab)
        tri_totals = [ngram.sentence_surprisal(scorers.trigram, f).total for f in forms]
        lex_totals = [ngram.cache_sentence_surprisal(scorers.trigram, cache, f).total
                      for f in forms]

    lstm_totals = [0.0] * len(trees)
    adapt_totals = [0.0] * len(trees)
    if scorers.lstm is not None:
        lstm_totals = [neural.lstm_sentence_surprisal(scorers.lstm, f).total for f in forms]
        ctx_forms = context.forms() if context is not None else []
        adapted = neural.adapt_and_score(scorers.lstm, ctx_forms, forms, scorers.adapt)
        adapt_totals = [s.total for s in adapted]

    rows = []
    for i, tree in enumerate(trees):
        key = row_key(ref.sentence_id, i)
        if external is not None:
            if key not in external:
                raise KeyError("external feature column is missing sentence id %r" % key)
            pcfg = external[key]
        else:
            pcfg = 0.0
        vec = FeatureVector(
            trigram_surp=tri_totals[i],
            dep_length=dependency_length(tree),
            pcfg_surp=pcfg,
            is_score=is_score(tree, context, scorers.is_cfg),
            lstm_surp=lstm_totals[i],
            adaptive_lstm_surp=adapt_totals[i],
            lex_rept_surp=lex_totals[i],
        )
        rows.append(FeatureRow(ref.doc_id, ref.sentence_id, i, vec))
    return rows


def feature_table_tsv(rows: list[FeatureRow]) -> str:
    header = "doc_id\tsent_id\tvariant_id\t" + "\t".join(FEATURE_COLUMNS)
    lines = [header]
    for row in rows:
        values = "\t".join(repr(v) for v in row.vector.as_array().tolist())
        lines.append("%s\t%s\t%d\t%s" % (row.doc_id, row.sent_id, row.variant_id, values))
    return "\n".join(lines) + "\n"
