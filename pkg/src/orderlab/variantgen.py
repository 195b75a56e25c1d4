"""Meaning-equivalent word-order variants via preverbal constituent permutation.

A variant keeps every subtree's internal order fixed and permutes only the
blocks headed by preverbal dependents of the root, so the dependency
structure (and with it the truth-conditional content) is untouched.
Orders whose adjacent relation-label bigrams were never seen between
adjacent preverbal constituents in the reference corpus are filtered out,
and when more than ``cap - 1`` orders survive, 99 are drawn uniformly with
a per-sentence splitmix64 stream (see rng.py) so output is reproducible
regardless of traversal or parallelism.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .corpus import DependencyTree, Document, Token, root_of
from .rng import SplitMix64


@dataclass(frozen=True)
class Constituent:
    """A root dependent's full projective subtree: head position + token span."""

    head_token: int
    span: tuple[int, int]

    def positions(self) -> range:
        return range(self.span[0], self.span[1] + 1)


@dataclass
class AttestedGrammar:
    """Adjacent deprel-label bigrams observed between preverbal root dependents."""

    bigrams: set[tuple[str, str]] = field(default_factory=set)

    def allows(self, labels: list[str]) -> bool:
        return all((a, b) in self.bigrams for a, b in zip(labels, labels[1:]))


class PermissiveGrammar(AttestedGrammar):
    """Grammar that accepts every label sequence (for tests and ablations)."""

    def allows(self, labels: list[str]) -> bool:  # noqa: ARG002
        return True


@dataclass
class VariantSet:
    """Reference tree plus the surviving permuted orders.

    Each variant is stored as the permutation of constituent list positions
    (``orders``); surface token sequences and re-indexed trees are derived
    on demand so downstream features can score either form.
    """

    reference: DependencyTree
    context: DependencyTree | None
    constituents: list[Constituent]
    orders: list[tuple[int, ...]]
    seed: int
    n_enumerated: int = 0
    n_filtered: int = 0
    n_duplicates: int = 0

    @property
    def variants(self) -> list[list[Token]]:
        return [linearize(self.reference, self.apply_order(o)) for o in self.orders]

    def apply_order(self, order: tuple[int, ...]) -> list[Constituent]:
        return [self.constituents[i] for i in order]

    def variant_tokens(self, i: int) -> list[Token]:
        return linearize(self.reference, self.apply_order(self.orders[i]))

    def variant_tree(self, i: int) -> DependencyTree:
        return reindex_tree(self.reference, self.variant_tokens(i),
                            "%s.v%d" % (self.reference.sentence_id, i + 1))

    def signature(self, i: int) -> str:
        """Constituent-order signature: head positions in the variant's order."""
        return ",".join(str(self.constituents[j].head_token) for j in self.orders[i])


def preverbal_constituents(tree: DependencyTree) -> list[Constituent]:
    """Root dependents whose whole span lies strictly left of the root, in order."""
    root = root_of(tree)
    out = []
    for child in tree.children_of(root.index):
        span = tree.subtree_span(child.index)
        if span[1] < root.index:
            out.append(Constituent(head_token=child.index, span=span))
    out.sort(key=lambda c: c.span[0])
    return out


def constituent_labels(tree: DependencyTree, constituents: list[Constituent]) -> list[str]:
    return [tree.token_at(c.head_token).deprel for c in constituents]


def build_attested_grammar(corpus: list[Document]) -> AttestedGrammar:
    """Collect adjacent-label bigrams over all reference trees in the corpus."""
    grammar = AttestedGrammar()
    n_sentences = 0
    for doc in corpus:
        for tree in doc.sentences:
            n_sentences += 1
            labels = constituent_labels(tree, preverbal_constituents(tree))
            grammar.bigrams.update(zip(labels, labels[1:]))
    if n_sentences == 0:
        raise ValueError("cannot build an attested grammar from an empty corpus")
    return grammar


def linearize(tree: DependencyTree, order: list[Constituent]) -> list[Token]:
    """Concatenate constituent spans in ``order``, then root and postverbal material.

    ``order`` must be a permutation of the tree's preverbal constituents.
    """
    expected = preverbal_constituents(tree)
    if sorted(c.head_token for c in order) != sorted(c.head_token for c in expected):
        raise ValueError("order is not a permutation of the preverbal constituents")
    root = root_of(tree)
    tokens: list[Token] = []
    for constituent in order:
        tokens.extend(tree.token_at(p) for p in constituent.positions())
    tokens.extend(tree.tokens[root.index - 1:])
    return tokens


def reindex_tree(reference: DependencyTree, tokens: list[Token], sentence_id: str) -> DependencyTree:
    """Rebuild a DependencyTree for a permuted token sequence.

    Head pointers are remapped through the permutation so the arcs connect
    the same words as in the reference.
    """
    new_pos = {tok.index: i + 1 for i, tok in enumerate(tokens)}
    rebuilt = tuple(
        Token(index=i + 1, form=tok.form, lemma=tok.lemma, upos=tok.upos,
              head=0 if tok.head == 0 else new_pos[tok.head], deprel=tok.deprel)
        for i, tok in enumerate(tokens)
    )
    return DependencyTree(sentence_id=sentence_id, doc_id=reference.doc_id,
                          tokens=rebuilt)


def generate_variants(
    tree: DependencyTree,
    context: DependencyTree | None,
    grammar: AttestedGrammar,
    cap: int = 100,
    seed: int = 0,
    max_constituents: int = 10,
) -> VariantSet:
    """Enumerate, filter, deduplicate, and cap the permuted orders of ``tree``.

    The reference's own ordering is never emitted.  Orders that would
    reproduce the reference surface string (possible when two constituents
    share a surface) or duplicate an earlier variant's surface are dropped
    and counted.  When survivors exceed ``cap - 1``, reservoir sampling
    with the per-sentence stream keeps exactly ``cap - 1`` of them.
    """
    if cap < 2:
        raise ValueError("cap must be >= 2")
    constituents = preverbal_constituents(tree)
    rng = SplitMix64(seed, tree.doc_id + "/" + tree.sentence_id)
    result = VariantSet(reference=tree, context=context, constituents=constituents,
                        orders=[], seed=seed)
    n = len(constituents)
    if n < 2 or n > max_constituents:
        return result

    labels = constituent_labels(tree, constituents)
    surfaces = [" ".join(tree.token_at(p).form for p in c.positions())
                for c in constituents]
    surface_class: dict[str, int] = {}
    classes = tuple(surface_class.setdefault(s, len(surface_class)) for s in surfaces)
    identity = tuple(range(n))

    keep = cap - 1
    reservoir: list[tuple[int, ...]] = []
    seen_surfaces = {classes}  # reference's class tuple: never emit its surface
    n_survivors = 0
    for perm in itertools.permutations(range(n)):
        if perm == identity:
            continue
        result.n_enumerated += 1
        if not grammar.allows([labels[i] for i in perm]):
            result.n_filtered += 1
            continue
        class_tuple = tuple(classes[i] for i in perm)
        if class_tuple in seen_surfaces:
            result.n_duplicates += 1
            continue
        seen_surfaces.add(class_tuple)
        if n_survivors < keep:
            reservoir.append(perm)
        else:
            j = rng.below(n_survivors + 1)
            if j < keep:
                reservoir[j] = perm
        n_survivors += 1
    reservoir.sort()
    result.orders = reservoir
    return result


def variants_tsv_rows(vset: VariantSet) -> list[str]:
    """External record format; variant_id 0 is reserved for the reference."""
    ref = vset.reference
    ref_sig = ",".join(str(c.head_token) for c in vset.constituents)
    rows = ["%s\t%s\t0\t%s\t%s" % (ref.doc_id, ref.sentence_id,
                                   " ".join(ref.forms()), ref_sig)]
    for i in range(len(vset.orders)):
        forms = " ".join(t.form for t in vset.variant_tokens(i))
        rows.append("%s\t%s\t%d\t%s\t%s" % (ref.doc_id, ref.sentence_id,
                                            i + 1, forms, vset.signature(i)))
    return rows
