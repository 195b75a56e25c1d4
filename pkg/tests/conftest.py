"""Shared fixtures: hand-built trees, the glossed example sentences, generators."""

from __future__ import annotations

import numpy as np
import pytest

from orderlab.corpus import DependencyTree, Document, Token


def tok(i, form, head, rel, lemma=None, upos="NOUN"):
    return Token(index=i, form=form, lemma=lemma if lemma is not None else form,
                 upos=upos, head=head, deprel=rel)


def tree(tokens, sentence_id="s", doc_id="d"):
    return DependencyTree(sentence_id=sentence_id, doc_id=doc_id, tokens=tuple(tokens))


@pytest.fixture
def context_tree():
    """'amar ujala-ki bhumika nispaksh rehti hai' -- the preceding sentence."""
    return tree([
        tok(1, "amar", 2, "pof_cn", upos="PROPN"),
        tok(2, "ujala", 3, "r6", upos="PROPN"),
        tok(3, "bhumika", 6, "k1"),
        tok(4, "nispaksh", 6, "k1s", upos="ADJ"),
        tok(5, "rehti", 6, "pof", upos="VERB"),
        tok(6, "hai", 0, "root", upos="VERB"),
    ], sentence_id="ctx")


@pytest.fixture
def reference_tree():
    """'amar ujala-ko yah sukravar-ko daak-se prapt hua' (the attested order).

    Five preverbal constituents of the root 'hua', headed by ujala (k4),
    yah (k1, a pronoun), sukravar (k7t), daak (k3), prapt (pof).
    """
    return tree([
        tok(1, "amar", 2, "pof_cn", upos="PROPN"),
        tok(2, "ujala", 10, "k4", upos="PROPN"),
        tok(3, "ko", 2, "lwg_psp", upos="ADP"),
        tok(4, "yah", 10, "k1", upos="PRON"),
        tok(5, "sukravar", 10, "k7t"),
        tok(6, "ko", 5, "lwg_psp", upos="ADP"),
        tok(7, "daak", 10, "k3"),
        tok(8, "se", 7, "lwg_psp", upos="ADP"),
        tok(9, "prapt", 10, "pof"),
        tok(10, "hua", 0, "root", lemma="ho", upos="VERB"),
    ], sentence_id="ref")


def make_random_projective_tree(rng, n_constituents, sentence_id="r", doc_id="d",
                                max_span=3, n_postverbal=0, distinct_forms=True):
    """Verb-final-ish random tree: n constituent subtrees, then the root verb.

    Each constituent is a head with 0..max_span-1 left dependents; all
    constituent heads attach to the final root.  Forms are unique by
    position when distinct_forms is set, so no two constituents share a
    surface string.
    """
    tokens = []
    pos = 1
    rels = ["k1", "k2", "k4", "k7t", "k3", "k7p"]
    heads = []
    for ci in range(n_constituents):
        width = int(rng.integers(1, max_span + 1))
        head_pos = pos + width - 1  # dependents precede their head
        for j in range(width - 1):
            tokens.append(tok(pos, "w%d" % pos, head_pos, "lwg_psp"))
            pos += 1
        heads.append((head_pos, rels[int(rng.integers(0, len(rels)))]))
        tokens.append(tok(pos, "w%d" % pos, 0, "PENDING"))  # fixed below
        pos += 1
    root_pos = pos
    pos += 1
    post = []
    for _ in range(n_postverbal):
        post.append(tok(pos, "w%d" % pos, root_pos, "k7p"))
        pos += 1
    fixed = []
    hi = 0
    for t in tokens:
        if t.deprel == "PENDING":
            head_pos, rel = heads[hi]
            hi += 1
            fixed.append(tok(t.index, t.form, root_pos, rel))
        else:
            fixed.append(t)
    fixed.append(tok(root_pos, "v%d" % root_pos, 0, "root", upos="VERB"))
    fixed.extend(post)
    return tree(fixed, sentence_id=sentence_id, doc_id=doc_id)


def chain_tree(n, sentence_id="chain"):
    """Every head adjacent to its dependent: token i+1 heads token i... rooted at n."""
    toks = [tok(i, "w%d" % i, i + 1, "dep") for i in range(1, n)]
    toks.append(tok(n, "w%d" % n, 0, "root", upos="VERB"))
    return tree(toks, sentence_id=sentence_id)


def as_document(trees, doc_id="d"):
    return Document(doc_id=doc_id, sentences=list(trees))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
