"""CoNLL-style treebank ingestion and validated projective dependency trees.

Documents keep their source order so that sentence k-1 can serve as the
discourse context of sentence k.  Sentences whose trees are malformed
(no root, several roots, cycles, crossing arcs) are skipped and recorded
in an ingestion report rather than repaired: silent repair would corrupt
every downstream feature value.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Token:
    """One treebank token. ``head`` is 0 for the root, else a 1-based index."""

    index: int
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("token index must be >= 1, got %d" % self.index)
        if self.head < 0:
            raise ValueError("token head must be >= 0, got %d" % self.head)
        if self.head == self.index:
            raise ValueError("token %d is its own head" % self.index)


@dataclass(frozen=True)
class DependencyTree:
    sentence_id: str
    doc_id: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def token_at(self, index: int) -> Token:
        """Token at 1-based position ``index``."""
        return self.tokens[index - 1]

    def root(self) -> Token:
        for tok in self.tokens:
            if tok.head == 0:
                return tok
        raise ValueError("tree %s has no root" % self.sentence_id)

    def children_of(self, index: int) -> list[Token]:
        """Dependents of the token at 1-based position ``index``, in linear order."""
        return [t for t in self.tokens if t.head == index]

    def subtree_span(self, index: int) -> tuple[int, int]:
        """Inclusive 1-based span covered by the subtree rooted at ``index``.

        Assumes the tree is projective, so the span is contiguous.
        """
        lo = hi = index
        stack = [index]
        while stack:
            cur = stack.pop()
            for tok in self.tokens:
                if tok.head == cur:
                    lo = min(lo, tok.index)
                    hi = max(hi, tok.index)
                    stack.append(tok.index)
        return lo, hi

    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]


@dataclass
class Document:
    doc_id: str
    sentences: list[DependencyTree] = field(default_factory=list)

    def context_of(self, k: int) -> DependencyTree | None:
        """Preceding sentence of sentence ``k`` (0-based); None for the first."""
        return self.sentences[k - 1] if k > 0 else None


@dataclass
class ColumnMap:
    """0-based CoNLL column positions; defaults follow CoNLL-U."""

    index: int = 0
    form: int = 1
    lemma: int = 2
    upos: int = 3
    head: int = 6
    deprel: int = 7

    def width(self) -> int:
        return max(self.index, self.form, self.lemma, self.upos,
                   self.head, self.deprel) + 1


@dataclass
class IngestReport:
    """Per-sentence accept/reject outcomes; accepted + rejected == total."""

    rows: list[tuple[str, str, str]] = field(default_factory=list)

    def record(self, sentence_id: str, status: str, reason: str = "") -> None:
        self.rows.append((sentence_id, status, reason))

    @property
    def accepted(self) -> int:
        return sum(1 for _, status, _ in self.rows if status == "accepted")

    @property
    def rejected(self) -> int:
        return sum(1 for _, status, _ in self.rows if status == "rejected")

    @property
    def total(self) -> int:
        return len(self.rows)

    def to_tsv(self) -> str:
        lines = ["sentence_id\tstatus\treason"]
        for sid, status, reason in self.rows:
            lines.append("%s\t%s\t%s" % (sid, status, reason))
        return "\n".join(lines) + "\n"


class MalformedRecordError(ValueError):
    """A CoNLL record that cannot be parsed at all (wrong arity, bad integer)."""

    def __init__(self, line_no: int, message: str):
        super().__init__("line %d: %s" % (line_no, message))
        self.line_no = line_no


def arcs_of(tree: DependencyTree) -> list[tuple[int, int]]:
    """All arcs as (head, dependent) position pairs, the root arc as (0, r)."""
    return [(tok.head, tok.index) for tok in tree.tokens]


def crossing_arcs(arcs: list[tuple[int, int]]) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """All pairs of arcs that cross under span normalization.

    Arcs (a, b) and (c, d) cross iff, after sorting each endpoint pair,
    a < c < b < d.  Quadratic enumeration; sentences are short.
    """
    spans = [tuple(sorted(arc)) for arc in arcs]
    crossings = []
    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            (a, b), (c, d) = spans[i], spans[j]
            if a < c < b < d or c < a < d < b:
                crossings.append((arcs[i], arcs[j]))
    return crossings


def validate_tree(tokens: list[Token]) -> str | None:
    """Reason string if the token list is not a valid projective tree, else None."""
    n = len(tokens)
    if n == 0:
        return "empty"
    roots = [t for t in tokens if t.head == 0]
    if len(roots) == 0:
        return "no-root"
    if len(roots) > 1:
        return "multi-root"
    for tok in tokens:
        if tok.head > n:
            return "head-out-of-range"
    # single tree <=> every token reaches the root without revisiting a node
    for tok in tokens:
        seen = set()
        cur = tok
        while cur.head != 0:
            if cur.index in seen:
                return "cycle"
            seen.add(cur.index)
            cur = tokens[cur.head - 1]
    if crossing_arcs([(t.head, t.index) for t in tokens]):
        return "non-projective"
    return None


def parse_treebank(
    lines,
    column_map: ColumnMap | None = None,
    report: IngestReport | None = None,
) -> list[Document]:
    """Parse tab-separated CoNLL-style records into validated documents.

    ``lines`` is any iterable of text lines.  Sentences are separated by
    blank lines; ``# doc_id = X`` and ``# sent_id = Y`` comments name the
    enclosing document and sentence.  Invalid trees are skipped and logged
    to ``report``; unparseable records raise MalformedRecordError with the
    offending line number.
    """
    cmap = column_map or ColumnMap()
    docs: list[Document] = []
    current_doc: Document | None = None
    pending_doc_id = "doc0"
    sent_id = None
    rows: list[tuple[list[str], int]] = []
    auto_sent = 0

    def flush():
        nonlocal current_doc, sent_id, rows, auto_sent
        if not rows:
            sent_id = None
            return
        auto_sent += 1
        sid = sent_id if sent_id is not None else "s%d" % auto_sent
        tokens = []
        reason = None
        for cols, rec_line in rows:
            try:
                tokens.append(Token(
                    index=int(cols[cmap.index]),
                    form=cols[cmap.form],
                    lemma=cols[cmap.lemma],
                    upos=cols[cmap.upos],
                    head=int(cols[cmap.head]),
                    deprel=cols[cmap.deprel],
                ))
            except ValueError as exc:
                if "own head" in str(exc):
                    reason = "self-loop"
                    break
                raise MalformedRecordError(rec_line, str(exc)) from exc
        if reason is None:
            if [t.index for t in tokens] != list(range(1, len(tokens) + 1)):
                reason = "non-consecutive-indices"
        if reason is None:
            reason = validate_tree(tokens)
        if current_doc is None:
            current_doc = Document(doc_id=pending_doc_id)
            docs.append(current_doc)
        if reason is None:
            current_doc.sentences.append(DependencyTree(
                sentence_id=sid, doc_id=current_doc.doc_id, tokens=tuple(tokens)))
            if report is not None:
                report.record(sid, "accepted")
        elif report is not None:
            report.record(sid, "rejected", reason)
        sent_id = None
        rows = []

    line_no = 0
    for raw in lines:
        line_no += 1
        line = raw.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key, value = key.strip(), value.strip()
                if key == "doc_id":
                    flush()
                    current_doc = Document(doc_id=value)
                    docs.append(current_doc)
                    pending_doc_id = value
                elif key == "sent_id":
                    if rows:  # tolerate a missing blank line between sentences
                        flush()
                    sent_id = value
            continue
        cols = line.split("\t")
        if len(cols) < cmap.width():
            raise MalformedRecordError(
                line_no, "expected >= %d tab-separated columns, got %d"
                % (cmap.width(), len(cols)))
        rows.append((cols, line_no))
    flush()
    return [d for d in docs if d.sentences]


def to_conll(doc: Document, column_map: ColumnMap | None = None) -> str:
    """Serialize a document back to the CoNLL-style text ``parse_treebank`` reads."""
    cmap = column_map or ColumnMap()
    width = cmap.width()
    out = ["# doc_id = %s" % doc.doc_id]
    for tree in doc.sentences:
        out.append("# sent_id = %s" % tree.sentence_id)
        for tok in tree.tokens:
            cols = ["_"] * width
            cols[cmap.index] = str(tok.index)
            cols[cmap.form] = tok.form
            cols[cmap.lemma] = tok.lemma
            cols[cmap.upos] = tok.upos
            cols[cmap.head] = str(tok.head)
            cols[cmap.deprel] = tok.deprel
            out.append("\t".join(cols))
        out.append("")
    return "\n".join(out) + "\n"


def root_of(tree: DependencyTree) -> Token:
    """The unique head-0 token (guaranteed by the ingestion invariant)."""
    return tree.root()
