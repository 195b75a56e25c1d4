"""Verb-class subsets, argument frames, case density, and accuracy reports.

Verb classes come from an editable lemma -> class file so the taxonomy can
grow without code changes; anything unmapped falls into OTHERS.  Reports
compare a baseline and an augmented prediction table per subset with the
McNemar test restricted to the subset's pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

from .corpus import DependencyTree
from .ranker import PredictionTable, mcnemar, mcnemar_counts
from .variantgen import preverbal_constituents

OTHERS = "OTHERS"


@dataclass
class VerbClassMap:
    classes: dict[str, str] = field(default_factory=dict)

    def lookup(self, lemma: str) -> str:
        return self.classes.get(lemma, OTHERS)

    @classmethod
    def from_lines(cls, lines) -> "VerbClassMap":
        classes = {}
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            lemma, label = line.split("\t")
            classes[lemma] = label
        return cls(classes)

    @classmethod
    def bundled(cls) -> "VerbClassMap":
        text = resources.files("orderlab").joinpath("data/verb_classes.tsv").read_text("utf-8")
        return cls.from_lines(text.splitlines())


def classify_verb(tree: DependencyTree, vmap: VerbClassMap) -> str:
    """Class of the root verb's lemma; unmapped lemmas are OTHERS."""
    root = tree.root()
    lemma = root.lemma if root.lemma and root.lemma != "_" else root.form
    return vmap.lookup(lemma)


def argument_frame(tree: DependencyTree) -> str:
    """S-DO / S-IO / S-IO-DO by the root's k1/k2/k4 dependents, else NONE."""
    rels = {t.deprel for t in tree.children_of(tree.root().index)}
    has = {r: r in rels for r in ("k1", "k2", "k4")}
    if has["k1"] and has["k2"] and has["k4"]:
        return "S-IO-DO"
    if has["k1"] and has["k2"]:
        return "S-DO"
    if has["k1"] and has["k4"]:
        return "S-IO"
    return "NONE"


def is_conjunct_verb(tree: DependencyTree, any_depth: bool = False) -> bool:
    """True iff a pof dependent marks the root as a noun-verb complex predicate."""
    if any_depth:
        return any(t.deprel == "pof" for t in tree.tokens)
    root = tree.root()
    return any(t.deprel == "pof" for t in tree.children_of(root.index))


def case_density(tree: DependencyTree) -> float | None:
    """Postposition (lwg_psp) tokens per preverbal constituent; None if no constituents."""
    constituents = preverbal_constituents(tree)
    if not constituents:
        return None
    n_psp = 0
    for constituent in constituents:
        for pos in constituent.positions():
            if tree.token_at(pos).deprel == "lwg_psp":
                n_psp += 1
    return n_psp / len(constituents)


def pearson(x, y) -> float | None:
    """Product-moment correlation; None when either side has zero variance."""
    if len(x) != len(y):
        raise ValueError("series must have equal length")
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 points")
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return None
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)


@dataclass
class SubsetRow:
    label: str
    n_pairs: int
    n_sentences: int
    freq_pct: float           # share of pairs
    freq_sent_pct: float      # share of reference sentences
    baseline_acc: float
    augmented_acc: float
    p_value: float | None
    significant: bool


@dataclass
class SubsetReport:
    rows: list[SubsetRow]

    def to_tsv(self) -> str:
        lines = ["subset\tn_pairs\tn_sentences\tfreq_pct\tfreq_sent_pct"
                 "\tbaseline_acc\taugmented_acc\tmcnemar_p\tsignificant"]
        for r in self.rows:
            lines.append("%s\t%d\t%d\t%.2f\t%.2f\t%s\t%s\t%s\t%s" % (
                r.label, r.n_pairs, r.n_sentences, r.freq_pct, r.freq_sent_pct,
                "%.2f" % r.baseline_acc if not math.isnan(r.baseline_acc) else "-",
                "%.2f" % r.augmented_acc if not math.isnan(r.augmented_acc) else "-",
                "%.4f" % r.p_value if r.p_value is not None else "-",
                "yes" if r.significant else "no"))
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        out = ["%-16s %8s %8s %10s %11s %9s" %
               ("Subset", "Pairs", "Freq%", "Baseline", "Augmented", "p")]
        for r in self.rows:
            acc_b = "%.2f" % r.baseline_acc if not math.isnan(r.baseline_acc) else "-"
            acc_a = "%.2f" % r.augmented_acc if not math.isnan(r.augmented_acc) else "-"
            p = ("%.4f" % r.p_value if r.p_value is not None else "-")
            mark = " *" if r.significant else ""
            out.append("%-16s %8d %8.2f %10s %11s %9s%s" %
                       (r.label, r.n_pairs, r.freq_pct, acc_b, acc_a, p, mark))
        return "\n".join(out) + "\n"


def subset_report(baseline: PredictionTable, augmented: PredictionTable,
                  subsets: dict[str, list[int]]) -> SubsetReport:
    """Per-subset accuracies and significance of the augmented model.

    ``subsets`` maps a label to the pair indices it covers.  Accuracy and
    the McNemar test are computed on exactly those indices; a subset with
    no pairs gets an empty row and no test.  Frequencies are reported on
    both bases (pairs and reference sentences) since subsets of different
    sentence lengths contribute very different pair counts.
    """
    total = len(baseline.labels)
    all_groups = len(set(baseline.group_ids)) or 1
    rows = []
    for label, idx in subsets.items():
        if not idx:
            rows.append(SubsetRow(label, 0, 0, 0.0, 0.0,
                                  float("nan"), float("nan"), None, False))
            continue
        sel = list(idx)
        groups = {baseline.group_ids[i] for i in sel}
        acc_b = float(baseline.correct[sel].mean()) * 100
        acc_a = float(augmented.correct[sel].mean()) * 100
        p = mcnemar(baseline.preds[sel], augmented.preds[sel], baseline.labels[sel])
        rows.append(SubsetRow(label, len(sel), len(groups),
                              100.0 * len(sel) / total,
                              100.0 * len(groups) / all_groups,
                              acc_b, acc_a, p, p < 0.05))
    return SubsetReport(rows)


def pairs_by_tag(pairs) -> dict[str, list[int]]:
    """Index pairs by each of their subset tags."""
    out: dict[str, list[int]] = {}
    for i, pair in enumerate(pairs):
        for tag in pair.subset_tags:
            out.setdefault(tag, []).append(i)
    return out


def correlation_matrix(columns: dict[str, list[float]]) -> tuple[list[str], list[list[float | None]]]:
    """Square Pearson matrix over named feature columns."""
    names = list(columns)
    matrix = []
    for a in names:
        row = []
        for b in names:
            row.append(1.0 if a == b else pearson(columns[a], columns[b]))
        matrix.append(row)
    return names, matrix


def correlation_tsv(names: list[str], matrix: list[list[float | None]]) -> str:
    lines = ["\t" + "\t".join(names)]
    for name, row in zip(names, matrix):
        cells = [("%.6f" % v) if v is not None else "NA" for v in row]
        lines.append(name + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


__all__ = [
    "VerbClassMap", "classify_verb", "argument_frame", "is_conjunct_verb",
    "case_density", "pearson", "SubsetReport", "SubsetRow", "subset_report",
    "pairs_by_tag", "correlation_matrix", "correlation_tsv", "OTHERS",
    "mcnemar_counts",
]
