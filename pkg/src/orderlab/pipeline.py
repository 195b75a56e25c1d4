"""End-to-end experiment pipeline with content-hash stage memoization.

Stages communicate through files in the run directory, so each stage can
be skipped when the digest of its inputs and configuration is unchanged;
a rerun over an unchanged workspace reports every stage as "cached" and
leaves byte-identical outputs.  The run manifest records seeds, config and
input digests, and per-stage timings.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analysis, features, lstm, ngram, ranker, variantgen
from .corpus import Document, IngestReport, parse_treebank, to_conll
from .rng import SplitMix64

STAGES = ("ingest", "train-ngram", "train-lstm", "gen-variants",
          "features", "rank", "analyze", "export-stimuli")

DEFAULTS = {
    "data": {"lm_corpus": "", "external_pcfg": ""},
    "variants": {"seed": "13", "cap": "100", "max_constituents": "10"},
    "ngram": {"min_count": "2", "log_base": "2", "gt_max": "7"},
    "lstm": {"d_emb": "32", "d_hidden": "32", "n_layers": "2", "epochs": "5",
             "base_lr": "1.0", "seed": "7", "min_count": "2", "val_fraction": "0.0"},
    "adapt": {"learning_rate": "2", "grad_clip_norm": "0.25"},
    "features": {"cache_mu": "0.05"},
    "rank": {"folds": "10", "seed": "13", "ablate": "adaptive_lstm_surp"},
    "stimuli": {"count": "20", "seed": "99"},
}


def load_config(path: str) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.read_dict(DEFAULTS)
    with open(path, encoding="utf-8") as fh:
        cfg.read_file(fh)
    return cfg


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StageOutcome:
    name: str
    status: str  # "ran" or "cached"
    seconds: float
    outputs: list[str]


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__("stage %r failed: %s" % (stage, cause))
        self.stage = stage
        self.cause = cause


class Pipeline:
    def __init__(self, cfg: configparser.ConfigParser, out_dir: str, jobs: int = 1):
        self.cfg = cfg
        self.out = out_dir
        self.jobs = max(1, jobs)
        os.makedirs(out_dir, exist_ok=True)
        self.state_path = os.path.join(out_dir, "manifest.json")
        self.state = {"stages": {}}
        if os.path.exists(self.state_path):
            with open(self.state_path, encoding="utf-8") as fh:
                self.state = json.load(fh)

    # -- infrastructure ------------------------------------------------------

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def _section_items(self, sections) -> list:
        out = []
        for sec in sections:
            if self.cfg.has_section(sec):
                out.append((sec, sorted(self.cfg.items(sec))))
        return out

    def _stage_hash(self, sections, input_files) -> str:
        payload = {
            "config": self._section_items(sections),
            "inputs": {f: file_digest(f) for f in input_files if f and os.path.exists(f)},
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def _run_stage(self, name, sections, input_files, outputs, fn) -> StageOutcome:
        digest = self._stage_hash(sections, input_files)
        record = self.state["stages"].get(name)
        out_paths = [self.path(o) for o in outputs]
        if record and record["hash"] == digest and all(os.path.exists(p) for p in out_paths):
            return StageOutcome(name, "cached", 0.0, out_paths)
        start = time.time()
        try:
            fn()
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        seconds = time.time() - start
        self.state["stages"][name] = {"hash": digest, "outputs": outputs,
                                      "seconds": seconds}
        self._save_state()
        return StageOutcome(name, "ran", seconds, out_paths)

    def _save_state(self) -> None:
        with open(self.state_path, "w", encoding="utf-8") as fh:
            json.dump(self.state, fh, indent=1, sort_keys=True)

    # -- shared loaders --------------------------------------------------------

    def load_documents(self) -> list[Document]:
        with open(self.path("corpus.conll"), encoding="utf-8") as fh:
            return parse_treebank(fh)

    def lm_sentences(self) -> list[list[str]]:
        lm_path = self.cfg.get("data", "lm_corpus")
        if lm_path:
            with open(lm_path, encoding="utf-8") as fh:
                return [line.split() for line in fh if line.strip()]
        return [tree.forms() for doc in self.load_documents() for tree in doc.sentences]

    def load_variant_sets(self) -> list[variantgen.VariantSet]:
        docs = self.load_documents()
        trees = {}
        contexts = {}
        for doc in docs:
            for k, tree in enumerate(doc.sentences):
                trees[(doc.doc_id, tree.sentence_id)] = tree
                contexts[(doc.doc_id, tree.sentence_id)] = doc.context_of(k)
        by_sentence: dict[tuple, list[tuple[int, str]]] = {}
        with open(self.path("variants.tsv"), encoding="utf-8") as fh:
            next(fh)  # header
            for line in fh:
                doc_id, sent_id, variant_id, _forms, signature = line.rstrip("\n").split("\t")
                by_sentence.setdefault((doc_id, sent_id), []).append(
                    (int(variant_id), signature))
        seed = self.cfg.getint("variants", "seed")
        sets = []
        for key, rows in by_sentence.items():
            tree = trees[key]
            constituents = variantgen.preverbal_constituents(tree)
            index_of = {c.head_token: i for i, c in enumerate(constituents)}
            orders = []
            for variant_id, signature in sorted(rows):
                if variant_id == 0:
                    continue
                orders.append(tuple(index_of[int(h)] for h in signature.split(",")))
            sets.append(variantgen.VariantSet(
                reference=tree, context=contexts[key], constituents=constituents,
                orders=orders, seed=seed))
        sets.sort(key=lambda s: (s.reference.doc_id, s.reference.sentence_id))
        return sets

    # -- stages ----------------------------------------------------------------

    def stage_ingest(self) -> StageOutcome:
        treebank = self.cfg.get("data", "treebank")

        def run():
            report = IngestReport()
            with open(treebank, encoding="utf-8") as fh:
                docs = parse_treebank(fh, report=report)
            with open(self.path("corpus.conll"), "w", encoding="utf-8") as fh:
                for doc in docs:
                    fh.write(to_conll(doc))
            with open(self.path("ingest_report.tsv"), "w", encoding="utf-8") as fh:
                fh.write(report.to_tsv())

        return self._run_stage("ingest", ["data"], [treebank],
                               ["corpus.conll", "ingest_report.tsv"], run)

    def stage_train_ngram(self) -> StageOutcome:
        def run():
            lm = ngram.train_trigram(
                self.lm_sentences(),
                min_count=self.cfg.getint("ngram", "min_count"),
                log_base=self.cfg.getfloat("ngram", "log_base"),
                gt_max=self.cfg.getint("ngram", "gt_max"))
            lm.save(self.path("ngram.model"))

        return self._run_stage(
            "train-ngram", ["ngram", "data"],
            [self.cfg.get("data", "lm_corpus"), self.path("corpus.conll")],
            ["ngram.model"], run)

    def stage_train_lstm(self) -> StageOutcome:
        def run():
            sentences = self.lm_sentences()
            cfg = lstm.LstmConfig(
                d_emb=self.cfg.getint("lstm", "d_emb"),
                d_hidden=self.cfg.getint("lstm", "d_hidden"),
                n_layers=self.cfg.getint("lstm", "n_layers"),
                epochs=self.cfg.getint("lstm", "epochs"),
                base_lr=self.cfg.getfloat("lstm", "base_lr"),
                seed=self.cfg.getint("lstm", "seed"),
                val_fraction=self.cfg.getfloat("lstm", "val_fraction"),
                log_base=self.cfg.getfloat("ngram", "log_base"))
            lm = lstm.train_lstm(sentences, cfg,
                                 min_count=self.cfg.getint("lstm", "min_count"))
            lm.save(self.path("lstm.npz"), corpus_hash=lstm.corpus_sha256(sentences))

        return self._run_stage(
            "train-lstm", ["lstm", "ngram", "data"],
            [self.cfg.get("data", "lm_corpus"), self.path("corpus.conll")],
            ["lstm.npz", "lstm.npz.json"], run)

    def stage_gen_variants(self) -> StageOutcome:
        def run():
            docs = self.load_documents()
            grammar = variantgen.build_attested_grammar(docs)
            seed = self.cfg.getint("variants", "seed")
            cap = self.cfg.getint("variants", "cap")
            max_c = self.cfg.getint("variants", "max_constituents")
            jobs = []
            for doc in docs:
                for k, tree in enumerate(doc.sentences):
                    jobs.append((tree, doc.context_of(k)))

            def gen(job):
                tree, context = job
                return variantgen.generate_variants(
                    tree, context, grammar, cap=cap, seed=seed,
                    max_constituents=max_c)

            if self.jobs > 1:
                with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                    sets = list(pool.map(gen, jobs))
            else:
                sets = [gen(j) for j in jobs]
            with open(self.path("variants.tsv"), "w", encoding="utf-8") as fh:
                fh.write("doc_id\tsent_id\tvariant_id\ttokens\tsignature\n")
                for vset in sets:
                    if vset.orders:
                        fh.write("\n".join(variantgen.variants_tsv_rows(vset)) + "\n")

        return self._run_stage("gen-variants", ["variants"],
                               [self.path("corpus.conll")], ["variants.tsv"], run)

    def stage_features(self) -> StageOutcome:
        def run():
            sets = self.load_variant_sets()
            bundle = features.ScorerBundle(
                trigram=ngram.TrigramLm.load(self.path("ngram.model")),
                lstm=lstm.LstmLm.load(self.path("lstm.npz")),
                cache_mu=self.cfg.getfloat("features", "cache_mu"),
                adapt=lstm.AdaptationConfig(
                    learning_rate=self.cfg.getfloat("adapt", "learning_rate"),
                    grad_clip_norm=self.cfg.getfloat("adapt", "grad_clip_norm")))
            external = None
            pcfg_path = self.cfg.get("data", "external_pcfg")
            if pcfg_path:
                with open(pcfg_path, encoding="utf-8") as fh:
                    external = features.ingest_external_features(fh)
                needed = sum(1 + len(s.orders) for s in sets)
                print("external pcfg column: %d ids for %d rows" % (len(external), needed))
            else:
                print("WARNING: no external pcfg column configured; "
                      "pcfg_surp is an all-zero column")
            rows = []
            for vset in sets:
                rows.extend(features.assemble_features(vset, bundle, external))
            with open(self.path("features.tsv"), "w", encoding="utf-8") as fh:
                fh.write(features.feature_table_tsv(rows))

        return self._run_stage(
            "features", ["features", "adapt", "data"],
            [self.path("variants.tsv"), self.path("ngram.model"),
             self.path("lstm.npz"), self.cfg.get("data", "external_pcfg")],
            ["features.tsv"], run)

    # feature table -> grouped FeatureRow lists, in file order
    def load_feature_sets(self) -> list[list[features.FeatureRow]]:
        groups: dict[tuple, list[features.FeatureRow]] = {}
        with open(self.path("features.tsv"), encoding="utf-8") as fh:
            header = next(fh).rstrip("\n").split("\t")
            assert header[3:] == list(features.FEATURE_COLUMNS)
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                doc_id, sent_id, variant_id = parts[0], parts[1], int(parts[2])
                values = [float(v) for v in parts[3:]]
                vec = features.FeatureVector(
                    trigram_surp=values[0], dep_length=int(values[1]),
                    pcfg_surp=values[2], is_score=int(values[3]),
                    lstm_surp=values[4], adaptive_lstm_surp=values[5],
                    lex_rept_surp=values[6])
                groups.setdefault((doc_id, sent_id), []).append(
                    features.FeatureRow(doc_id, sent_id, variant_id, vec))
        out = []
        for key in sorted(groups):
            rows = sorted(groups[key], key=lambda r: r.variant_id)
            out.append(rows)
        return out

    def sentence_tags(self) -> dict[str, frozenset]:
        """Analysis tags (verb class, frame, conjunct) per reference sentence."""
        vmap = analysis.VerbClassMap.bundled()
        tags = {}
        for doc in self.load_documents():
            for tree in doc.sentences:
                t = {"class:" + analysis.classify_verb(tree, vmap),
                     "frame:" + analysis.argument_frame(tree)}
                if analysis.is_conjunct_verb(tree):
                    t.add("conjunct")
                tags[tree.sentence_id] = frozenset(t)
        return tags

    def build_pairs(self):
        sets = self.load_feature_sets()
        tags = self.sentence_tags()
        tag_list = [tags.get(rows[0].sent_id, frozenset()) for rows in sets]
        pairs = ranker.make_pairs(sets, tags=tag_list)
        meta = []  # (sent_id, variant_id, ref_first) aligned with pairs
        for rows in sets:
            if len(rows) < 2:
                continue
            for j, row in enumerate(rows[1:]):
                meta.append((row.sent_id, row.variant_id, j % 2 == 0))
        return pairs, meta

    def stage_rank(self) -> StageOutcome:
        def run():
            pairs, meta = self.build_pairs()
            folds = self.cfg.getint("rank", "folds")
            seed = self.cfg.getint("rank", "seed")
            ablate = self.cfg.get("rank", "ablate").strip()
            full = list(features.FEATURE_COLUMNS)
            subsets = {"full": full}
            if ablate:
                if ablate not in full:
                    raise ValueError("unknown ablation column %r" % ablate)
                subsets["without_" + ablate] = [c for c in full if c != ablate]
            report = ranker.fit_logistic(pairs, full)
            with open(self.path("regression_full.txt"), "w", encoding="utf-8") as fh:
                fh.write(ranker.render_regression_report(report))
            tables = ranker.cross_validate(pairs, k=folds,
                                           feature_subsets=subsets, seed=seed)
            for name, table in tables.items():
                with open(self.path("predictions_%s.tsv" % name), "w",
                          encoding="utf-8") as fh:
                    fh.write("sent_id\tvariant_id\tref_first\tfold\tlabel\tprob\tpred\n")
                    for i in range(len(pairs)):
                        sid, vid, ref_first = meta[i]
                        fh.write("%s\t%d\t%d\t%d\t%d\t%r\t%d\n" % (
                            sid, vid, int(ref_first), table.folds[i],
                            table.labels[i], float(table.probs[i]), table.preds[i]))
            lines = ["subset\taccuracy_pct"]
            for name, table in tables.items():
                lines.append("%s\t%.4f" % (name, table.accuracy * 100))
            if len(tables) == 2:
                a, b = (tables[k] for k in subsets)
                p = ranker.mcnemar(a.preds, b.preds, a.labels)
                lines.append("mcnemar_p\t%.6f" % p)
            with open(self.path("cv_accuracy.tsv"), "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")

        return self._run_stage("rank", ["rank"], [self.path("features.tsv")],
                               ["regression_full.txt", "cv_accuracy.tsv",
                                "predictions_full.tsv"], run)

    def stage_analyze(self) -> StageOutcome:
        def run():
            pairs, _ = self.build_pairs()
            ablate = self.cfg.get("rank", "ablate").strip()
            base_name = "without_" + ablate if ablate else "full"
            base_path = self.path("predictions_%s.tsv" % base_name)
            aug_path = self.path("predictions_full.tsv")
            baseline = _load_predictions(base_path if os.path.exists(base_path) else aug_path)
            augmented = _load_predictions(aug_path)
            subsets = analysis.pairs_by_tag(pairs)
            report = analysis.subset_report(baseline, augmented, subsets)
            with open(self.path("subset_report.tsv"), "w", encoding="utf-8") as fh:
                fh.write(report.to_tsv())
            with open(self.path("subset_report.txt"), "w", encoding="utf-8") as fh:
                fh.write(report.render())
            columns = {name: [float(p.delta[i]) for p in pairs]
                       for i, name in enumerate(features.FEATURE_COLUMNS)}
            names, matrix = analysis.correlation_matrix(columns)
            with open(self.path("correlations.tsv"), "w", encoding="utf-8") as fh:
                fh.write(analysis.correlation_tsv(names, matrix))

        return self._run_stage(
            "analyze", ["rank"],
            [self.path("features.tsv"), self.path("predictions_full.tsv")],
            ["subset_report.tsv", "subset_report.txt", "correlations.tsv"], run)

    def stage_export_stimuli(self) -> StageOutcome:
        def run():
            count = self.cfg.getint("stimuli", "count")
            seed = self.cfg.getint("stimuli", "seed")
            sets = {(s.reference.doc_id, s.reference.sentence_id): s
                    for s in self.load_variant_sets()}
            preds = {}
            with open(self.path("predictions_full.tsv"), encoding="utf-8") as fh:
                next(fh)
                for line in fh:
                    sid, vid, ref_first, _fold, _label, _prob, pred = line.rstrip("\n").split("\t")
                    chose_first = pred == "1"
                    chose_ref = chose_first == (ref_first == "1")
                    preds[(sid, int(vid))] = "reference" if chose_ref else "variant"
            candidates = sorted(preds)
            rng = SplitMix64(seed, "stimuli")
            chosen = [candidates[i] for i in rng.choice_indices(
                len(candidates), min(count, len(candidates)))]
            by_sent = {key[1]: key for key in sets}
            with open(self.path("stimuli.tsv"), "w", encoding="utf-8") as fh:
                for sid, vid in chosen:
                    vset = sets[by_sent[sid]]
                    context = " ".join(vset.context.forms()) if vset.context else ""
                    reference = " ".join(vset.reference.forms())
                    variant = " ".join(t.form for t in vset.variant_tokens(vid - 1))
                    fh.write("%s\t%s\t%s\t%s\t%s\n" % (
                        features.row_key(sid, vid), context, reference,
                        variant, preds[(sid, vid)]))

        return self._run_stage(
            "export-stimuli", ["stimuli"],
            [self.path("predictions_full.tsv"), self.path("variants.tsv")],
            ["stimuli.tsv"], run)

    def run_all(self) -> list[StageOutcome]:
        outcomes = [
            self.stage_ingest(),
            self.stage_train_ngram(),
            self.stage_train_lstm(),
            self.stage_gen_variants(),
            self.stage_features(),
            self.stage_rank(),
            self.stage_analyze(),
            self.stage_export_stimuli(),
        ]
        manifest = {
            "seeds": {sec: dict(self.cfg.items(sec)).get("seed")
                      for sec in ("variants", "lstm", "rank", "stimuli")},
            "config": {sec: dict(self.cfg.items(sec)) for sec in self.cfg.sections()},
            "stages": [{"name": o.name, "status": o.status,
                        "seconds": round(o.seconds, 3)} for o in outcomes],
        }
        with open(self.path("run_manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
        return outcomes


def _load_predictions(path: str) -> ranker.PredictionTable:
    group_ids, folds, labels, probs, preds = [], [], [], [], []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            sid, _vid, _rf, fold, label, prob, pred = line.rstrip("\n").split("\t")
            group_ids.append(sid)
            folds.append(int(fold))
            labels.append(int(label))
            probs.append(float(prob))
            preds.append(int(pred))
    return ranker.PredictionTable(group_ids=group_ids, folds=np.array(folds),
                                  labels=np.array(labels), probs=np.array(probs),
                                  preds=np.array(preds))
