"""orderlab command line: pipeline stages, full runs, and the eval service."""

from __future__ import annotations

import argparse
import sys

from . import __version__


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config (INI)")
    parser.add_argument("--out", required=True, help="run output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orderlab")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=None,
                        help="override every stage seed")
    parser.add_argument("--log-base", type=float, default=None,
                        help="override the surprisal log base")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads for pure per-sentence stages")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("ingest", "train-lstm", "gen-variants",
                 "features", "analyze", "export-stimuli", "run"):
        p = sub.add_parser(name)
        _add_common(p)

    p = sub.add_parser("train-ngram")
    _add_common(p)
    p.add_argument("--input", default=None,
                   help="override the LM corpus (one tokenized sentence per line)")
    p.add_argument("--model", default=None,
                   help="also write the trained model to this path")
    p.add_argument("--min-count", type=int, default=None, dest="min_count")

    p = sub.add_parser("rank")
    _add_common(p)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--ablate", default=None,
                   help="feature column to ablate for the comparison table")

    p = sub.add_parser("score")
    _add_common(p)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--lr", type=float, default=None,
                   help="adaptation learning rate (with --adaptive)")
    p.add_argument("--sentences", required=True,
                   help="text file, one tokenized sentence per line")
    p.add_argument("--context", default=None,
                   help="optional single context sentence (tokenized)")

    p = sub.add_parser("serve-eval")
    p.add_argument("--pool", required=True, help="stimulus TSV file")
    p.add_argument("--log-path", required=True, help="judgment NDJSON log")
    p.add_argument("--seed", type=int, default=0, dest="svc_seed")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", default=None, help="static UI bundle directory")

    p = sub.add_parser("eval-results")
    p.add_argument("--pool", required=True)
    p.add_argument("--log-path", required=True)
    p.add_argument("--seed", type=int, default=0, dest="svc_seed")
    return parser


def _pipeline(args):
    from .pipeline import Pipeline, load_config

    cfg = load_config(args.config)
    if args.seed is not None:
        for sec in ("variants", "lstm", "rank", "stimuli"):
            cfg.set(sec, "seed", str(args.seed))
    if args.log_base is not None:
        cfg.set("ngram", "log_base", repr(args.log_base))
    if getattr(args, "folds", None) is not None:
        cfg.set("rank", "folds", str(args.folds))
    if getattr(args, "ablate", None) is not None:
        cfg.set("rank", "ablate", args.ablate)
    if getattr(args, "input", None) is not None:
        cfg.set("data", "lm_corpus", args.input)
    if getattr(args, "min_count", None) is not None:
        cfg.set("ngram", "min_count", str(args.min_count))
    return Pipeline(cfg, args.out, jobs=args.jobs)


def _print_outcome(outcome) -> None:
    print("[%s] %s (%.2fs)" % (outcome.status, outcome.name, outcome.seconds))


def cmd_stage(args) -> int:
    pipe = _pipeline(args)
    stage_fns = {
        "ingest": [pipe.stage_ingest],
        "train-ngram": [pipe.stage_ingest, pipe.stage_train_ngram],
        "train-lstm": [pipe.stage_ingest, pipe.stage_train_lstm],
        "gen-variants": [pipe.stage_ingest, pipe.stage_gen_variants],
        "features": [pipe.stage_ingest, pipe.stage_train_ngram,
                     pipe.stage_train_lstm, pipe.stage_gen_variants,
                     pipe.stage_features],
        "rank": [pipe.stage_ingest, pipe.stage_train_ngram, pipe.stage_train_lstm,
                 pipe.stage_gen_variants, pipe.stage_features, pipe.stage_rank],
        "analyze": [pipe.stage_ingest, pipe.stage_train_ngram, pipe.stage_train_lstm,
                    pipe.stage_gen_variants, pipe.stage_features, pipe.stage_rank,
                    pipe.stage_analyze],
        "export-stimuli": [pipe.stage_ingest, pipe.stage_train_ngram,
                           pipe.stage_train_lstm, pipe.stage_gen_variants,
                           pipe.stage_features, pipe.stage_rank,
                           pipe.stage_export_stimuli],
    }
    if args.command == "run":
        for outcome in pipe.run_all():
            _print_outcome(outcome)
        return 0
    for fn in stage_fns[args.command]:
        _print_outcome(fn())
    if getattr(args, "model", None):
        import shutil
        shutil.copyfile(pipe.path("ngram.model"), args.model)
        print("model copied to %s" % args.model)
    return 0


def cmd_score(args) -> int:
    from . import lstm as neural
    from . import ngram
    from .pipeline import Pipeline, load_config

    pipe = Pipeline(load_config(args.config), args.out, jobs=args.jobs)
    with open(args.sentences, encoding="utf-8") as fh:
        sentences = [line.split() for line in fh if line.strip()]
    tri = ngram.TrigramLm.load(pipe.path("ngram.model"))
    lm = neural.LstmLm.load(pipe.path("lstm.npz"))
    context = args.context.split() if args.context else []
    if args.adaptive:
        cfg = neural.AdaptationConfig()
        if args.lr is not None:
            cfg.learning_rate = args.lr
        lstm_scores = neural.adapt_and_score(lm, context, sentences, cfg)
    else:
        lstm_scores = [neural.lstm_sentence_surprisal(lm, s) for s in sentences]
    cache = ngram.CacheState()
    if context:
        cache = ngram.update_cache(cache, context, tri.vocab)
    print("trigram\tlex_rept\tlstm\tsentence")
    for sent, ls in zip(sentences, lstm_scores):
        tri_s = ngram.sentence_surprisal(tri, sent).total
        lex_s = ngram.cache_sentence_surprisal(tri, cache, sent).total
        print("%.4f\t%.4f\t%.4f\t%s" % (tri_s, lex_s, ls.total, " ".join(sent)))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .evalsvc import JudgmentStore, create_app, load_pool

    with open(args.pool, encoding="utf-8") as fh:
        pool = load_pool(fh)
    store = JudgmentStore(pool, args.log_path, seed=args.svc_seed)
    app = create_app(store, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_eval_results(args) -> int:
    import json

    from .evalsvc import load_pool, replay_log, summarize_choices

    with open(args.pool, encoding="utf-8") as fh:
        pool = load_pool(fh)
    choices = replay_log(pool, args.log_path)
    print(json.dumps(summarize_choices(pool, choices, args.svc_seed), indent=1))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve-eval":
        return cmd_serve(args)
    if args.command == "eval-results":
        return cmd_eval_results(args)
    if args.command == "score":
        return cmd_score(args)
    return cmd_stage(args)


if __name__ == "__main__":
    sys.exit(main())
