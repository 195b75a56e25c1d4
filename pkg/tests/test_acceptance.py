"""Acceptance suite: one test per contract criterion, at stated tolerances.

Each test prints a PASS line on success (run with -s or check the -v
listing); runtime-limited criteria assert their own wall-clock budget.
"""

import io
import json
import math
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from orderlab import lstm, ngram, ranker
from orderlab.evalsvc import (JudgmentStore, create_app, load_pool,
                              reference_is_a, replay_log, summarize_choices)
from orderlab.features import (FEATURE_COLUMNS, FeatureRow, FeatureVector,
                               IsConfig, dependency_length, is_score)
from orderlab.variantgen import PermissiveGrammar, generate_variants
from orderlab.ranker import PairInstance

from conftest import chain_tree, make_random_projective_tree, tok, tree


def ok(name):
    print("ACCEPTANCE PASS: %s" % name)


# -- shared toy material ------------------------------------------------------

@pytest.fixture(scope="module")
def toy_corpus():
    rng = np.random.default_rng(101)
    words = ["w%d" % i for i in range(12)]
    return [[words[rng.integers(0, 12)] for _ in range(rng.integers(3, 9))]
            for _ in range(40)]


@pytest.fixture(scope="module")
def toy_lstm(toy_corpus):
    cfg = lstm.LstmConfig(d_emb=8, d_hidden=8, n_layers=2, epochs=2,
                          base_lr=0.5, seed=17, log_base=2.0)
    return lstm.train_lstm(toy_corpus, cfg, min_count=1)


# -- criteria ------------------------------------------------------------------

def test_adaptive_identity(toy_lstm, toy_corpus):
    """lr 0 adaptation equals non-adaptive surprisal bit-for-bit; < 5 s."""
    start = time.monotonic()
    rng = np.random.default_rng(7)
    words = toy_lstm.vocab.id2word[3:]
    sentences = [[words[rng.integers(0, len(words))]
                  for _ in range(rng.integers(2, 9))] for _ in range(50)]
    cfg = lstm.AdaptationConfig(learning_rate=0.0)
    for sent in sentences:
        plain = lstm.lstm_sentence_surprisal(toy_lstm, sent)
        adapted = lstm.adapt_and_score(toy_lstm, toy_corpus[0], [sent], cfg)[0]
        assert plain.per_token == adapted.per_token
    assert time.monotonic() - start < 5.0
    ok("adaptive identity at learning rate 0")


def test_gradient_fidelity(toy_lstm, toy_corpus):
    """Finite differences vs backprop on a d=8 2-layer model; < 1e-4, < 30 s."""
    start = time.monotonic()
    assert toy_lstm.config.d_hidden == 8 and toy_lstm.config.n_layers == 2
    worst = max(lstm.gradient_check(toy_lstm, s, epsilon=1e-4)
                for s in toy_corpus[:10])
    assert worst < 1e-4
    assert time.monotonic() - start < 30.0
    ok("gradient fidelity (max rel err %.2e)" % worst)


def test_weight_restore_purity(toy_lstm, toy_corpus):
    """100 interleaved adaptation calls leave the base model bit-identical."""
    probe = toy_corpus[3]
    before = lstm.lstm_sentence_surprisal(toy_lstm, probe).per_token
    params_before = {k: v.copy() for k, v in toy_lstm.params.items()}
    cfg = lstm.AdaptationConfig(learning_rate=2.0)
    for i in range(100):
        ctx = toy_corpus[i % len(toy_corpus)]
        targets = [toy_corpus[(i + 1) % len(toy_corpus)]]
        lstm.adapt_and_score(toy_lstm, ctx, targets, cfg)
    after = lstm.lstm_sentence_surprisal(toy_lstm, probe).per_token
    assert before == after
    for k in params_before:
        assert np.array_equal(params_before[k], toy_lstm.params[k])
    ok("weight-restore purity over 100 interleaved adaptations")


CACHE_CORPUS = [
    "the cat sat on the mat".split(),
    "the dog sat on the log".split(),
    "a cat saw the dog".split(),
    "the dog saw a cat".split(),
    "a cat sat".split(),
]


def test_cache_oracle():
    """Cache-mixed probabilities match the interpolation identity to 1e-9."""
    lm = ngram.train_trigram(CACHE_CORPUS, min_count=1)
    context = CACHE_CORPUS[0]
    target = CACHE_CORPUS[1]
    mu = 0.05
    cache = ngram.update_cache(ngram.CacheState(mu=mu), context, lm.vocab)
    score = ngram.cache_sentence_surprisal(lm, cache, target)
    # independent mixture recomputation from raw context counts
    hist = [lm.vocab.map(w) for w in context]
    ids = lm.vocab.map_sentence(target)
    padded = [lm.vocab.bos, lm.vocab.bos] + ids + [lm.vocab.eos]
    for i in range(2, len(padded)):
        w = padded[i]
        p_tri = lm.cond_prob(w, (padded[i - 2], padded[i - 1]))
        expected = mu * hist.count(w) / len(hist) + (1 - mu) * p_tri
        got = 2.0 ** (-score.per_token[i - 2])
        assert abs(got - expected) < 1e-9
    # mu = 0 equals the plain trigram exactly
    zero = ngram.update_cache(ngram.CacheState(mu=0.0), context, lm.vocab)
    assert ngram.cache_sentence_surprisal(lm, zero, target).per_token == \
        ngram.sentence_surprisal(lm, target).per_token
    ok("cache mixture oracle (mu=0.05) and mu=0 identity")


def good_turing_corpus():
    """Word frequencies engineered so counts-of-counts 1..8 are all populated:
    N_r = 80, 30, 14, 8, 5, 3, 2, 1 gives strictly valid Katz discounts."""
    spec = [(1, 80), (2, 30), (3, 14), (4, 8), (5, 5), (6, 3), (7, 2), (8, 1)]
    stream = []
    wid = 0
    for count, n_types in spec:
        for _ in range(n_types):
            stream.extend(["t%03d" % wid] * count)
            wid += 1
    rng = np.random.default_rng(13)
    stream = [stream[i] for i in rng.permutation(len(stream))]
    k = 10
    return [stream[i:i + k] for i in range(0, len(stream), k)]


def test_good_turing_mass():
    """Unseen-unigram mass equals N1/N; all conditionals sum to 1 (1e-9)."""
    corpus = good_turing_corpus()
    lm = ngram.train_trigram(corpus, min_count=1)
    uni = lm.counts[0]
    n1 = sum(1 for c in uni.values() if c == 1)
    n_tokens = sum(uni.values())
    assert abs(lm.unigram_probs[lm.vocab.unk] - n1 / n_tokens) < 1e-9
    # every unigram discount actually discounts (no clamping on this corpus)
    assert all(0.0 < d < 1.0 for d in lm.discounts[0].values())
    events = lm.vocab.event_ids()
    ids = list(range(len(lm.vocab)))
    rng = np.random.default_rng(3)
    for _ in range(200):
        ctx = (int(rng.choice(ids)), int(rng.choice(ids)))
        total = sum(lm.cond_prob(w, ctx) for w in events)
        assert abs(total - 1.0) < 1e-9
    ok("Good-Turing unseen mass N1/N and 200-context normalization")


def test_variant_combinatorics():
    """100 random trees, n in 2..5: exactly n!-1 variants, multiset-safe."""
    rng = np.random.default_rng(55)
    grammar = PermissiveGrammar()
    for trial in range(100):
        n = int(rng.integers(2, 6))
        t = make_random_projective_tree(rng, n, sentence_id="s%d" % trial)
        vs = generate_variants(t, None, grammar, cap=1000, seed=trial)
        assert len(vs.orders) == math.factorial(n) - 1
        ref = sorted(t.forms())
        for j in range(len(vs.orders)):
            assert sorted(x.form for x in vs.variant_tokens(j)) == ref
            labels = [t.token_at(vs.constituents[i].head_token).deprel
                      for i in vs.orders[j]]
            assert grammar.allows(labels)
    ok("variant combinatorics on 100 random trees")


def test_pairing_algebra():
    """Label balance within one per set; orientation flip is exact negation."""
    rng = np.random.default_rng(23)
    sets = []
    for s in range(30):
        n_rows = int(rng.integers(2, 9))
        rows = [FeatureRow("d", "s%d" % s, i, FeatureVector(
            trigram_surp=float(rng.standard_normal()),
            dep_length=int(rng.integers(0, 20)),
            lstm_surp=float(rng.standard_normal())))
            for i in range(n_rows)]
        sets.append(rows)
    pairs = ranker.make_pairs(sets)
    start = 0
    for rows in sets:
        chunk = pairs[start:start + len(rows) - 1]
        start += len(rows) - 1
        ones = sum(p.label for p in chunk)
        assert abs(ones - (len(chunk) - ones)) <= 1
        ref = rows[0].vector.as_array()
        for j, pair in enumerate(chunk):
            var = rows[j + 1].vector.as_array()
            if pair.label == 1:
                assert np.array_equal(pair.delta, ref - var)
                assert np.array_equal(-pair.delta, var - ref)  # flipped orient.
            else:
                assert np.array_equal(pair.delta, var - ref)
    ok("pairing algebra: balance and exact orientation antisymmetry")


def test_regression_recovery():
    """beta=(1.0,-0.5,0.3), n=10000: recovered +-0.05, score<1e-6; < 10 s."""
    start = time.monotonic()
    rng = np.random.default_rng(77)
    true_beta = np.array([1.0, -0.5, 0.3])
    X = rng.standard_normal((10000, 3))
    y = (rng.random(10000) < 1 / (1 + np.exp(-(X @ true_beta)))).astype(int)
    pairs = []
    for i in range(10000):
        delta = np.zeros(len(FEATURE_COLUMNS))
        delta[:3] = X[i]
        pairs.append(PairInstance(delta=delta, label=int(y[i]), group_id="g%d" % i))
    report = ranker.fit_logistic(pairs, FEATURE_COLUMNS[:3])
    assert np.all(np.abs(report.beta[1:] - true_beta) < 0.05)
    Xd, yd = ranker.design_matrix(pairs, FEATURE_COLUMNS[:3])
    p = 1 / (1 + np.exp(-(Xd @ report.beta)))
    assert np.max(np.abs(Xd.T @ (yd - p))) < 1e-6
    finite = np.isfinite(report.se)
    assert np.allclose(report.t_values[finite],
                       report.beta[finite] / report.se[finite], atol=1e-9)
    assert time.monotonic() - start < 10.0
    ok("regression recovery of known coefficients")


def test_mcnemar_oracle():
    """Exact branch values and exact/chi-square agreement near the boundary."""
    gold = np.array([1] * 2 + [0] * 8)
    assert ranker.mcnemar(np.ones(10, int), np.zeros(10, int), gold) == 0.109375
    gold = np.array([1] * 4 + [0] * 4)
    a = np.array([1, 1, 0, 0, 1, 1, 0, 0])
    b = 1 - a
    assert ranker.mcnemar(a, b, gold) == 1.0
    rng = np.random.default_rng(9)
    for _ in range(1000):
        n = int(rng.integers(40, 61))
        b_cnt = int(rng.integers(0, n + 1))
        c_cnt = n - b_cnt
        m = min(b_cnt, c_cnt)
        exact = min(1.0, 2.0 * sum(math.comb(n, i) for i in range(m + 1)) / 2.0 ** n)
        stat = max(abs(b_cnt - c_cnt) - 1.0, 0.0) ** 2 / n
        chi2p = math.erfc(math.sqrt(stat / 2.0))
        assert abs(exact - chi2p) < 0.02
    ok("McNemar exact oracle and boundary agreement")


def test_is_scheme_fidelity(reference_tree, context_tree):
    """The worked Given/New examples score 0 (reference) and -1 (variant 2)."""
    from orderlab.variantgen import linearize, preverbal_constituents, reindex_tree
    cfg = IsConfig(subject_object_relations=frozenset({"k1", "k2", "k4", "k7t"}))
    assert is_score(reference_tree, context_tree, cfg) == 0
    cs = preverbal_constituents(reference_tree)
    by_head = {c.head_token: c for c in cs}
    order = [by_head[p] for p in (5, 4, 2, 7, 9)]  # sukravar yah ujala daak prapt
    variant2 = reindex_tree(reference_tree,
                            linearize(reference_tree, order), "variant2")
    assert variant2.forms()[:3] == ["sukravar", "ko", "yah"]
    assert is_score(variant2, context_tree, cfg) == -1
    ok("information-status fixtures: 0 (Given-Given) and -1 (New-Given)")


def test_dependency_length_brute_force():
    """1000 random trees recounted arc by arc; adjacent chains score 0."""
    rng = np.random.default_rng(31)
    for _ in range(1000):
        t = make_random_projective_tree(rng, int(rng.integers(1, 7)),
                                        n_postverbal=int(rng.integers(0, 3)))
        brute = sum(abs(x.head - x.index) - 1 for x in t.tokens if x.head != 0)
        assert dependency_length(t) == brute
    assert dependency_length(chain_tree(10)) == 0
    ok("dependency length against brute-force recount")


def test_end_to_end_synthetic_experiment():
    """Trigram-only CV accuracy >= 90% on a surprisal-minimizing corpus; an
    all-noise feature moves accuracy < 1% with McNemar p > 0.05; < 2 min."""
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    trees = [make_random_projective_tree(rng, int(rng.integers(2, 5)),
                                         sentence_id="s%03d" % i, doc_id="syn")
             for i in range(60)]
    lm = ngram.train_trigram([t.forms() for t in trees], min_count=1)
    grammar = PermissiveGrammar()

    feature_sets = []
    for t in trees:
        vs = generate_variants(t, None, grammar, cap=25, seed=5)
        if not vs.orders:
            continue
        # make the minimum-surprisal ordering the reference
        candidates = [t] + [vs.variant_tree(i) for i in range(len(vs.orders))]
        scored = [(ngram.sentence_surprisal(lm, c.forms()).total, i)
                  for i, c in enumerate(candidates)]
        best = min(scored)[1]
        reference = candidates[best]
        vs = generate_variants(reference, None, grammar, cap=25, seed=5)
        rows = [FeatureRow("syn", t.sentence_id, 0, FeatureVector(
            trigram_surp=ngram.sentence_surprisal(lm, reference.forms()).total,
            lstm_surp=float(rng.standard_normal())))]
        for i in range(len(vs.orders)):
            rows.append(FeatureRow("syn", t.sentence_id, i + 1, FeatureVector(
                trigram_surp=ngram.sentence_surprisal(
                    lm, [x.form for x in vs.variant_tokens(i)]).total,
                lstm_surp=float(rng.standard_normal()))))
        feature_sets.append(rows)

    pairs = ranker.make_pairs(feature_sets)
    assert len(pairs) > 200
    subsets = {"trigram": ("trigram_surp",),
               "trigram+noise": ("trigram_surp", "lstm_surp")}
    tables = ranker.cross_validate(pairs, k=10, feature_subsets=subsets, seed=4)
    acc_base = tables["trigram"].accuracy
    acc_noise = tables["trigram+noise"].accuracy
    assert acc_base >= 0.90
    assert abs(acc_base - acc_noise) < 0.01
    p = ranker.mcnemar(tables["trigram"].preds, tables["trigram+noise"].preds,
                       tables["trigram"].labels)
    assert p > 0.05
    assert time.monotonic() - start < 120.0
    ok("end-to-end synthetic experiment (acc %.3f, noise delta %.4f, p %.3f)"
       % (acc_base, abs(acc_base - acc_noise), p))


def test_human_label_rule_live_vs_offline(tmp_path):
    """7/12 -> 1, 6/12 -> 0; offline log recomputation equals the endpoint."""
    pool_text = "".join("it%02d\tctx %d\tref %d\tvar %d\treference\n"
                        % (i, i, i, i) for i in range(3))
    pool = load_pool(io.StringIO(pool_text))
    log_path = str(tmp_path / "acc.ndjson")
    store = JudgmentStore(pool, log_path, seed=5)
    client = TestClient(create_app(store))

    def vote(item_id, participant, want_reference):
        ref = "A" if reference_is_a(item_id, 5) else "B"
        choice = ref if want_reference else ("B" if ref == "A" else "A")
        assert client.post("/api/judgments", json={
            "participant": participant, "item_id": item_id,
            "choice": choice}).status_code == 200

    for p in range(7):
        vote("it00", "p%d" % p, True)
    for p in range(7, 12):
        vote("it00", "p%d" % p, False)
    for p in range(6):
        vote("it01", "p%d" % p, True)
    for p in range(6, 12):
        vote("it01", "p%d" % p, False)
    live = client.get("/api/results").json()
    by_id = {r["item_id"]: r for r in live["items"]}
    assert by_id["it00"]["human_label"] == 1   # 7 of 12
    assert by_id["it01"]["human_label"] == 0   # exactly 6 of 12
    assert by_id["it02"]["human_label"] is None
    offline = summarize_choices(pool, replay_log(pool, log_path), 5)
    assert json.loads(json.dumps(offline)) == live
    ok("human-label majority rule and offline/live agreement")
