import math

import numpy as np
import pytest

from orderlab.lstm import (AdaptationConfig, LstmConfig, LstmLm, adapt_and_score,
                           adapted_context_loss, gradient_check,
                           lstm_sentence_surprisal, perplexity, train_lstm)


@pytest.fixture(scope="module")
def toy_sentences():
    rng = np.random.default_rng(3)
    words = ["w%d" % i for i in range(9)]
    return [[words[rng.integers(0, 9)] for _ in range(rng.integers(3, 8))]
            for _ in range(30)]


@pytest.fixture(scope="module")
def toy_lm(toy_sentences):
    cfg = LstmConfig(d_emb=8, d_hidden=8, n_layers=2, epochs=3, base_lr=0.5,
                     seed=11, log_base=2.0)
    return train_lstm(toy_sentences, cfg, min_count=1)


def test_alternating_pattern_learned():
    # a deterministic alternation is predictable with ~0 surprisal once learned
    corpus = [["a", "b"] * 4 for _ in range(40)]
    cfg = LstmConfig(d_emb=6, d_hidden=12, n_layers=1, epochs=15, base_lr=1.0,
                     seed=5, log_base=2.0)
    lm = train_lstm(corpus, cfg, min_count=1)
    score = lstm_sentence_surprisal(lm, ["a", "b"] * 4)
    non_initial = score.per_token[1:-1]
    assert sum(non_initial) / len(non_initial) < 0.3
    assert max(non_initial) < 1.0


def test_training_loss_non_increasing_small_lr(toy_sentences):
    cfg = LstmConfig(d_emb=8, d_hidden=8, n_layers=1, epochs=5, base_lr=0.05,
                     seed=2, log_base=2.0)
    lm = train_lstm(toy_sentences, cfg, min_count=1)
    for a, b in zip(lm.train_losses, lm.train_losses[1:]):
        assert b <= a + 1e-9


def test_fixed_seed_bit_identical(toy_sentences):
    cfg = LstmConfig(d_emb=8, d_hidden=8, n_layers=2, epochs=2, base_lr=0.5, seed=11)
    a = train_lstm(toy_sentences, cfg, min_count=1)
    b = train_lstm(toy_sentences, cfg, min_count=1)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_nonfinite_loss_aborts(toy_sentences):
    # an init scale past float range overflows the logits into nan territory
    cfg = LstmConfig(d_emb=8, d_hidden=8, n_layers=1, epochs=1, base_lr=1.0,
                     seed=2, init_scale=1e307)
    with pytest.raises(RuntimeError, match="lr"):
        with np.errstate(all="ignore"):
            train_lstm(toy_sentences, cfg, min_count=1)


def test_zeroed_output_layer_uniform(toy_lm, toy_sentences):
    lm = toy_lm
    saved = lm.clone_params()
    lm.params["wy"] = np.zeros_like(lm.params["wy"])
    lm.params["by"] = np.zeros_like(lm.params["by"])
    try:
        score = lstm_sentence_surprisal(lm, toy_sentences[0])
        expected = math.log2(len(lm.vocab))
        assert score.per_token == pytest.approx([expected] * len(score.per_token),
                                                abs=1e-9)
    finally:
        lm.params = saved


def test_permuted_sentence_scores_differently(toy_lm):
    sent = ["w1", "w2", "w3", "w4"]
    a = lstm_sentence_surprisal(toy_lm, sent).total
    b = lstm_sentence_surprisal(toy_lm, list(reversed(sent))).total
    assert a != b


def test_total_equals_cross_entropy_times_tokens(toy_lm):
    sent = ["w1", "w2", "w3"]
    ids = toy_lm.vocab.map_sentence(sent)
    mean_nats = toy_lm._forward(ids)
    total_bits = lstm_sentence_surprisal(toy_lm, sent).total
    n = len(sent) + 1  # EOS scored
    assert total_bits == pytest.approx(mean_nats * n / math.log(2), abs=1e-9)


def test_softmax_rows_normalized(toy_lm, toy_sentences):
    for sent in toy_sentences[:5]:
        dists = toy_lm.step_distributions(sent)
        assert np.allclose(dists.sum(axis=1), 1.0, atol=1e-6)


def test_adapt_lr0_identity(toy_lm, toy_sentences):
    ctx = toy_sentences[0]
    targets = toy_sentences[1:6]
    plain = [lstm_sentence_surprisal(toy_lm, t) for t in targets]
    adapted = adapt_and_score(toy_lm, ctx, targets, AdaptationConfig(learning_rate=0.0))
    for a, b in zip(plain, adapted):
        assert a.per_token == b.per_token


def test_adapt_empty_context_identity(toy_lm, toy_sentences):
    targets = toy_sentences[:3]
    plain = [lstm_sentence_surprisal(toy_lm, t) for t in targets]
    adapted = adapt_and_score(toy_lm, [], targets, AdaptationConfig(learning_rate=2.0))
    for a, b in zip(plain, adapted):
        assert a.per_token == b.per_token


def test_adapt_context_loss_decreases(toy_lm, toy_sentences):
    before, after = adapted_context_loss(toy_lm, toy_sentences[0],
                                         AdaptationConfig(learning_rate=0.1))
    assert after < before


def test_adapt_deterministic_and_restores(toy_lm, toy_sentences):
    ctx, targets = toy_sentences[0], toy_sentences[1:4]
    probe = toy_sentences[5]
    before = lstm_sentence_surprisal(toy_lm, probe).per_token
    r1 = adapt_and_score(toy_lm, ctx, targets, AdaptationConfig(learning_rate=2.0))
    lstm_sentence_surprisal(toy_lm, toy_sentences[6])  # unrelated interleaved call
    r2 = adapt_and_score(toy_lm, ctx, targets, AdaptationConfig(learning_rate=2.0))
    after = lstm_sentence_surprisal(toy_lm, probe).per_token
    assert before == after
    for a, b in zip(r1, r2):
        assert a.per_token == b.per_token


def test_adaptation_counter_single_step_per_set(toy_lm, toy_sentences):
    start = toy_lm.adaptation_steps
    adapt_and_score(toy_lm, toy_sentences[0], toy_sentences[1:10],
                    AdaptationConfig(learning_rate=1.0))
    assert toy_lm.adaptation_steps == start + 1


def test_adapt_negative_lr_rejected():
    with pytest.raises(ValueError):
        AdaptationConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        AdaptationConfig(loss_reduction="max")


def test_adapt_defaults():
    cfg = AdaptationConfig()
    assert cfg.learning_rate == 2.0
    assert cfg.grad_clip_norm == 0.25
    assert cfg.loss_reduction == "mean"


def test_sum_reduction_scales_step(toy_lm, toy_sentences):
    ctx = toy_sentences[0]
    target = toy_sentences[1]
    # tiny lr so clipping does not engage and the scaling is visible
    mean_cfg = AdaptationConfig(learning_rate=0.01, grad_clip_norm=0.0)
    sum_cfg = AdaptationConfig(learning_rate=0.01, grad_clip_norm=0.0,
                               loss_reduction="sum")
    plain = lstm_sentence_surprisal(toy_lm, target).total
    mean_total = adapt_and_score(toy_lm, ctx, [target], mean_cfg)[0].total
    sum_total = adapt_and_score(toy_lm, ctx, [target], sum_cfg)[0].total
    assert mean_total != plain
    assert sum_total != mean_total
    # the sum step equals a mean step with lr scaled by the context length
    scaled = AdaptationConfig(learning_rate=0.01 * (len(ctx) + 1),
                              grad_clip_norm=0.0)
    scaled_total = adapt_and_score(toy_lm, ctx, [target], scaled)[0].total
    assert sum_total == pytest.approx(scaled_total, abs=1e-12)


def test_learning_rate_u_shape(toy_lm, toy_sentences):
    """Moderate adaptation helps or barely hurts; huge rates blow perplexity up."""
    ctx = toy_sentences[0]
    val = toy_sentences[10:20]
    ppl = {}
    for lr in (2.0, 20.0, 200.0):
        ids = toy_lm.vocab.map_sentence(ctx)
        _, grads = toy_lm._backward(ids)
        from orderlab.lstm import clip_gradients
        clip_gradients(grads, 0.25)
        adapted = {k: toy_lm.params[k] - lr * grads[k] for k in toy_lm.params}
        ppl[lr] = perplexity(toy_lm, val, params=adapted)
    assert ppl[20.0] > ppl[2.0]
    assert ppl[200.0] > ppl[2.0]


def test_gradient_check_small_model(toy_lm, toy_sentences):
    errs = [gradient_check(toy_lm, s, epsilon=1e-4) for s in toy_sentences[:10]]
    assert max(errs) < 1e-4


def test_gradient_zero_for_absent_embedding_row(toy_lm):
    sent = ["w1", "w2"]
    ids = toy_lm.vocab.map_sentence(sent)
    _, grads = toy_lm._backward(ids)
    absent = toy_lm.vocab.map("w8")
    assert absent not in ids
    assert np.all(grads["emb"][absent] == 0.0)


def test_gradient_check_degrades_at_tiny_epsilon(toy_lm, toy_sentences):
    good = gradient_check(toy_lm, toy_sentences[0], epsilon=1e-4)
    bad = gradient_check(toy_lm, toy_sentences[0], epsilon=1e-12)
    assert bad > good


def test_save_load_round_trip(toy_lm, toy_sentences, tmp_path):
    path = str(tmp_path / "model.npz")
    toy_lm.save(path, corpus_hash="abc123")
    again = LstmLm.load(path)
    assert again.vocab.id2word == toy_lm.vocab.id2word
    probe = toy_sentences[0]
    assert lstm_sentence_surprisal(again, probe).per_token == \
        lstm_sentence_surprisal(toy_lm, probe).per_token


def test_oov_scored_as_unk(toy_lm):
    a = lstm_sentence_surprisal(toy_lm, ["zzz", "w1"])
    b = lstm_sentence_surprisal(toy_lm, ["<unk>", "w1"])
    assert a.per_token == b.per_token
