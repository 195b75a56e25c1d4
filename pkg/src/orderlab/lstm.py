"""From-scratch LSTM language model, double precision, exact backprop.

The model conditions each prediction on the full within-sentence prefix:
hidden and cell states are zeroed at sentence start and the input sequence
is BOS + words, with words + EOS as targets.  Loss is mean cross-entropy
per target so the effective adaptation step size does not depend on
sentence length.

Adaptation ("discourse-enhanced" scoring) performs exactly one clipped SGD
step on the context sentence and scores every candidate continuation under
the adapted weights, then discards them: updates are functional (new
arrays), so the base model is bit-for-bit unchanged no matter how many
adaptation calls interleave.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ngram import SurprisalScore, Vocab


@dataclass
class LstmConfig:
    d_emb: int = 200
    d_hidden: int = 200
    n_layers: int = 2
    epochs: int = 10
    base_lr: float = 1.0
    grad_clip_norm: float = 0.25
    lr_decay: float = 4.0
    val_fraction: float = 0.0
    seed: int = 0
    log_base: float = 2.0
    init_scale: float = 0.1


@dataclass
class AdaptationConfig:
    """One gradient step on the preceding sentence before scoring.

    loss_reduction picks how the context cross-entropy is pooled: "mean"
    (default, step size independent of context length) or "sum".
    """

    learning_rate: float = 2.0
    grad_clip_norm: float = 0.25
    loss_reduction: str = "mean"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.loss_reduction not in ("mean", "sum"):
            raise ValueError("loss_reduction must be 'mean' or 'sum'")


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_softmax(logits):
    m = logits.max()
    z = logits - m
    return z - math.log(np.exp(z).sum())


class LstmLm:
    """Stacked LSTM with tied vocabulary conventions (BOS/EOS/UNK ids)."""

    def __init__(self, vocab: Vocab, config: LstmConfig):
        self.vocab = vocab
        self.config = config
        self._ln_base = math.log(config.log_base)
        self.adaptation_steps = 0
        self.train_losses: list[float] = []
        rng = np.random.default_rng(config.seed)
        s = config.init_scale
        V, E, H = len(vocab), config.d_emb, config.d_hidden
        self.params: dict[str, np.ndarray] = {
            "emb": rng.uniform(-s, s, (V, E)),
            "wy": rng.uniform(-s, s, (V, H)),
            "by": np.zeros(V),
        }
        for layer in range(config.n_layers):
            d_in = E if layer == 0 else H
            self.params["wx%d" % layer] = rng.uniform(-s, s, (4 * H, d_in))
            self.params["wh%d" % layer] = rng.uniform(-s, s, (4 * H, H))
            self.params["b%d" % layer] = np.zeros(4 * H)

    # -- forward / backward --------------------------------------------------

    def _forward(self, ids: list[int], params: dict | None = None, want_cache: bool = False):
        """Mean cross-entropy (nats) over targets; optionally keep caches."""
        p = params if params is not None else self.params
        H, L = self.config.d_hidden, self.config.n_layers
        inputs = [self.vocab.bos] + ids
        targets = ids + [self.vocab.eos]
        T = len(targets)
        h = [np.zeros(H) for _ in range(L)]
        c = [np.zeros(H) for _ in range(L)]
        cache = {"steps": [], "logps": [], "inputs": inputs, "targets": targets}
        nll = 0.0
        for t in range(T):
            x = p["emb"][inputs[t]]
            step = []
            for layer in range(L):
                z = p["wx%d" % layer] @ x + p["wh%d" % layer] @ h[layer] + p["b%d" % layer]
                i = _sigmoid(z[:H])
                f = _sigmoid(z[H:2 * H])
                g = np.tanh(z[2 * H:3 * H])
                o = _sigmoid(z[3 * H:])
                c_new = f * c[layer] + i * g
                tanh_c = np.tanh(c_new)
                h_new = o * tanh_c
                if want_cache:
                    step.append((x, h[layer], c[layer], i, f, g, o, c_new, tanh_c))
                h[layer], c[layer] = h_new, c_new
                x = h_new
            logp = _log_softmax(p["wy"] @ x + p["by"])
            nll -= logp[targets[t]]
            if want_cache:
                cache["steps"].append((step, x))
                cache["logps"].append(logp)
        loss = nll / T
        return (loss, cache) if want_cache else loss

    def _backward(self, ids: list[int], params: dict | None = None):
        """Gradients of the mean cross-entropy w.r.t. every parameter block."""
        p = params if params is not None else self.params
        loss, cache = self._forward(ids, params=p, want_cache=True)
        H, L = self.config.d_hidden, self.config.n_layers
        T = len(cache["targets"])
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        dh_next = [np.zeros(H) for _ in range(L)]
        dc_next = [np.zeros(H) for _ in range(L)]
        for t in reversed(range(T)):
            step, top_h = cache["steps"][t]
            dlogits = np.exp(cache["logps"][t])
            dlogits[cache["targets"][t]] -= 1.0
            dlogits /= T
            grads["wy"] += np.outer(dlogits, top_h)
            grads["by"] += dlogits
            dx_above = p["wy"].T @ dlogits
            for layer in reversed(range(L)):
                x_in, h_prev, c_prev, i, f, g, o, c_new, tanh_c = step[layer]
                dh = dx_above + dh_next[layer]
                dc = dc_next[layer] + dh * o * (1.0 - tanh_c ** 2)
                do = dh * tanh_c
                di = dc * g
                df = dc * c_prev
                dg = dc * i
                dz = np.concatenate([
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g ** 2),
                    do * o * (1.0 - o),
                ])
                grads["wx%d" % layer] += np.outer(dz, x_in)
                grads["wh%d" % layer] += np.outer(dz, h_prev)
                grads["b%d" % layer] += dz
                dh_next[layer] = p["wh%d" % layer].T @ dz
                dc_next[layer] = dc * f
                dx_above = p["wx%d" % layer].T @ dz
            grads["emb"][cache["inputs"][t]] += dx_above
        return loss, grads

    # -- public operations ----------------------------------------------------

    def sentence_logps(self, sentence, params: dict | None = None) -> np.ndarray:
        """Per-target natural log probabilities (words then EOS)."""
        ids = self.vocab.map_sentence(sentence)
        _, cache = self._forward(ids, params=params, want_cache=True)
        return np.array([cache["logps"][t][cache["targets"][t]]
                         for t in range(len(cache["targets"]))])

    def step_distributions(self, sentence) -> np.ndarray:
        """Full softmax row per step, for normalization checks."""
        ids = self.vocab.map_sentence(sentence)
        _, cache = self._forward(ids, want_cache=True)
        return np.exp(np.stack(cache["logps"]))

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def save(self, path: str, corpus_hash: str = "") -> None:
        np.savez(path, **self.params)
        meta = {
            "format": "orderlab-lstm",
            "version": 1,
            "d_emb": self.config.d_emb,
            "d_hidden": self.config.d_hidden,
            "n_layers": self.config.n_layers,
            "log_base": self.config.log_base,
            "seed": self.config.seed,
            "corpus_hash": corpus_hash,
            "words": self.vocab.id2word[3:],
        }
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "LstmLm":
        with open(str(path) + ".json", encoding="utf-8") as fh:
            meta = json.load(fh)
        if meta.get("format") != "orderlab-lstm":
            raise ValueError("not an orderlab lstm model: %s" % path)
        config = LstmConfig(d_emb=meta["d_emb"], d_hidden=meta["d_hidden"],
                            n_layers=meta["n_layers"], log_base=meta["log_base"],
                            seed=meta["seed"])
        lm = cls(Vocab(meta["words"]), config)
        loaded = np.load(path if str(path).endswith(".npz") else str(path) + ".npz")
        for k in lm.params:
            lm.params[k] = loaded[k]
        return lm


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = math.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def corpus_sha256(sentences) -> str:
    h = hashlib.sha256()
    for sent in sentences:
        h.update((" ".join(sent)).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def train_lstm(sentences, config: LstmConfig, min_count: int = 2) -> LstmLm:
    """SGD training with per-sentence updates and lr decay on stalled validation.

    Deterministic for a fixed config seed: initialization, the per-epoch
    shuffle, and the train/validation split all come from one generator.
    """
    sentences = [list(s) for s in sentences]
    if not sentences:
        raise ValueError("cannot train on an empty corpus")
    raw: dict[str, int] = {}
    for sent in sentences:
        for w in sent:
            raw[w] = raw.get(w, 0) + 1
    vocab = Vocab(sorted(w for w, c in raw.items() if c >= min_count))
    lm = LstmLm(vocab, config)
    rng = np.random.default_rng(config.seed + 1)

    n_val = int(len(sentences) * config.val_fraction)
    order = rng.permutation(len(sentences))
    val = [sentences[i] for i in order[:n_val]]
    train = [sentences[i] for i in order[n_val:]]
    if not train:
        train, val = sentences, []

    lr = config.base_lr
    best_val = math.inf
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        for idx in rng.permutation(len(train)):
            ids = vocab.map_sentence(train[idx])
            loss, grads = lm._backward(ids)
            if not math.isfinite(loss):
                raise RuntimeError(
                    "non-finite training loss at epoch %d (lr=%g too high?)"
                    % (epoch, lr))
            clip_gradients(grads, config.grad_clip_norm)
            for k, g in grads.items():
                lm.params[k] -= lr * g
            epoch_loss += loss
        lm.train_losses.append(epoch_loss / max(len(train), 1))
        if val:
            val_loss = sum(lm._forward(vocab.map_sentence(s)) for s in val) / len(val)
            if val_loss >= best_val and config.lr_decay > 1:
                lr /= config.lr_decay
            best_val = min(best_val, val_loss)
    return lm


def lstm_sentence_surprisal(lm: LstmLm, sentence) -> SurprisalScore:
    """Per-token surprisal over the full within-sentence prefix (EOS included)."""
    logps = lm.sentence_logps(sentence)
    return SurprisalScore(list(-logps / lm._ln_base))


def adapt_and_score(lm: LstmLm, context, targets, cfg: AdaptationConfig) -> list[SurprisalScore]:
    """Score all targets under weights taken one gradient step toward ``context``.

    All targets of one call share a single adapted parameter set, so the
    reference and its variants are compared fairly.  With an empty context
    or learning rate 0, the result is identical to non-adaptive scoring.
    """
    context = list(context)
    if not context or cfg.learning_rate == 0.0:
        return [lstm_sentence_surprisal(lm, t) for t in targets]
    ids = lm.vocab.map_sentence(context)
    _, grads = lm._backward(ids)
    if cfg.loss_reduction == "sum":
        n_targets = len(ids) + 1  # EOS is a scored position
        for g in grads.values():
            g *= n_targets
    clip_gradients(grads, cfg.grad_clip_norm)
    adapted = {k: lm.params[k] - cfg.learning_rate * grads[k] for k in lm.params}
    lm.adaptation_steps += 1
    scores = []
    for target in targets:
        logps = lm.sentence_logps(target, params=adapted)
        scores.append(SurprisalScore(list(-logps / lm._ln_base)))
    return scores


def adapted_context_loss(lm: LstmLm, context, cfg: AdaptationConfig) -> tuple[float, float]:
    """Mean context cross-entropy (nats) before and after one adaptation step."""
    ids = lm.vocab.map_sentence(list(context))
    before, grads = lm._backward(ids)
    clip_gradients(grads, cfg.grad_clip_norm)
    adapted = {k: lm.params[k] - cfg.learning_rate * grads[k] for k in lm.params}
    after = lm._forward(ids, params=adapted)
    return before, after


def perplexity(lm: LstmLm, sentences, params: dict | None = None) -> float:
    """exp of mean per-token cross-entropy over ``sentences``."""
    total, n = 0.0, 0
    for sent in sentences:
        ids = lm.vocab.map_sentence(list(sent))
        total += lm._forward(ids, params=params) * (len(ids) + 1)
        n += len(ids) + 1
    return math.exp(total / n)


GRAD_CHECK_FLOOR = 1e-4


def gradient_check(lm: LstmLm, sentence, epsilon: float = 1e-4,
                   max_entries_per_block: int = 64) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every parameter block is probed at a deterministic stride of entries
    (all entries for small blocks).  The error denominator is floored at
    GRAD_CHECK_FLOOR: below that gradient magnitude the comparison is
    effectively absolute, since central differences carry O(eps^2)
    truncation noise that would swamp a ratio of vanishing gradients.
    Intended for small models; the cost is two forward passes per probed
    entry.
    """
    ids = lm.vocab.map_sentence(list(sentence))
    _, grads = lm._backward(ids)
    worst = 0.0
    for name, param in lm.params.items():
        flat = param.reshape(-1)
        n = flat.shape[0]
        k = min(n, max_entries_per_block)
        probe = np.unique(np.linspace(0, n - 1, k).astype(int))
        for j in probe:
            orig = flat[j]
            flat[j] = orig + epsilon
            up = lm._forward(ids)
            flat[j] = orig - epsilon
            down = lm._forward(ids)
            flat[j] = orig
            numeric = (up - down) / (2.0 * epsilon)
            analytic = grads[name].reshape(-1)[j]
            denom = max(abs(analytic) + abs(numeric), GRAD_CHECK_FLOOR)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
