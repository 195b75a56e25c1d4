"""Trigram LM with Good-Turing discounting, Katz backoff, and a unigram cache.

Discount ratios follow Katz (1987): counts r <= gt_max are discounted by

    d_r = (r*/r - mu) / (1 - mu),   r* = (r+1) N_{r+1} / N_r,
    mu  = (gt_max+1) N_{gt_max+1} / N_1

which reserves exactly N_1 / N probability mass for unseen events while
leaving counts above gt_max untouched.  Zeros in the counts-of-counts
table are bridged with the Simple Good-Turing log-linear regression
log N_r = a + b log r; any discount that comes out of (0, 1] is clamped
to 1 (no discount), which never breaks normalization because backoff
weights are computed from the mass each context actually reserves.

The lexical-repetition score mixes the trigram with a unigram cache over
the words of the single preceding sentence:

    P(w | h) = mu_cache * count_H(w) / |H| + (1 - mu_cache) * P_trigram(w | ctx)

where |H| is the true history length (capped at 100).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

# Backoff weight assigned when a context reserved no mass for unseen events
# (all its continuation counts were above gt_max).  Mirrors the -99 log10
# convention of ARPA files: unseen events become astronomically unlikely
# instead of impossible, keeping surprisal finite and sums within 1e-9.
ALPHA_FLOOR = 1e-99


class Vocab:
    """Word <-> id mapping with reserved BOS/EOS/UNK entries."""

    def __init__(self, words: list[str]):
        self.id2word = [BOS, EOS, UNK] + list(words)
        self.word2id = {w: i for i, w in enumerate(self.id2word)}
        if len(self.word2id) != len(self.id2word):
            raise ValueError("duplicate words in vocabulary")
        self.bos = self.word2id[BOS]
        self.eos = self.word2id[EOS]
        self.unk = self.word2id[UNK]

    def __len__(self) -> int:
        return len(self.id2word)

    def map(self, word: str) -> int:
        return self.word2id.get(word, self.unk)

    def map_sentence(self, sentence) -> list[int]:
        return [self.map(w) for w in sentence]

    def event_ids(self) -> list[int]:
        """Ids the model can be asked to predict (everything except BOS)."""
        return [i for i in range(len(self.id2word)) if i != self.bos]


@dataclass
class SurprisalScore:
    """Per-token surprisals (in the model's log base) and their sum."""

    per_token: list[float]
    total: float = field(init=False)

    def __post_init__(self):
        self.total = float(sum(self.per_token))


@dataclass
class CacheState:
    """Unigram history from the single preceding sentence, most recent last."""

    history: list[int] = field(default_factory=list)
    mu: float = 0.05
    h_max: int = 100

    def counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for wid in self.history:
            out[wid] = out.get(wid, 0) + 1
        return out


def _sgt_bridge(counts_of_counts: dict[int, int], r: int) -> float:
    """N_r, falling back to the log-linear regression when the raw value is 0."""
    raw = counts_of_counts.get(r, 0)
    if raw > 0:
        return float(raw)
    points = sorted((rr, n) for rr, n in counts_of_counts.items() if n > 0)
    if len(points) < 2:
        return 0.0
    xs = [math.log(rr) for rr, _ in points]
    ys = [math.log(n) for _, n in points]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    denom = sum((x - mx) ** 2 for x in xs)
    b = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / denom if denom else 0.0
    a = my - b * mx
    return math.exp(a + b * math.log(r))


def good_turing_discounts(counts_of_counts: dict[int, int], gt_max: int) -> dict[int, float]:
    """Katz-corrected Good-Turing discount ratio for each count 1..gt_max."""
    n1 = counts_of_counts.get(1, 0)
    discounts = {r: 1.0 for r in range(1, gt_max + 1)}
    if n1 <= 0:
        return discounts
    n_top = _sgt_bridge(counts_of_counts, gt_max + 1)
    mu = (gt_max + 1) * n_top / n1
    if mu >= 1.0:
        return discounts
    for r in range(1, gt_max + 1):
        nr = _sgt_bridge(counts_of_counts, r)
        nr1 = _sgt_bridge(counts_of_counts, r + 1)
        if nr <= 0 or nr1 <= 0:
            continue
        ratio = (r + 1) * nr1 / (r * nr)
        d = (ratio - mu) / (1.0 - mu)
        if 0.0 < d <= 1.0:
            discounts[r] = d
    return discounts


class TrigramLm:
    """Katz backoff trigram model; immutable once trained."""

    def __init__(self, vocab: Vocab, counts: list[dict], log_base: float = 2.0,
                 gt_max: int = 7, min_count: int = 2):
        self.vocab = vocab
        self.counts = counts  # [ {wid: c}, {(u,w): c}, {(u,v,w): c} ]
        self.log_base = log_base
        self.gt_max = gt_max
        self.min_count = min_count
        self._ln_base = math.log(log_base)
        self._build()

    # -- model construction -------------------------------------------------

    def _build(self) -> None:
        uni, bi, tri = self.counts
        self.discounts = []
        for table in self.counts:
            coc: dict[int, int] = {}
            for c in table.values():
                coc[c] = coc.get(c, 0) + 1
            self.discounts.append(good_turing_discounts(coc, self.gt_max))

        n_tokens = sum(uni.values())
        self.n_tokens = n_tokens
        d1 = self.discounts[0]
        probs: dict[int, float] = {}
        for wid, c in uni.items():
            probs[wid] = d1.get(c, 1.0) * c / n_tokens
        leftover = 1.0 - sum(probs.values())
        unseen = [wid for wid in self.vocab.event_ids() if wid not in probs]
        if unseen:
            share = max(leftover, ALPHA_FLOOR) / len(unseen)
            for wid in unseen:
                probs[wid] = share
        elif leftover > 0:
            total = sum(probs.values())
            probs = {wid: p / total for wid, p in probs.items()}
        self.unigram_probs = probs

        self.bi_prefix_totals: dict[int, int] = {}
        for (u, _), c in bi.items():
            self.bi_prefix_totals[u] = self.bi_prefix_totals.get(u, 0) + c
        self.tri_prefix_totals: dict[tuple[int, int], int] = {}
        for (u, v, _), c in tri.items():
            key = (u, v)
            self.tri_prefix_totals[key] = self.tri_prefix_totals.get(key, 0) + c

        self.bi_alpha = self._alphas(order=2)
        self.tri_alpha = self._alphas(order=3)

    def _seen_prob(self, order: int, ngram: tuple) -> float:
        """Discounted MLE of a seen n-gram of the given order (2 or 3)."""
        c = self.counts[order - 1][ngram]
        d = self.discounts[order - 1].get(c, 1.0)
        if order == 2:
            total = self.bi_prefix_totals[ngram[0]]
        else:
            total = self.tri_prefix_totals[ngram[:2]]
        return d * c / total

    def _alphas(self, order: int) -> dict:
        by_prefix: dict[tuple, list] = {}
        for ngram in self.counts[order - 1]:
            key = ngram[:-1] if order == 3 else (ngram[0],)
            by_prefix.setdefault(key, []).append(ngram)
        alphas = {}
        for prefix, ngrams in by_prefix.items():
            if order == 2:
                lower_prob = self.unigram_probs.__getitem__
            else:
                lower_prob = lambda w, v=prefix[1]: self._bigram_prob(v, w)  # noqa: E731
            seen_mass = sum(self._seen_prob(order, g) for g in ngrams)
            lower_seen = sum(lower_prob(g[-1]) for g in ngrams)
            num = 1.0 - seen_mass
            den = 1.0 - lower_seen
            if den < 1e-9:
                # 1 - lower_seen cancels catastrophically when the lower
                # distribution is concentrated on the seen continuations
                # (floored-backoff chains); sum the unseen side directly.
                seen_words = {g[-1] for g in ngrams}
                den = sum(lower_prob(w) for w in self.vocab.event_ids()
                          if w not in seen_words)
            key = prefix if order == 3 else prefix[0]
            if den == 0.0:
                alphas[key] = 0.0  # no unseen events: backoff unreachable
            elif num <= 0.0:
                alphas[key] = ALPHA_FLOOR
            else:
                alphas[key] = num / den
        return alphas

    # -- probabilities ------------------------------------------------------

    def _bigram_prob(self, u: int, w: int) -> float:
        if (u, w) in self.counts[1]:
            return self._seen_prob(2, (u, w))
        alpha = self.bi_alpha.get(u, 1.0)
        return alpha * self.unigram_probs[w]

    def cond_prob(self, w: int, context: tuple[int, int]) -> float:
        """P(w | context) under Katz backoff. ``context`` is (w_{k-2}, w_{k-1})."""
        u, v = context
        if (u, v, w) in self.counts[2]:
            return self._seen_prob(3, (u, v, w))
        alpha = self.tri_alpha.get((u, v), 1.0)
        return alpha * self._bigram_prob(v, w)

    def backoff_weight(self, context: tuple[int, int]) -> float:
        return self.tri_alpha.get(tuple(context), 1.0)

    def surprisal(self, p: float) -> float:
        return -math.log(p) / self._ln_base

    # -- serialization ------------------------------------------------------

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("orderlab-ngram 1\n")
            fh.write("order 3\n")
            fh.write("log_base %r\n" % self.log_base)
            fh.write("gt_max %d\n" % self.gt_max)
            fh.write("min_count %d\n" % self.min_count)
            fh.write("vocab %d\n" % len(self.vocab))
            for word in self.vocab.id2word:
                fh.write("%s\n" % word)
            for order, table in enumerate(self.counts, start=1):
                fh.write("ngrams %d %d\n" % (order, len(table)))
                for ngram, c in sorted(table.items(),
                                       key=lambda kv: (kv[0],) if order == 1 else kv[0]):
                    if order == 1:
                        fh.write("%d\t%d\n" % (ngram, c))
                    else:
                        fh.write("%s\t%d\n" % (" ".join(map(str, ngram)), c))

    @classmethod
    def load(cls, path: str) -> "TrigramLm":
        with open(path, encoding="utf-8") as fh:
            magic = fh.readline().split()
            if magic[:1] != ["orderlab-ngram"]:
                raise ValueError("not an orderlab ngram model: %s" % path)
            order = int(fh.readline().split()[1])
            if order != 3:
                raise ValueError("unsupported order %d" % order)
            log_base = float(fh.readline().split()[1])
            gt_max = int(fh.readline().split()[1])
            min_count = int(fh.readline().split()[1])
            vsize = int(fh.readline().split()[1])
            words = [fh.readline().rstrip("\n") for _ in range(vsize)]
            vocab = Vocab(words[3:])  # first three are the reserved symbols
            counts: list[dict] = []
            for expect_order in (1, 2, 3):
                head = fh.readline().split()
                assert head[0] == "ngrams" and int(head[1]) == expect_order
                n = int(head[2])
                table: dict = {}
                for _ in range(n):
                    key_s, c_s = fh.readline().rstrip("\n").split("\t")
                    if expect_order == 1:
                        table[int(key_s)] = int(c_s)
                    else:
                        table[tuple(int(x) for x in key_s.split())] = int(c_s)
                counts.append(table)
        return cls(vocab, counts, log_base=log_base, gt_max=gt_max, min_count=min_count)


def train_trigram(sentences, min_count: int = 2, log_base: float = 2.0,
                  gt_max: int = 7) -> TrigramLm:
    """Count, apply the UNK threshold, and build the backoff model."""
    sentences = [list(s) for s in sentences]
    if not sentences:
        raise ValueError("cannot train on an empty corpus")
    raw: dict[str, int] = {}
    for sent in sentences:
        for w in sent:
            raw[w] = raw.get(w, 0) + 1
    kept = sorted(w for w, c in raw.items() if c >= min_count)
    vocab = Vocab(kept)

    uni: dict[int, int] = {}
    bi: dict[tuple[int, int], int] = {}
    tri: dict[tuple[int, int, int], int] = {}
    for sent in sentences:
        ids = vocab.map_sentence(sent)
        events = ids + [vocab.eos]
        padded = [vocab.bos, vocab.bos] + ids + [vocab.eos]
        for wid in events:
            uni[wid] = uni.get(wid, 0) + 1
        for i in range(2, len(padded)):
            u, v, w = padded[i - 2], padded[i - 1], padded[i]
            bi[(v, w)] = bi.get((v, w), 0) + 1
            tri[(u, v, w)] = tri.get((u, v, w), 0) + 1
    return TrigramLm(vocab, [uni, bi, tri], log_base=log_base,
                     gt_max=gt_max, min_count=min_count)


def sentence_surprisal(lm, sentence) -> SurprisalScore:
    """Per-token -log P(w_k | w_{k-2}, w_{k-1}) with BOS padding and EOS scored."""
    ids = lm.vocab.map_sentence(sentence)
    padded = [lm.vocab.bos, lm.vocab.bos] + ids + [lm.vocab.eos]
    per_token = []
    for i in range(2, len(padded)):
        p = lm.cond_prob(padded[i], (padded[i - 2], padded[i - 1]))
        per_token.append(lm.surprisal(p))
    return SurprisalScore(per_token)


def update_cache(cache: CacheState, context, vocab: Vocab) -> CacheState:
    """New cache whose history is the last ``h_max`` words of ``context``."""
    ids = vocab.map_sentence(context)
    return CacheState(history=ids[-cache.h_max:], mu=cache.mu, h_max=cache.h_max)


def cache_mixed_prob(lm, cache: CacheState, w: int, context: tuple[int, int]) -> float:
    p_tri = lm.cond_prob(w, context)
    if not cache.history:
        return p_tri
    p_cache = cache.counts().get(w, 0) / len(cache.history)
    return cache.mu * p_cache + (1.0 - cache.mu) * p_tri


def cache_sentence_surprisal(lm, cache: CacheState, sentence) -> SurprisalScore:
    """Lexical-repetition surprisal: cache-mixed probabilities per token.

    With mu = 0 or an empty history this is bit-identical to the plain
    trigram surprisal.
    """
    if cache.mu == 0.0 or not cache.history:
        return sentence_surprisal(lm, sentence)
    ids = lm.vocab.map_sentence(sentence)
    padded = [lm.vocab.bos, lm.vocab.bos] + ids + [lm.vocab.eos]
    per_token = []
    for i in range(2, len(padded)):
        p = cache_mixed_prob(lm, cache, padded[i], (padded[i - 2], padded[i - 1]))
        per_token.append(lm.surprisal(p))
    return SurprisalScore(per_token)
