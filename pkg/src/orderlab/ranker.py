"""Pairwise ranking: pair transform, IRLS logistic regression, CV, McNemar.

References and variants are arranged into ordered pairs with alternating
orientation (first variant -> (reference, variant) labeled 1, second ->
(variant, reference) labeled 0, ...), and the classifier sees only the
difference of the two feature vectors, which both balances the classes
and centers length-correlated features.

The regression is plain maximum likelihood via iteratively reweighted
least squares; standard errors come from the inverse observed Fisher
information at the optimum.  Folds are assigned at the reference-sentence
level so a reference's pairs never straddle the train/test boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .features import FEATURE_COLUMNS, FeatureRow

MAX_ITER = 100
SCORE_TOL = 1e-8
# Separation signature: coefficients this large (in logit units per delta
# unit) or standard errors this inflated never arise from a well-posed fit
# on surprisal-scale features; saturated probabilities make IRLS "converge"
# at the float boundary instead of diverging outright.
SEPARATION_BETA = 15.0
SEPARATION_SE = 1e3


@dataclass
class PairInstance:
    delta: np.ndarray  # first minus second, in FEATURE_COLUMNS order
    label: int
    group_id: str
    subset_tags: frozenset = frozenset()


@dataclass
class RegressionReport:
    feature_names: list[str]  # without the intercept
    beta: np.ndarray          # intercept first
    se: np.ndarray
    n: int
    log_likelihood: float
    converged: bool
    separation: bool
    iterations: int

    @property
    def t_values(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.beta / self.se

    def coef(self, name: str) -> float:
        if name == "intercept":
            return float(self.beta[0])
        return float(self.beta[1 + self.feature_names.index(name)])


@dataclass
class PredictionTable:
    group_ids: list[str]
    folds: np.ndarray
    labels: np.ndarray
    probs: np.ndarray
    preds: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        # a fitted probability of exactly 0.5 never counts as correct
        return (self.preds == self.labels) & (self.probs != 0.5)

    @property
    def accuracy(self) -> float:
        return float(self.correct.mean()) if len(self.labels) else float("nan")


def make_pairs(feature_sets: list[list[FeatureRow]],
               tags: list[frozenset] | None = None) -> list[PairInstance]:
    """Ordered pairs with alternating orientation over each set's variants.

    ``feature_sets[i][0]`` must be the reference row of set i; orientation
    alternates by variant index so labels balance to within one pair per
    odd-sized set.
    """
    pairs = []
    for set_idx, rows in enumerate(feature_sets):
        if len(rows) < 2:
            continue
        ref = rows[0].vector.as_array()
        group = rows[0].sent_id
        tagset = tags[set_idx] if tags is not None else frozenset()
        for j, row in enumerate(rows[1:]):
            var = row.vector.as_array()
            if j % 2 == 0:
                pairs.append(PairInstance(ref - var, 1, group, tagset))
            else:
                pairs.append(PairInstance(var - ref, 0, group, tagset))
    return pairs


def design_matrix(pairs: list[PairInstance], feature_subset) -> tuple[np.ndarray, np.ndarray]:
    cols = [FEATURE_COLUMNS.index(name) for name in feature_subset]
    X = np.column_stack([np.ones(len(pairs))] +
                        [np.array([p.delta[c] for p in pairs]) for c in cols])
    y = np.array([p.label for p in pairs], dtype=float)
    return X, y


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(pairs: list[PairInstance], feature_subset=FEATURE_COLUMNS) -> RegressionReport:
    """Maximum-likelihood logistic regression on delta features + intercept.

    Raises on a rank-deficient design (naming the collinear columns);
    all-zero delta columns are benign and reported with a zero coefficient.
    Perfect separation is detected by a diverging coefficient norm and
    flagged on the report rather than raised.
    """
    if not pairs:
        raise ValueError("cannot fit on an empty pair set")
    feature_subset = list(feature_subset)
    X, y = design_matrix(pairs, feature_subset)
    n, n_cols = X.shape

    zero_cols = [j for j in range(1, n_cols) if not np.any(X[:, j])]
    active = [j for j in range(n_cols) if j not in zero_cols]
    Xa = X[:, active]

    rank = np.linalg.matrix_rank(Xa)
    if rank < Xa.shape[1]:
        _, _, vt = np.linalg.svd(Xa)
        null_vec = np.abs(vt[-1])
        involved = [(["intercept"] + feature_subset)[active[j]]
                    for j in range(len(active)) if null_vec[j] > 1e-8]
        raise ValueError("collinear design columns: %s" % ", ".join(involved))

    beta_a = np.zeros(Xa.shape[1])
    converged = False
    iterations = 0
    for it in range(1, MAX_ITER + 1):
        iterations = it
        eta = Xa @ beta_a
        p = 1.0 / (1.0 + np.exp(-eta))
        score = Xa.T @ (y - p)
        if np.max(np.abs(score)) < SCORE_TOL:
            converged = True
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        H = (Xa * w[:, None]).T @ Xa
        try:
            step = np.linalg.solve(H, score)
        except np.linalg.LinAlgError:
            break
        beta_a = beta_a + step
        if not np.all(np.isfinite(beta_a)):
            beta_a = beta_a - step
            break

    eta = Xa @ beta_a
    p = 1.0 / (1.0 + np.exp(-eta))
    w = np.clip(p * (1.0 - p), 1e-12, None)
    H = (Xa * w[:, None]).T @ Xa
    try:
        cov = np.linalg.inv(H)
        se_a = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se_a = np.full(Xa.shape[1], np.nan)

    beta = np.zeros(n_cols)
    se = np.full(n_cols, np.nan)
    for j_active, j in enumerate(active):
        beta[j] = beta_a[j_active]
        se[j] = se_a[j_active]

    separation = bool(np.max(np.abs(beta_a)) > SEPARATION_BETA
                      or (np.isfinite(se_a).all() and np.max(se_a) > SEPARATION_SE))
    return RegressionReport(
        feature_names=feature_subset,
        beta=beta,
        se=se,
        n=n,
        log_likelihood=_log_likelihood(X @ beta, y),
        converged=converged,
        separation=separation,
        iterations=iterations,
    )


def predict_probs(report: RegressionReport, pairs: list[PairInstance]) -> np.ndarray:
    X, _ = design_matrix(pairs, report.feature_names)
    return 1.0 / (1.0 + np.exp(-(X @ report.beta)))


def assign_folds(group_ids: list[str], k: int, seed: int) -> dict[str, int]:
    """Shuffled round-robin fold per group; every group's pairs share a fold."""
    unique: list[str] = []
    seen = set()
    for gid in group_ids:
        if gid not in seen:
            seen.add(gid)
            unique.append(gid)
    if len(unique) < k:
        raise ValueError("only %d groups for %d folds" % (len(unique), k))
    rng = np.random.default_rng(seed)
    order = [unique[i] for i in rng.permutation(len(unique))]
    return {gid: i % k for i, gid in enumerate(order)}


def cross_validate(pairs: list[PairInstance], k: int = 10,
                   feature_subsets: dict | None = None,
                   seed: int = 0) -> dict[str, PredictionTable]:
    """Grouped k-fold CV; one prediction table per feature subset."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if feature_subsets is None:
        feature_subsets = {"full": FEATURE_COLUMNS}
    fold_of = assign_folds([p.group_id for p in pairs], k, seed)
    folds = np.array([fold_of[p.group_id] for p in pairs])
    labels = np.array([p.label for p in pairs])
    tables = {}
    for name, subset in feature_subsets.items():
        probs = np.zeros(len(pairs))
        for fold in range(k):
            train = [p for p, f in zip(pairs, folds) if f != fold]
            test_idx = np.flatnonzero(folds == fold)
            if len(test_idx) == 0:
                continue
            report = fit_logistic(train, subset)
            held = [pairs[i] for i in test_idx]
            probs[test_idx] = predict_probs(report, held)
        preds = (probs > 0.5).astype(int)
        tables[name] = PredictionTable(
            group_ids=[p.group_id for p in pairs],
            folds=folds, labels=labels, probs=probs, preds=preds)
    return tables


def mcnemar(preds_a, preds_b, gold) -> float:
    """Two-tailed McNemar p-value on the discordant prediction pairs.

    Exact binomial below 50 discordant pairs, chi-square with continuity
    correction above.  The corrected statistic is floored at zero so the
    b = c case yields p = 1 on both branches.
    """
    preds_a = np.asarray(preds_a)
    preds_b = np.asarray(preds_b)
    gold = np.asarray(gold)
    if not (len(preds_a) == len(preds_b) == len(gold)):
        raise ValueError("prediction vectors must be aligned")
    a_right = preds_a == gold
    b_right = preds_b == gold
    b = int(np.sum(a_right & ~b_right))
    c = int(np.sum(~a_right & b_right))
    n = b + c
    if n == 0:
        return 1.0
    if n < 50:
        m = min(b, c)
        tail = sum(math.comb(n, i) for i in range(m + 1))
        return min(1.0, 2.0 * tail / 2.0 ** n)
    stat = max(abs(b - c) - 1.0, 0.0) ** 2 / n
    return math.erfc(math.sqrt(stat / 2.0))


def mcnemar_counts(preds_a, preds_b, gold) -> tuple[int, int]:
    preds_a, preds_b, gold = map(np.asarray, (preds_a, preds_b, gold))
    a_right = preds_a == gold
    b_right = preds_b == gold
    return int(np.sum(a_right & ~b_right)), int(np.sum(~a_right & b_right))


def likelihood_ratio_test(full: RegressionReport, reduced: RegressionReport) -> tuple[float, float]:
    """Nested-model chi-square test: 2 * (LL_full - LL_reduced)."""
    full_set = set(full.feature_names)
    reduced_set = set(reduced.feature_names)
    if not reduced_set <= full_set:
        raise ValueError("reduced feature set is not nested in the full set")
    if full.n != reduced.n:
        raise ValueError("reports were fitted on different pair counts")
    df = len(full_set) - len(reduced_set)
    stat = max(0.0, 2.0 * (full.log_likelihood - reduced.log_likelihood))
    if df == 0:
        return stat, 1.0
    return stat, float(chi2_dist.sf(stat, df))


def render_regression_report(report: RegressionReport) -> str:
    """Aligned (Predictor, beta, sigma, t) table; * marks |t| > 2."""
    names = ["intercept"] + [n.replace("_", " ") for n in report.feature_names]
    rows = []
    t = report.t_values
    for i, name in enumerate(names):
        mark = " *" if np.isfinite(t[i]) and abs(t[i]) > 2 else ""
        rows.append((name, "%.2f" % report.beta[i],
                     "%.3f" % report.se[i] if np.isfinite(report.se[i]) else "-",
                     ("%.2f" % t[i] if np.isfinite(t[i]) else "-") + mark))
    widths = [max(len(r[i]) for r in rows + [("Predictor", "beta", "sigma", "t")])
              for i in range(4)]
    out = ["%-*s  %*s  %*s  %*s" % (widths[0], "Predictor", widths[1], "beta",
                                    widths[2], "sigma", widths[3], "t")]
    for r in rows:
        out.append("%-*s  %*s  %*s  %*s" % (widths[0], r[0], widths[1], r[1],
                                            widths[2], r[2], widths[3], r[3]))
    out.append("n = %d, log-likelihood = %.2f%s" % (
        report.n, report.log_likelihood,
        ", PERFECT SEPARATION SUSPECTED" if report.separation else ""))
    return "\n".join(out) + "\n"
