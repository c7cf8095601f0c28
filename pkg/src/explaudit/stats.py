"""Disparity quantification and model bias analysis.

Mann-Whitney U (exact for small tie-free samples, normal approximation
with tie and continuity corrections otherwise), Cohen's d with the
root-mean pooled standard deviation, the significance / considerable-effect
classification, and the TPR / TNR / APD bias report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DataError

EXACT_LIMIT = 12  # max n_a + n_b for exact U-test enumeration


@dataclass
class SubgroupScores:
    metric: str
    method: str
    scores_a: list
    scores_b: list
    label_a: str = "A"
    label_b: str = "B"


@dataclass
class DisparityResult:
    u_statistic: float
    p_value: float
    cohens_d: float | None
    significant: bool
    considerable: bool
    direction: str  # label of the subgroup with the larger mean
    n_a: int
    n_b: int
    mode: str  # "exact" or "asymptotic"
    metric: str = ""
    method: str = ""

    def to_dict(self):
        return {"metric": self.metric, "method": self.method,
                "U": self.u_statistic, "p": self.p_value,
                "d": self.cohens_d, "significant": self.significant,
                "considerable": self.considerable,
                "direction": self.direction,
                "n_A": self.n_a, "n_B": self.n_b, "mode": self.mode}


@dataclass
class BiasReport:
    tpr: float
    tnr: float
    apd: float | None

    def to_dict(self):
        return {"TPR": self.tpr, "TNR": self.tnr, "APD": self.apd}


def _rank_with_midranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_two_sided_p(a, b, u_min):
    """Exact p by enumerating all rank assignments (tie-free samples)."""
    n_a, n_b = len(a), len(b)
    count = 0
    n_assignments = 0
    for picked in combinations(range(1, n_a + n_b + 1), n_a):
        u_a = sum(picked) - n_a * (n_a + 1) / 2
        u_b = n_a * n_b - u_a
        if min(u_a, u_b) <= u_min:
            count += 1
        n_assignments += 1
    # min(U_a, U_b) <= u_min already captures both tails of the symmetric
    # null distribution, so no doubling is needed.
    return min(1.0, count / n_assignments)


def mann_whitney_u(a, b):
    """Two-sided Mann-Whitney U test. Returns (U_a, p).

    Exact enumeration when the pooled sample is small and tie-free,
    otherwise normal approximation with tie and continuity corrections.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise DataError("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    pooled = np.array(a + b)
    ranks = _rank_with_midranks(pooled)
    r_a = ranks[:n_a].sum()
    u_a = r_a - n_a * (n_a + 1) / 2
    u_b = n_a * n_b - u_a

    has_ties = len(np.unique(pooled)) < len(pooled)
    if n_a + n_b <= EXACT_LIMIT and not has_ties:
        return u_a, _exact_two_sided_p(a, b, min(u_a, u_b))

    # Normal approximation with tie correction
    n = n_a + n_b
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = (tie_counts**3 - tie_counts).sum()
    sigma_sq = n_a * n_b / 12 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0:
        return u_a, 1.0
    mu = n_a * n_b / 2
    z = (abs(u_a - mu) - 0.5) / math.sqrt(sigma_sq)  # continuity correction
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2))
    return u_a, min(1.0, p)


def mann_whitney_mode(n_a, n_b, has_ties):
    return "exact" if n_a + n_b <= EXACT_LIMIT and not has_ties \
        else "asymptotic"


def cohens_d(a, b):
    """Effect size (mean(a) - mean(b)) / sqrt((var_a + var_b) / 2).

    Sample (n-1) variances. If both variances are zero: 0 for equal means,
    signed infinity otherwise (degenerate case).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DataError("cohens_d needs at least 2 values per group")
    diff = a.mean() - b.mean()
    s = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2)
    if s == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return float(diff / s)


def disparity_test(scores, alpha=0.05, d_threshold=0.2,
                   always_effect_size=False):
    """Run the U test on a SubgroupScores; effect size is computed only for
    significant results unless ``always_effect_size`` is set."""
    a, b = scores.scores_a, scores.scores_b
    u, p = mann_whitney_u(a, b)
    significant = p <= alpha
    d = None
    if (significant or always_effect_size) and len(a) >= 2 and len(b) >= 2:
        d = cohens_d(a, b)
    considerable = bool(significant and d is not None
                        and math.isfinite(d) and abs(d) >= d_threshold)
    direction = scores.label_a if np.mean(a) >= np.mean(b) else scores.label_b
    has_ties = len(set(a) | set(b)) < len(a) + len(b)
    return DisparityResult(
        u_statistic=float(u), p_value=float(p), cohens_d=d,
        significant=bool(significant), considerable=considerable,
        direction=direction, n_a=len(a), n_b=len(b),
        mode=mann_whitney_mode(len(a), len(b), has_ties),
        metric=scores.metric, method=scores.method)


@dataclass
class LabeledPrediction:
    """One test-set prediction with its subgroup and optional pair identity."""
    subgroup: str
    true_label: int
    predicted_label: int
    probs: np.ndarray
    pair_id: str | None = None


def bias_analysis(predictions, positive_subgroup, negative_subgroup,
                  positive_class, negative_class):
    """TPR / TNR / APD over a paired test set.

    TPR is the accuracy on the positive subgroup's records, TNR on the
    negative subgroup's. APD is the mean absolute difference between the
    positive-class probability on the positive variant and the
    negative-class probability on the negative variant of each pair;
    omitted (None, with a warning) when no pairs exist.
    """
    pos = [p for p in predictions if p.subgroup == positive_subgroup]
    neg = [p for p in predictions if p.subgroup == negative_subgroup]
    if not pos or not neg:
        raise DataError("test set must contain both subgroups")
    tpr = sum(p.predicted_label == p.true_label for p in pos) / len(pos)
    tnr = sum(p.predicted_label == p.true_label for p in neg) / len(neg)

    by_pair = {}
    for p in predictions:
        if p.pair_id is not None:
            by_pair.setdefault(p.pair_id, {})[p.subgroup] = p
    diffs = []
    for variants in by_pair.values():
        if positive_subgroup in variants and negative_subgroup in variants:
            p_pos = variants[positive_subgroup].probs[positive_class]
            p_neg = variants[negative_subgroup].probs[negative_class]
            diffs.append(abs(float(p_pos) - float(p_neg)))
    if not diffs:
        import warnings
        warnings.warn("no subgroup pairs in test set: APD omitted")
        return BiasReport(tpr=tpr, tnr=tnr, apd=None)
    return BiasReport(tpr=tpr, tnr=tnr, apd=float(np.mean(diffs)))
