"""Six local post-hoc feature-attribution methods.

Every method maps (model, input, target class) to one real score per token.
Gradient-based methods use the model's exact embedding gradients; LIME and
KernelSHAP fit surrogate models on zero-masked embedding variants. All
methods also accept a raw embedding matrix in place of a token sequence so
that robustness search can re-explain perturbed inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import textmodel
from .errors import ConfigError

METHODS = ("GRAD", "GXI", "IG", "IGXI", "LIME", "SHAP")


@dataclass
class Attribution:
    method: str
    tokens: list
    scores: np.ndarray
    target_class: int

    def to_record(self, pair_id=None, subgroup=None):
        return {"pair_id": pair_id, "subgroup": subgroup,
                "method": self.method, "tokens": list(self.tokens),
                "scores": [float(s) for s in self.scores],
                "target_class": int(self.target_class)}


@dataclass
class AttributionConfig:
    ig_steps: int = 32
    lime_samples: int = 1000
    lime_kernel_width: float = 0.0  # 0 -> 0.75 * sqrt(n)
    shap_samples: int = 2048
    ridge: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.ig_steps < 1:
            raise ConfigError("ig_steps must be >= 1")
        if self.lime_samples < 1 or self.shap_samples < 1:
            raise ConfigError("sample counts must be >= 1")
        if self.lime_kernel_width < 0:
            raise ConfigError("kernel width must be positive")


def _resolve_input(model, seq):
    """Accept a TokenSeq or a raw (n, d) embedding matrix."""
    if isinstance(seq, textmodel.TokenSeq):
        return textmodel.embed(model, seq), list(seq.tokens)
    X = np.asarray(seq, dtype=float)
    return X, [f"tok{i}" for i in range(X.shape[0])]


def _masked_probs(model, X, masks, target):
    """Model probability of target for each binary token mask (rows)."""
    n = X.shape[0]
    pooled = (masks @ X) / n
    probs, _ = textmodel.forward_pooled(model, pooled)
    return probs[:, target]


def grad_saliency(model, seq, target):
    X, tokens = _resolve_input(model, seq)
    g = textmodel.grad_wrt_embeddings_matrix(model, X, target)
    return Attribution("GRAD", tokens, np.linalg.norm(g, axis=1), target)


def grad_x_input(model, seq, target):
    X, tokens = _resolve_input(model, seq)
    g = textmodel.grad_wrt_embeddings_matrix(model, X, target)
    return Attribution("GXI", tokens, (g * X).sum(axis=1), target)


def _ig_per_dim(model, X, target, steps):
    """Integrated-gradients attribution per embedding element (n, d).

    Zero baseline, right Riemann sum with ``steps`` points on the straight
    path from the baseline to X.
    """
    total = np.zeros_like(X)
    for k in range(1, steps + 1):
        total += textmodel.grad_wrt_embeddings_matrix(
            model, (k / steps) * X, target)
    return X * total / steps


def integrated_gradients(model, seq, target, cfg=None):
    cfg = cfg or AttributionConfig()
    X, tokens = _resolve_input(model, seq)
    per_dim = _ig_per_dim(model, X, target, cfg.ig_steps)
    return Attribution("IG", tokens, per_dim.sum(axis=1), target)


def ig_x_input(model, seq, target, cfg=None):
    cfg = cfg or AttributionConfig()
    X, tokens = _resolve_input(model, seq)
    per_dim = _ig_per_dim(model, X, target, cfg.ig_steps)
    return Attribution("IGXI", tokens, (per_dim * X).sum(axis=1), target)


def _weighted_ridge(Z, y, w, ridge):
    """Weighted ridge regression with unpenalized intercept.

    Returns the coefficient vector (without the intercept). Doubles the
    ridge strength until the normal equations are well conditioned.
    """
    n = Z.shape[1]
    A = np.column_stack([np.ones(len(Z)), Z])
    AtW = A.T * w
    gram = AtW @ A
    rhs = AtW @ y
    penalty = np.eye(n + 1)
    penalty[0, 0] = 0.0
    while True:
        try:
            coef = np.linalg.solve(gram + ridge * penalty, rhs)
            if np.all(np.isfinite(coef)):
                return coef[1:]
        except np.linalg.LinAlgError:
            pass
        ridge *= 2.0


def lime(model, seq, target, cfg=None):
    """LIME with Bernoulli(0.5) token masks and an exponential kernel.

    Mask distance is the Hamming distance to the all-ones mask; masked
    tokens have their embedding rows zeroed.
    """
    cfg = cfg or AttributionConfig()
    X, tokens = _resolve_input(model, seq)
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    Z = (rng.random((cfg.lime_samples, n)) < 0.5).astype(float)
    width = cfg.lime_kernel_width or 0.75 * math.sqrt(n)
    dist = n - Z.sum(axis=1)
    w = np.exp(-(dist**2) / width**2)
    y = _masked_probs(model, X, Z, target)
    coef = _weighted_ridge(Z, y, w, cfg.ridge)
    return Attribution("LIME", tokens, coef, target)


def _shap_kernel_weight(n, k):
    return (n - 1) / (math.comb(n, k) * k * (n - k))


def kernel_shap(model, seq, target, cfg=None):
    """KernelSHAP with the efficiency constraint enforced exactly.

    Proper coalitions are enumerated exhaustively when the sampling budget
    covers all 2^n - 2 of them (then the result equals exact Shapley
    values); otherwise coalition sizes are drawn from the Shapley kernel
    distribution. The constrained weighted least squares is solved via its
    KKT system so that sum(scores) = f(x) - f(empty) holds exactly.
    """
    cfg = cfg or AttributionConfig()
    X, tokens = _resolve_input(model, seq)
    n = X.shape[0]
    full = _masked_probs(model, X, np.ones((1, n)), target)[0]
    empty = _masked_probs(model, X, np.zeros((1, n)), target)[0]
    delta = full - empty
    if n == 1:
        return Attribution("SHAP", tokens, np.array([delta]), target)

    if 2**n - 2 <= cfg.shap_samples:
        Z = np.array([[1.0 if i in c else 0.0 for i in range(n)]
                      for k in range(1, n)
                      for c in combinations(range(n), k)])
        w = np.array([_shap_kernel_weight(n, int(z.sum())) for z in Z])
    else:
        rng = np.random.default_rng(cfg.seed)
        sizes = np.arange(1, n)
        size_p = np.array([_shap_kernel_weight(n, k) * math.comb(n, k)
                           for k in sizes])
        size_p /= size_p.sum()
        drawn = rng.choice(sizes, size=cfg.shap_samples, p=size_p)
        Z = np.zeros((cfg.shap_samples, n))
        for row, k in enumerate(drawn):
            Z[row, rng.choice(n, size=k, replace=False)] = 1.0
        w = np.ones(cfg.shap_samples)

    y = _masked_probs(model, X, Z, target) - empty
    ZtW = Z.T * w
    gram = ZtW @ Z + 1e-10 * np.eye(n)
    rhs = ZtW @ y
    # KKT system for: minimize weighted SSE subject to 1^T phi = delta
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = gram
    kkt[:n, n] = 0.5
    kkt[n, :n] = 1.0
    sol = np.linalg.solve(kkt, np.append(rhs, delta))
    return Attribution("SHAP", tokens, sol[:n], target)


def normalize_scores(attr):
    """Map scores to [0, 1] via |s_i| / max_j |s_j|; all-zero stays zero."""
    s = np.abs(np.asarray(attr.scores, dtype=float))
    m = s.max()
    return s / m if m > 0 else s


_EXPLAINERS = {
    "GRAD": lambda model, seq, target, cfg: grad_saliency(model, seq, target),
    "GXI": lambda model, seq, target, cfg: grad_x_input(model, seq, target),
    "IG": integrated_gradients,
    "IGXI": ig_x_input,
    "LIME": lime,
    "SHAP": kernel_shap,
}


def explain(method, model, seq, target, cfg=None):
    """Dispatch by method tag (GRAD | GXI | IG | IGXI | LIME | SHAP)."""
    try:
        fn = _EXPLAINERS[method.upper()]
    except KeyError:
        raise ConfigError(f"unknown attribution method: {method}") from None
    return fn(model, seq, target, cfg)


def write_jsonl(attributions, path):
    """One JSON object per (input, method): pair_id, subgroup, method,
    tokens, scores, target_class."""
    with open(path, "w", encoding="utf-8") as f:
        for pair_id, subgroup, attr in attributions:
            f.write(json.dumps(attr.to_record(pair_id, subgroup)) + "\n")


def read_jsonl(path):
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            out.append((rec["pair_id"], rec["subgroup"],
                        Attribution(rec["method"], rec["tokens"],
                                    np.array(rec["scores"]),
                                    rec["target_class"])))
    return out
