"""Desk-scale differentiable binary text classifier.

Embedding -> mean pool -> tanh hidden layer -> 2-way softmax, trained with
AdamW and a linear warmup/decay schedule. Forward and backward passes are
written out by hand in numpy so that gradients with respect to the input
embeddings are exact, which the attribution methods rely on.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def split_text(text):
    """Lowercase and split on whitespace/punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    token_to_id: dict
    id_to_token: list
    aliases: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.id_to_token)

    def lookup(self, token):
        token = self.aliases.get(token, token)
        return self.token_to_id.get(token, UNK_ID)

    def to_dict(self):
        return {"tokens": self.id_to_token[2:], "aliases": dict(self.aliases)}

    @classmethod
    def from_dict(cls, d):
        v = build_vocab_from_tokens(d["tokens"])
        v.aliases = dict(d.get("aliases", {}))
        return v


@dataclass
class TokenSeq:
    ids: np.ndarray
    tokens: list

    @property
    def n(self):
        return len(self.tokens)


@dataclass
class ModelConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    n_classes: int = 2


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    warmup_steps: int = 500
    batch_size: int = 32
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.01
    eps: float = 1e-8


@dataclass
class Prediction:
    probs: np.ndarray
    predicted_class: int
    logits: np.ndarray


@dataclass
class ClassifierModel:
    emb: np.ndarray  # (vocab, d)
    w1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h, 2)
    b2: np.ndarray  # (2,)
    config: ModelConfig

    def params(self):
        return {"emb": self.emb, "w1": self.w1, "b1": self.b1,
                "w2": self.w2, "b2": self.b2}


def build_vocab_from_tokens(tokens):
    id_to_token = [PAD_TOKEN, UNK_TOKEN]
    token_to_id = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for t in tokens:
        if t not in token_to_id:
            token_to_id[t] = len(id_to_token)
            id_to_token.append(t)
    return Vocabulary(token_to_id, id_to_token)


def build_vocab(corpus, min_count=1, aliases=None):
    """Build a vocabulary from an iterable of texts.

    Tokens occurring fewer than ``min_count`` times are dropped (they will
    map to UNK at tokenize time). ``aliases`` maps surface tokens onto a
    canonical token before counting; aliased tokens share one embedding row.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("empty corpus")
    aliases = dict(aliases or {})
    counts = {}
    for text in corpus:
        for tok in split_text(text):
            tok = aliases.get(tok, tok)
            counts[tok] = counts.get(tok, 0) + 1
    kept = [t for t in sorted(counts) if counts[t] >= min_count]
    vocab = build_vocab_from_tokens(kept)
    vocab.aliases = aliases
    return vocab


def tokenize(vocab, text):
    tokens = split_text(text)
    if not tokens:
        raise DataError(f"text has no tokens: {text!r}")
    ids = np.array([vocab.lookup(t) for t in tokens], dtype=np.int64)
    return TokenSeq(ids=ids, tokens=tokens)


def init_model(vocab_size, config=None, seed=0):
    """Uniform(-0.1, 0.1) initialization from a seeded generator."""
    cfg = config or ModelConfig()
    rng = np.random.default_rng(seed)
    d, h = cfg.embed_dim, cfg.hidden_dim

    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    return ClassifierModel(
        emb=u(vocab_size, d), w1=u(d, h), b1=u(h), w2=u(h, cfg.n_classes),
        b2=u(cfg.n_classes), config=cfg,
    )


def embed(model, seq):
    """Embedding matrix (n, d) for a token sequence."""
    return model.emb[seq.ids]


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_pooled(model, pooled):
    """Hidden layer + softmax on already mean-pooled vectors (batched).

    ``pooled`` has shape (..., d); returns (probs, logits) of shape (..., 2).
    Models are duck-typed: an object with a ``pooled_forward(pooled)``
    method (returning the same pair) is used as-is, which lets analytically
    constructed models stand in for the MLP.
    """
    custom = getattr(model, "pooled_forward", None)
    if custom is not None:
        return custom(pooled)
    hidden = np.tanh(pooled @ model.w1 + model.b1)
    logits = hidden @ model.w2 + model.b2
    return _softmax(logits), logits


def forward(model, embeddings):
    """Predict from an (n, d) embedding matrix for one input."""
    embeddings = np.asarray(embeddings, dtype=float)
    if embeddings.ndim != 2 or embeddings.shape[0] < 1:
        raise DataError("embeddings must be a non-empty (n, d) matrix")
    if not np.all(np.isfinite(embeddings)):
        raise DataError("non-finite values in input embeddings")
    pooled = embeddings.mean(axis=0)
    probs, logits = forward_pooled(model, pooled)
    return Prediction(probs=probs, predicted_class=int(np.argmax(probs)),
                      logits=logits)


def grad_wrt_embeddings_matrix(model, embeddings, target_class):
    """d p(target) / d embeddings, exact reverse mode. Shape (n, d).

    Duck-typed models may provide ``embedding_grad(X, target_class)``.
    """
    custom = getattr(model, "embedding_grad", None)
    if custom is not None:
        return custom(np.asarray(embeddings, dtype=float), target_class)
    embeddings = np.asarray(embeddings, dtype=float)
    n = embeddings.shape[0]
    pooled = embeddings.mean(axis=0)
    hidden = np.tanh(pooled @ model.w1 + model.b1)
    logits = hidden @ model.w2 + model.b2
    probs = _softmax(logits)
    # d p_t / d logits = p_t * (onehot_t - p)
    dlogits = probs[target_class] * (np.eye(len(probs))[target_class] - probs)
    dhidden = model.w2 @ dlogits
    dpooled = model.w1 @ (dhidden * (1.0 - hidden**2))
    return np.tile(dpooled / n, (n, 1))


def grad_wrt_embeddings(model, seq, target_class):
    if target_class not in (0, 1):
        raise ConfigError(f"target_class must be 0 or 1, got {target_class}")
    return grad_wrt_embeddings_matrix(model, embed(model, seq), target_class)


def predict(model, vocab, text):
    return forward(model, embed(model, tokenize(vocab, text)))


def _lr_at(step, total_steps, cfg):
    """Linear warmup to cfg.learning_rate, then linear decay to zero."""
    warmup = min(cfg.warmup_steps, total_steps)
    if warmup > 0 and step <= warmup:
        return cfg.learning_rate * step / warmup
    if total_steps == warmup:
        return cfg.learning_rate
    return cfg.learning_rate * (total_steps - step) / (total_steps - warmup)


def _batch_arrays(seqs, labels):
    lengths = np.array([s.n for s in seqs])
    max_len = lengths.max()
    ids = np.zeros((len(seqs), max_len), dtype=np.int64)
    mask = np.zeros((len(seqs), max_len))
    for i, s in enumerate(seqs):
        ids[i, :s.n] = s.ids
        mask[i, :s.n] = 1.0
    return ids, mask, lengths, np.asarray(labels, dtype=np.int64)


def train(model, data, cfg):
    """Train on (TokenSeq, label) pairs with AdamW; returns (model, log).

    Deterministic given cfg.seed. The input model is not modified; the
    returned model holds the trained parameters.
    """
    if cfg.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if cfg.learning_rate <= 0:
        raise ConfigError("learning rate must be positive")
    data = list(data)
    labels_present = {lbl for _, lbl in data}
    if len(labels_present) < 2:
        raise DataError("training data must contain both classes")

    params = {k: v.copy() for k, v in model.params().items()}
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(cfg.seed)
    b1c, b2c = cfg.betas

    n_batches = (len(data) + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * n_batches
    step = 0
    log = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        correct = 0
        for start in range(0, len(data), cfg.batch_size):
            batch = [data[i] for i in order[start:start + cfg.batch_size]]
            ids, mask, lengths, y = _batch_arrays(
                [s for s, _ in batch], [l for _, l in batch])
            B = len(batch)

            pooled = (params["emb"][ids] * mask[:, :, None]).sum(axis=1)
            pooled /= lengths[:, None]
            hidden = np.tanh(pooled @ params["w1"] + params["b1"])
            logits = hidden @ params["w2"] + params["b2"]
            probs = _softmax(logits)
            p_true = probs[np.arange(B), y]
            epoch_loss += float(-np.log(np.clip(p_true, 1e-12, None)).sum())
            correct += int((probs.argmax(axis=1) == y).sum())

            dlogits = probs.copy()
            dlogits[np.arange(B), y] -= 1.0
            dlogits /= B
            grads = {
                "w2": hidden.T @ dlogits,
                "b2": dlogits.sum(axis=0),
            }
            dpre = (dlogits @ params["w2"].T) * (1.0 - hidden**2)
            grads["w1"] = pooled.T @ dpre
            grads["b1"] = dpre.sum(axis=0)
            dpooled = (dpre @ params["w1"].T) / lengths[:, None]
            demb = np.zeros_like(params["emb"])
            np.add.at(demb, ids.ravel(),
                      (dpooled[:, None, :] * mask[:, :, None])
                      .reshape(-1, demb.shape[1]))
            grads["emb"] = demb

            step += 1
            lr = _lr_at(step, total_steps, cfg)
            for k in params:
                g = grads[k]
                m_state[k] = b1c * m_state[k] + (1 - b1c) * g
                v_state[k] = b2c * v_state[k] + (1 - b2c) * g**2
                m_hat = m_state[k] / (1 - b1c**step)
                v_hat = v_state[k] / (1 - b2c**step)
                params[k] -= lr * (m_hat / (np.sqrt(v_hat) + cfg.eps)
                                   + cfg.weight_decay * params[k])
        log.append({"epoch": epoch, "loss": epoch_loss / len(data),
                    "accuracy": correct / len(data)})

    trained = ClassifierModel(config=model.config, **params)
    return trained, log


def save_model(model, vocab, path):
    doc = {
        "config": {"embed_dim": model.config.embed_dim,
                   "hidden_dim": model.config.hidden_dim,
                   "n_classes": model.config.n_classes},
        "vocabulary": vocab.to_dict(),
        "parameters": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in model.params().items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_model(path):
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    cfg = ModelConfig(**doc["config"])
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"])
              for k, v in doc["parameters"].items()}
    vocab = Vocabulary.from_dict(doc["vocabulary"])
    return ClassifierModel(config=cfg, **params), vocab
