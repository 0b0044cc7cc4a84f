"""Linear-chain CRF tagger with template features, exact inference and SGD.

Scores decompose into per-position emission features times label weights
plus label-transition, start and stop weights. The partition function uses
the forward recursion in log space; gradients come from forward-backward
marginals. The same class doubles as the logistic-regression baseline: with
the transition block pinned at zero the path score factorizes per token and
Viterbi degenerates to a per-position argmax.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import model_io
from .errors import TrainingDivergedError
from .gazetteer import Gazetteer
from .labeling import ALL_LABELS, LABEL_STRINGS, N_LABELS, BioesLabel, LabeledSequence

log = logging.getLogger(__name__)

UNK_TOKEN = "<unk>"
_BOS = "<s>"
_EOS = "</s>"


@dataclass(frozen=True)
class TrainConfig:
    """Shared training knobs; the defaults follow the tuned CRF values."""

    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 10
    optimizer: str = "sgd"  # "sgd" or "adam"
    seed: int = 0
    word_dropout: float = 0.05
    variational_dropout: float = 0.5
    clip_norm: float | None = 5.0  # used by the recurrent taggers only

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        for name in ("word_dropout", "variational_dropout"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {p}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError(f"clip_norm must be positive or None, got {self.clip_norm}")


class FeatureVocab:
    """Dense feature-string -> id mapping; freezing rejects new features."""

    def __init__(self) -> None:
        self._index: dict[str, int] = {}
        self._features: list[str] = []
        self.frozen = False

    def __len__(self) -> int:
        return len(self._features)

    def add(self, feature: str) -> int | None:
        """Id of the feature, registering it unless the vocab is frozen."""
        fid = self._index.get(feature)
        if fid is None:
            if self.frozen:
                return None
            fid = len(self._features)
            self._index[feature] = fid
            self._features.append(feature)
        return fid

    def get(self, feature: str) -> int | None:
        return self._index.get(feature)

    def freeze(self) -> None:
        self.frozen = True

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(self._features)

    @classmethod
    def from_features(cls, features: Sequence[str]) -> "FeatureVocab":
        vocab = cls()
        for feature in features:
            vocab.add(feature)
        return vocab


def extract_features(tokens: Sequence[str], i: int, gazetteer: Gazetteer | None = None) -> list[str]:
    """Feature strings for position i, deduplicated in a deterministic order.

    Window tokens use "<s>"/"</s>" sentinels beyond the boundaries; the
    normalizer strips angle brackets so real tokens can never collide with
    them. The gazetteer feature appears only when a gazetteer is given.
    """
    n = len(tokens)
    if not 0 <= i < n:
        raise IndexError(f"position {i} out of range for {n} tokens")
    tok = tokens[i]
    prev1 = tokens[i - 1] if i >= 1 else _BOS
    prev2 = tokens[i - 2] if i >= 2 else _BOS
    next1 = tokens[i + 1] if i + 1 < n else _EOS
    next2 = tokens[i + 2] if i + 2 < n else _EOS
    feats = [
        f"w0={tok}",
        f"w-1={prev1}",
        f"w+1={next1}",
        f"w-2={prev2}",
        f"w+2={next2}",
    ]
    for k in (1, 2, 3):
        if len(tok) >= k:
            feats.append(f"p{k}={tok[:k]}")
            feats.append(f"s{k}={tok[-k:]}")
    feats.append(f"w-1|w0={prev1}|{tok}")
    if i == 0:
        feats.append("first")
    if i == n - 1:
        feats.append("last")
    if gazetteer is not None:
        feats.append(f"gaz={gazetteer.lookup(tok).value}")
    return list(dict.fromkeys(feats))


def log_partition_scores(
    emissions: np.ndarray, trans: np.ndarray, start: np.ndarray, stop: np.ndarray
) -> np.ndarray:
    """Log-sum over all label paths; emissions may carry leading batch axes."""
    T = emissions.shape[-2]
    alpha = start + emissions[..., 0, :]
    for t in range(1, T):
        alpha = logsumexp(alpha[..., :, None] + trans, axis=-2) + emissions[..., t, :]
    return logsumexp(alpha + stop, axis=-1)


def sequence_marginals(
    emissions: np.ndarray, trans: np.ndarray, start: np.ndarray, stop: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward-backward pass.

    Returns (logZ, unary, pairwise) where unary[..., t, y] is the posterior
    of label y at position t and pairwise[..., t, y, y'] the posterior of
    the transition y -> y' between positions t and t+1.
    """
    T = emissions.shape[-2]
    alphas = np.empty_like(emissions)
    betas = np.empty_like(emissions)
    alphas[..., 0, :] = start + emissions[..., 0, :]
    for t in range(1, T):
        alphas[..., t, :] = (
            logsumexp(alphas[..., t - 1, :, None] + trans, axis=-2) + emissions[..., t, :]
        )
    logz = logsumexp(alphas[..., T - 1, :] + stop, axis=-1)
    betas[..., T - 1, :] = stop
    for t in range(T - 2, -1, -1):
        betas[..., t, :] = logsumexp(
            trans + (emissions[..., t + 1, :] + betas[..., t + 1, :])[..., None, :], axis=-1
        )
    unary = np.exp(alphas + betas - np.asarray(logz)[..., None, None])
    pairwise = np.exp(
        alphas[..., :-1, :, None]
        + trans
        + (emissions[..., 1:, :] + betas[..., 1:, :])[..., None, :]
        - np.asarray(logz)[..., None, None, None]
    )
    return logz, unary, pairwise


def path_score(
    emissions: np.ndarray,
    trans: np.ndarray,
    start: np.ndarray,
    stop: np.ndarray,
    path: Sequence[int],
) -> float:
    """Unnormalized log score of one label path for a single sequence."""
    idx = np.asarray(path, dtype=np.int64)
    score = float(start[idx[0]] + stop[idx[-1]])
    score += float(emissions[np.arange(len(idx)), idx].sum())
    if len(idx) > 1:
        score += float(trans[idx[:-1], idx[1:]].sum())
    return score


def viterbi_path(
    emissions: np.ndarray, trans: np.ndarray, start: np.ndarray, stop: np.ndarray
) -> list[int]:
    """Highest-scoring label path; ties resolve toward the lowest label index."""
    T, L = emissions.shape
    back = np.empty((T, L), dtype=np.int64)
    score = start + emissions[0]
    for t in range(1, T):
        cand = score[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(L)] + emissions[t]
    last = int(np.argmax(score + stop))
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t][path[-1]]))
    return path[::-1]


class CrfModel:
    """Feature-based linear-chain tagger; kind "logreg" pins transitions at zero."""

    def __init__(
        self,
        kind: str = "crf",
        gazetteer: Gazetteer | None = None,
        vocab: FeatureVocab | None = None,
        capacity: int = 1024,
    ):
        if kind not in ("crf", "logreg"):
            raise ValueError(f"kind must be 'crf' or 'logreg', got {kind!r}")
        self.kind = kind
        self.gazetteer = gazetteer
        self.vocab = vocab if vocab is not None else FeatureVocab()
        rows = max(capacity, len(self.vocab), 1)
        self._emit = np.zeros((rows, N_LABELS))
        self.trans = np.zeros((N_LABELS, N_LABELS))
        self.start = np.zeros(N_LABELS)
        self.stop = np.zeros(N_LABELS)
        self.history: list[float] = []

    @property
    def emission_weights(self) -> np.ndarray:
        return self._emit[: len(self.vocab)]

    def _ensure_capacity(self, n: int) -> None:
        cap = self._emit.shape[0]
        if n <= cap:
            return
        while cap < n:
            cap *= 2
        grown = np.zeros((cap, N_LABELS))
        grown[: self._emit.shape[0]] = self._emit
        self._emit = grown

    def featurize(self, tokens: Sequence[str], extend: bool = False) -> list[list[int]]:
        """Feature ids per position; extend=True registers unseen features.

        On a frozen vocab unseen features are silently ignored either way,
        which is the documented inference behavior.
        """
        rows = []
        for i in range(len(tokens)):
            ids = []
            for feature in extract_features(tokens, i, self.gazetteer):
                fid = self.vocab.add(feature) if extend else self.vocab.get(feature)
                if fid is not None:
                    ids.append(fid)
            rows.append(ids)
        if extend:
            self._ensure_capacity(len(self.vocab))
        return rows

    def emissions(self, tokens: Sequence[str], feature_ids: list[list[int]] | None = None) -> np.ndarray:
        rows = feature_ids if feature_ids is not None else self.featurize(tokens)
        emis = np.zeros((len(rows), N_LABELS))
        for t, ids in enumerate(rows):
            if ids:
                emis[t] = self._emit[ids].sum(axis=0)
        return emis

    def predict(self, tokens: Sequence[str]) -> tuple[BioesLabel, ...]:
        return viterbi_decode(self, tokens)

    def save(self, path) -> None:
        meta = {
            "labels": list(LABEL_STRINGS),
            "features": list(self.vocab.features),
            "uses_gazetteer": self.gazetteer is not None,
        }
        arrays = {
            "emit": self.emission_weights,
            "trans": self.trans,
            "start": self.start,
            "stop": self.stop,
        }
        model_io.save_model(path, self.kind, meta, arrays)

    @classmethod
    def load(cls, path, gazetteer: Gazetteer | None = None) -> "CrfModel":
        kind, meta, arrays = model_io.load_model(path)
        if kind not in ("crf", "logreg"):
            raise ValueError(f"{path}: expected a crf or logreg model, found {kind!r}")
        if list(meta["labels"]) != list(LABEL_STRINGS):
            raise ValueError(f"{path}: label set does not match this build")
        if meta["uses_gazetteer"] and gazetteer is None:
            raise ValueError(
                f"{path}: model was trained with gazetteer features; pass the gazetteer"
            )
        vocab = FeatureVocab.from_features(meta["features"])
        model = cls(kind=kind, gazetteer=gazetteer if meta["uses_gazetteer"] else None,
                    vocab=vocab, capacity=max(len(vocab), 1))
        model._emit[: len(vocab)] = arrays["emit"]
        model.trans = arrays["trans"]
        model.start = arrays["start"]
        model.stop = arrays["stop"]
        model.vocab.freeze()
        return model


def log_partition(model: CrfModel, tokens: Sequence[str]) -> float:
    """Log partition function of the label lattice for one token sequence."""
    if not tokens:
        raise ValueError("empty token sequence")
    emis = model.emissions(tokens)
    return float(log_partition_scores(emis, model.trans, model.start, model.stop))


def nll_and_gradient(
    model: CrfModel,
    example: LabeledSequence,
    feature_ids: list[list[int]] | None = None,
) -> tuple[float, dict]:
    """Negative log-likelihood of one example and its exact gradient.

    The gradient is expected feature counts minus gold feature counts:
    emission rows come back sparse as {feature id: vector over labels}.
    Unseen features extend the vocab while it is unfrozen (training) and are
    ignored once frozen (inference).
    """
    rows = feature_ids if feature_ids is not None else model.featurize(
        example.tokens, extend=not model.vocab.frozen
    )
    ys = example.label_ids()
    emis = model.emissions(example.tokens, feature_ids=rows)
    logz, unary, pairwise = sequence_marginals(emis, model.trans, model.start, model.stop)
    gold = path_score(emis, model.trans, model.start, model.stop, ys)
    loss = float(logz) - gold

    demis = unary.copy()
    demis[np.arange(len(ys)), ys] -= 1.0
    emit_grad: dict[int, np.ndarray] = {}
    for t, ids in enumerate(rows):
        for fid in ids:
            seen = emit_grad.get(fid)
            if seen is None:
                emit_grad[fid] = demis[t].copy()
            else:
                seen += demis[t]
    tgrad = pairwise.sum(axis=0)
    for t in range(len(ys) - 1):
        tgrad[ys[t], ys[t + 1]] -= 1.0
    sgrad = unary[0].copy()
    sgrad[ys[0]] -= 1.0
    pgrad = unary[-1].copy()
    pgrad[ys[-1]] -= 1.0
    return loss, {"emit": emit_grad, "trans": tgrad, "start": sgrad, "stop": pgrad}


def viterbi_decode(model: CrfModel, tokens: Sequence[str]) -> tuple[BioesLabel, ...]:
    """Most probable BIOES labeling of a token sequence."""
    if not tokens:
        raise ValueError("empty token sequence")
    emis = model.emissions(tokens)
    path = viterbi_path(emis, model.trans, model.start, model.stop)
    return tuple(ALL_LABELS[i] for i in path)


def apply_word_dropout(tokens: Sequence[str], p: float, rng: np.random.Generator) -> tuple[str, ...]:
    """Replace each token with the unknown sentinel with probability p."""
    if p <= 0.0:
        return tuple(tokens)
    return tuple(UNK_TOKEN if rng.random() < p else tok for tok in tokens)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def apply(self, model: CrfModel, emit_grad, tgrad, sgrad, pgrad, scale, update_transitions):
        step = self.lr * scale
        for fid, g in emit_grad.items():
            model._emit[fid] -= step * g
        if update_transitions:
            model.trans -= step * tgrad
            model.start -= step * sgrad
            model.stop -= step * pgrad


class _Adam:
    """Adam with lazy state updates on the sparse emission rows."""

    B1, B2, EPS = 0.9, 0.999, 1e-8

    def __init__(self, lr: float, model: CrfModel):
        self.lr = lr
        self.t = 0
        self.m_emit = np.zeros_like(model._emit)
        self.v_emit = np.zeros_like(model._emit)
        self.dense: dict[str, tuple[np.ndarray, np.ndarray]] = {
            "trans": (np.zeros((N_LABELS, N_LABELS)), np.zeros((N_LABELS, N_LABELS))),
            "start": (np.zeros(N_LABELS), np.zeros(N_LABELS)),
            "stop": (np.zeros(N_LABELS), np.zeros(N_LABELS)),
        }

    def _grow(self, model: CrfModel) -> None:
        if self.m_emit.shape[0] < model._emit.shape[0]:
            for name in ("m_emit", "v_emit"):
                old = getattr(self, name)
                grown = np.zeros_like(model._emit)
                grown[: old.shape[0]] = old
                setattr(self, name, grown)

    def _step(self, param, grad, m, v, idx=None):
        b1, b2 = self.B1, self.B2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        if idx is None:
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            param -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.EPS)
        else:
            m[idx] = b1 * m[idx] + (1 - b1) * grad
            v[idx] = b2 * v[idx] + (1 - b2) * grad * grad
            param[idx] -= self.lr * (m[idx] / bias1) / (np.sqrt(v[idx] / bias2) + self.EPS)

    def apply(self, model: CrfModel, emit_grad, tgrad, sgrad, pgrad, scale, update_transitions):
        self._grow(model)
        self.t += 1
        for fid, g in emit_grad.items():
            self._step(model._emit, g * scale, self.m_emit, self.v_emit, idx=fid)
        if update_transitions:
            m, v = self.dense["trans"]
            self._step(model.trans, tgrad * scale, m, v)
            m, v = self.dense["start"]
            self._step(model.start, sgrad * scale, m, v)
            m, v = self.dense["stop"]
            self._step(model.stop, pgrad * scale, m, v)


def _run_training(
    model: CrfModel, data: list[LabeledSequence], cfg: TrainConfig, update_transitions: bool
) -> CrfModel:
    if not data:
        raise ValueError("no training data")
    rng = np.random.default_rng(cfg.seed)
    opt = _Adam(cfg.learning_rate, model) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)
    n = len(data)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            batch_idx = order[lo : lo + cfg.batch_size]
            emit_grad: dict[int, np.ndarray] = {}
            tgrad = np.zeros((N_LABELS, N_LABELS))
            sgrad = np.zeros(N_LABELS)
            pgrad = np.zeros(N_LABELS)
            batch_loss = 0.0
            for j in batch_idx:
                example = data[int(j)]
                tokens = apply_word_dropout(example.tokens, cfg.word_dropout, rng)
                rows = model.featurize(tokens, extend=True)
                loss, grad = nll_and_gradient(model, example, feature_ids=rows)
                batch_loss += loss
                for fid, g in grad["emit"].items():
                    seen = emit_grad.get(fid)
                    if seen is None:
                        emit_grad[fid] = g
                    else:
                        seen += g
                tgrad += grad["trans"]
                sgrad += grad["start"]
                pgrad += grad["stop"]
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch + 1}, batch {lo // cfg.batch_size + 1}"
                )
            opt.apply(
                model, emit_grad, tgrad, sgrad, pgrad,
                scale=1.0 / len(batch_idx), update_transitions=update_transitions,
            )
            epoch_loss += batch_loss
        mean_loss = epoch_loss / n
        model.history.append(mean_loss)
        log.info("%s epoch %d/%d: mean nll %.6f", model.kind, epoch + 1, cfg.epochs, mean_loss)
    model.vocab.freeze()
    return model


def train_crf(
    data: Sequence[LabeledSequence],
    cfg: TrainConfig = TrainConfig(),
    gazetteer: Gazetteer | None = None,
) -> CrfModel:
    """Train the full CRF with seeded mini-batch updates and word dropout."""
    model = CrfModel(kind="crf", gazetteer=gazetteer)
    return _run_training(model, list(data), cfg, update_transitions=True)


def train_logreg(
    data: Sequence[LabeledSequence],
    cfg: TrainConfig = TrainConfig(),
    gazetteer: Gazetteer | None = None,
) -> CrfModel:
    """Train the per-token baseline: identical features, transitions stay zero."""
    model = CrfModel(kind="logreg", gazetteer=gazetteer)
    return _run_training(model, list(data), cfg, update_transitions=False)
