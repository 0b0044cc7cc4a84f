"""Bidirectional LSTM taggers trained with hand-derived backpropagation.

Two output heads share the encoder: a CRF transition block decoded with
Viterbi ("lstm-crf") and an independent per-token softmax ("lstm"). The
encoder stacks bidirectional layers; each layer above the first consumes
the concatenated forward and backward states of the layer below. Embeddings
come from a trainable lookup table or a frozen bidirectional-LM provider.
"""

from __future__ import annotations

import logging
from collections import Counter
from typing import Sequence

import numpy as np

from . import model_io, optim
from .crf import apply_word_dropout, sequence_marginals, viterbi_path
from .errors import TrainingDivergedError
from .labeling import ALL_LABELS, LABEL_STRINGS, N_LABELS, BioesLabel, LabeledSequence
from .lstm import LstmCell, softmax_ce
from .title2vec import BiLmEmbeddings, Vocab

log = logging.getLogger(__name__)


class TrainableEmbeddings:
    """Token lookup table trained with the tagger; rows start uniform(-0.1, 0.1)."""

    trainable = True

    def __init__(self, vocab: Vocab, dim: int, rng: np.random.Generator | None = None):
        self.vocab = vocab
        self._dim = dim
        if rng is None:
            self.table = np.zeros((vocab.size, dim))
        else:
            self.table = rng.uniform(-0.1, 0.1, size=(vocab.size, dim))

    @property
    def dim(self) -> int:
        return self._dim

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        return self.vocab.ids(tokens)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        return self.table[self.vocab.ids(tokens)]


class LstmCrfModel:
    """Stacked BiLSTM encoder with a CRF or softmax output head."""

    def __init__(
        self,
        provider,
        hidden_size: int = 256,
        layers: int = 1,
        kind: str = "lstm-crf",
        rng: np.random.Generator | None = None,
    ):
        if kind not in ("lstm-crf", "lstm"):
            raise ValueError(f"kind must be 'lstm-crf' or 'lstm', got {kind!r}")
        if hidden_size < 1 or layers < 1:
            raise ValueError(f"bad dimensions: hidden_size={hidden_size} layers={layers}")
        self.provider = provider
        self.hidden_size = hidden_size
        self.layers = layers
        self.kind = kind
        if rng is None:
            rng = np.random.default_rng(0)
        self.fwd_cells = [
            LstmCell(provider.dim if l == 0 else 2 * hidden_size, hidden_size, rng)
            for l in range(layers)
        ]
        self.bwd_cells = [
            LstmCell(provider.dim if l == 0 else 2 * hidden_size, hidden_size, rng)
            for l in range(layers)
        ]
        bound = 1.0 / np.sqrt(2 * hidden_size)
        self.proj_W = rng.uniform(-bound, bound, size=(2 * hidden_size, N_LABELS))
        self.proj_b = np.zeros(N_LABELS)
        if kind == "lstm-crf":
            self.trans = np.zeros((N_LABELS, N_LABELS))
            self.start = np.zeros(N_LABELS)
            self.stop = np.zeros(N_LABELS)
        else:
            self.trans = self.start = self.stop = None
        self.history: list[float] = []

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for cell in self.fwd_cells + self.bwd_cells:
            params.extend([cell.W, cell.b])
        params.extend([self.proj_W, self.proj_b])
        if self.kind == "lstm-crf":
            params.extend([self.trans, self.start, self.stop])
        if self.provider.trainable:
            params.append(self.provider.table)
        return params

    def encode(self, xs: np.ndarray, masks=None, want_cache: bool = False):
        """Encode (B, T, dim) inputs into (B, T, 2*hidden) states.

        masks is a per-layer list of (forward, backward) recurrent dropout
        masks of shape (B, hidden), or None in eval mode.
        """
        cachebook = []
        inp = xs
        for l in range(self.layers):
            mf, mb = masks[l] if masks is not None else (None, None)
            hf, cache_f = self.fwd_cells[l].run(inp, mask=mf, want_cache=want_cache)
            hb_rev, cache_b = self.bwd_cells[l].run(inp[:, ::-1], mask=mb, want_cache=want_cache)
            hb = hb_rev[:, ::-1]
            inp = np.concatenate([hf, hb], axis=2)
            cachebook.append((cache_f, cache_b))
        return inp, cachebook

    def _encode_backprop(self, cachebook, masks, d_enc, grad_of):
        H = self.hidden_size
        d_out = d_enc
        for l in range(self.layers - 1, -1, -1):
            mf, mb = masks[l] if masks is not None else (None, None)
            cache_f, cache_b = cachebook[l]
            dx_f, dWf, dbf = self.fwd_cells[l].backprop(cache_f, d_out[..., :H], mask=mf)
            dx_b_rev, dWb, dbb = self.bwd_cells[l].backprop(
                cache_b, d_out[:, ::-1, H:], mask=mb
            )
            grad_of[id(self.fwd_cells[l].W)] += dWf
            grad_of[id(self.fwd_cells[l].b)] += dbf
            grad_of[id(self.bwd_cells[l].W)] += dWb
            grad_of[id(self.bwd_cells[l].b)] += dbb
            d_out = dx_f + dx_b_rev[:, ::-1]
        return d_out

    def _embed_group(self, token_group: list[tuple[str, ...]]) -> np.ndarray:
        if self.provider.trainable:
            ids = np.stack([self.provider.ids(toks) for toks in token_group])
            return self.provider.table[ids]
        return np.stack([self.provider.embed(toks) for toks in token_group])

    def emissions(self, tokens: Sequence[str]) -> np.ndarray:
        """Per-position label scores (T, n_labels) for one sequence."""
        if not tokens:
            raise ValueError("empty token sequence")
        xs = self._embed_group([tuple(tokens)])
        enc, _ = self.encode(xs)
        return enc[0] @ self.proj_W + self.proj_b

    def predict(self, tokens: Sequence[str]) -> tuple[BioesLabel, ...]:
        """Decode one sequence; inference never batches, so the output is
        independent of any surrounding batch composition."""
        emis = self.emissions(tokens)
        if self.kind == "lstm-crf":
            path = viterbi_path(emis, self.trans, self.start, self.stop)
        else:
            path = [int(i) for i in np.argmax(emis, axis=1)]
        return tuple(ALL_LABELS[int(i)] for i in path)

    def _group_pass(self, token_group, label_ids, masks, grad_of) -> float:
        """Loss (summed over the group) and, when grad_of is given, gradients."""
        want_grads = grad_of is not None
        ids = None
        if self.provider.trainable:
            ids = np.stack([self.provider.ids(toks) for toks in token_group])
            xs = self.provider.table[ids]
        else:
            xs = np.stack([self.provider.embed(toks) for toks in token_group])
        enc, caches = self.encode(xs, masks, want_cache=want_grads)
        emis = enc @ self.proj_W + self.proj_b
        B, T, _ = emis.shape

        if self.kind == "lstm-crf":
            logz, unary, pairwise = sequence_marginals(emis, self.trans, self.start, self.stop)
            ys = label_ids
            b_idx = np.arange(B)[:, None]
            t_idx = np.arange(T)[None, :]
            gold = self.start[ys[:, 0]] + self.stop[ys[:, -1]] + emis[b_idx, t_idx, ys].sum(axis=1)
            if T > 1:
                gold += self.trans[ys[:, :-1], ys[:, 1:]].sum(axis=1)
            loss = float((logz - gold).sum())
            if not want_grads:
                return loss
            dtrans = pairwise.sum(axis=(0, 1))
            if T > 1:
                np.subtract.at(dtrans, (ys[:, :-1].ravel(), ys[:, 1:].ravel()), 1.0)
            dstart = unary[:, 0, :].sum(axis=0)
            np.subtract.at(dstart, ys[:, 0], 1.0)
            dstop = unary[:, -1, :].sum(axis=0)
            np.subtract.at(dstop, ys[:, -1], 1.0)
            grad_of[id(self.trans)] += dtrans
            grad_of[id(self.start)] += dstart
            grad_of[id(self.stop)] += dstop
            # reuse the posterior buffer for the emission gradient
            demis = unary
            demis[b_idx, t_idx, ys] -= 1.0
        else:
            loss, demis = softmax_ce(emis, label_ids)
            if not want_grads:
                return loss

        grad_of[id(self.proj_W)] += enc.reshape(-1, 2 * self.hidden_size).T @ demis.reshape(-1, N_LABELS)
        grad_of[id(self.proj_b)] += demis.sum(axis=(0, 1))
        d_enc = demis @ self.proj_W.T
        dx = self._encode_backprop(caches, masks, d_enc, grad_of)
        if self.provider.trainable:
            np.add.at(grad_of[id(self.provider.table)], ids, dx)
        return loss

    def save(self, path) -> None:
        meta: dict = {
            "labels": list(LABEL_STRINGS),
            "hidden": self.hidden_size,
            "layers": self.layers,
        }
        arrays: dict[str, np.ndarray] = {}
        if self.provider.trainable:
            meta["provider"] = {
                "type": "table",
                "dim": self.provider.dim,
                "vocab": list(self.provider.vocab.tokens),
                "min_count": self.provider.vocab.min_count,
            }
            arrays["embed"] = self.provider.table
        else:
            meta["provider"] = {
                "type": "bilm",
                "dim": self.provider.dim,
                "content_hash": getattr(self.provider, "content_hash", None),
            }
        for l in range(self.layers):
            arrays[f"fwd{l}.W"] = self.fwd_cells[l].W
            arrays[f"fwd{l}.b"] = self.fwd_cells[l].b
            arrays[f"bwd{l}.W"] = self.bwd_cells[l].W
            arrays[f"bwd{l}.b"] = self.bwd_cells[l].b
        arrays["proj.W"] = self.proj_W
        arrays["proj.b"] = self.proj_b
        if self.kind == "lstm-crf":
            arrays["trans"] = self.trans
            arrays["start"] = self.start
            arrays["stop"] = self.stop
        model_io.save_model(path, self.kind, meta, arrays)

    @classmethod
    def load(cls, path, provider: BiLmEmbeddings | None = None) -> "LstmCrfModel":
        kind, meta, arrays = model_io.load_model(path)
        if kind not in ("lstm-crf", "lstm"):
            raise ValueError(f"{path}: expected an lstm or lstm-crf model, found {kind!r}")
        if list(meta["labels"]) != list(LABEL_STRINGS):
            raise ValueError(f"{path}: label set does not match this build")
        spec = meta["provider"]
        if spec["type"] == "table":
            vocab = Vocab(spec["vocab"], min_count=spec["min_count"])
            table = TrainableEmbeddings(vocab, spec["dim"])
            table.table = arrays["embed"]
            provider = table
        else:
            if provider is None:
                raise ValueError(
                    f"{path}: model uses frozen language-model embeddings; pass the provider"
                )
            if provider.dim != spec["dim"]:
                raise ValueError(
                    f"{path}: provider dimension {provider.dim} != stored {spec['dim']}"
                )
            stored_hash = spec.get("content_hash")
            given_hash = getattr(provider, "content_hash", None)
            if stored_hash and given_hash and stored_hash != given_hash:
                raise ValueError(
                    f"{path}: embedding provider hash mismatch: model expects {stored_hash}"
                )
        model = cls(provider, hidden_size=meta["hidden"], layers=meta["layers"], kind=kind)
        for l in range(model.layers):
            model.fwd_cells[l].W = arrays[f"fwd{l}.W"]
            model.fwd_cells[l].b = arrays[f"fwd{l}.b"]
            model.bwd_cells[l].W = arrays[f"bwd{l}.W"]
            model.bwd_cells[l].b = arrays[f"bwd{l}.b"]
        model.proj_W = arrays["proj.W"]
        model.proj_b = arrays["proj.b"]
        if kind == "lstm-crf":
            model.trans = arrays["trans"]
            model.start = arrays["start"]
            model.stop = arrays["stop"]
        return model


def bilstm_emissions(model: LstmCrfModel, tokens: Sequence[str]) -> np.ndarray:
    """Emission scores of one token sequence under the BiLSTM encoder."""
    return model.emissions(tokens)


def batch_nll(model: LstmCrfModel, examples: Sequence[LabeledSequence]) -> float:
    """Eval-mode mean loss per sequence (no dropout, no gradients)."""
    if not examples:
        raise ValueError("no examples")
    total = 0.0
    for group in _group_by_length(list(range(len(examples))), examples):
        toks = [examples[j].tokens for j in group]
        ys = np.array([examples[j].label_ids() for j in group], dtype=np.int64)
        total += model._group_pass(toks, ys, None, None)
    return total / len(examples)


def _group_by_length(indices, examples) -> list[list[int]]:
    groups: dict[int, list[int]] = {}
    for j in indices:
        groups.setdefault(len(examples[j].tokens), []).append(j)
    return [groups[length] for length in sorted(groups)]


def _sample_masks(model: LstmCrfModel, batch_size: int, p: float, rng: np.random.Generator):
    """One inverted-dropout mask per sequence per direction per layer."""
    if p <= 0.0:
        return None
    H = model.hidden_size
    masks = []
    for _ in range(model.layers):
        mf = (rng.random((batch_size, H)) >= p) / (1.0 - p)
        mb = (rng.random((batch_size, H)) >= p) / (1.0 - p)
        masks.append((mf, mb))
    return masks


def _train_bilstm(
    kind: str,
    data: Sequence[LabeledSequence],
    cfg,
    hidden_size: int,
    layers: int,
    embedding_dim: int,
    provider=None,
) -> LstmCrfModel:
    data = list(data)
    if not data:
        raise ValueError("no training data")
    rng = np.random.default_rng(cfg.seed)
    if provider is None:
        counts = Counter(tok for ex in data for tok in ex.tokens)
        provider = TrainableEmbeddings(Vocab.from_counts(counts), embedding_dim, rng)
    model = LstmCrfModel(provider, hidden_size=hidden_size, layers=layers, kind=kind, rng=rng)
    params = model.parameters()
    opt = optim.make_optimizer(cfg.optimizer, cfg.learning_rate, params)
    n = len(data)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            batch_idx = [int(j) for j in order[lo : lo + cfg.batch_size]]
            dropped = [apply_word_dropout(data[j].tokens, cfg.word_dropout, rng) for j in batch_idx]
            grads = [np.zeros_like(p) for p in params]
            grad_of = {id(p): g for p, g in zip(params, grads)}
            batch_loss = 0.0
            groups: dict[int, list[int]] = {}
            for pos, j in enumerate(batch_idx):
                groups.setdefault(len(data[j].tokens), []).append(pos)
            for length in sorted(groups):
                members = groups[length]
                toks = [dropped[pos] for pos in members]
                ys = np.array(
                    [data[batch_idx[pos]].label_ids() for pos in members], dtype=np.int64
                )
                masks = _sample_masks(model, len(members), cfg.variational_dropout, rng)
                batch_loss += model._group_pass(toks, ys, masks, grad_of)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch + 1}, batch {lo // cfg.batch_size + 1}"
                )
            scale = 1.0 / len(batch_idx)
            for g in grads:
                g *= scale
            optim.clip_grads_(grads, cfg.clip_norm)
            opt.step(params, grads)
            epoch_loss += batch_loss
        mean_loss = epoch_loss / n
        model.history.append(mean_loss)
        log.info("%s epoch %d/%d: mean loss %.6f", kind, epoch + 1, cfg.epochs, mean_loss)
    return model


def train_lstm_crf(
    data: Sequence[LabeledSequence],
    cfg,
    hidden_size: int = 256,
    layers: int = 1,
    embedding_dim: int = 64,
    provider=None,
) -> LstmCrfModel:
    """Train the BiLSTM-CRF tagger with word and variational dropout."""
    return _train_bilstm("lstm-crf", data, cfg, hidden_size, layers, embedding_dim, provider)


def train_lstm_softmax(
    data: Sequence[LabeledSequence],
    cfg,
    hidden_size: int = 256,
    layers: int = 1,
    embedding_dim: int = 64,
    provider=None,
) -> LstmCrfModel:
    """Train the plain BiLSTM tagger (per-token softmax, argmax decoding)."""
    return _train_bilstm("lstm", data, cfg, hidden_size, layers, embedding_dim, provider)
