"""Contextual title embeddings from a from-scratch bidirectional language model.

Two independent stacked LSTM language models (one per direction) share a
token embedding table. A token's contextual vector concatenates its input
embedding with every layer's hidden state from both directions, giving
dimension D + 2*H*L. Vectors serialize to a hashed plain-text store.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import model_io, optim
from .corpus import Corpus
from .errors import FormatError, TrainingDivergedError
from .lstm import LstmCell, softmax_ce

log = logging.getLogger(__name__)

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"
_SENTINELS = (UNK, BOS, EOS)


class Vocab:
    """Token ids with fixed sentinels: <unk>=0, <s>=1, </s>=2.

    Remaining ids follow descending corpus count with lexicographic
    tie-breaks, so the mapping is deterministic for a given corpus.
    """

    def __init__(self, tokens: Sequence[str], min_count: int = 1):
        tokens = tuple(tokens)
        if tokens[:3] != _SENTINELS:
            raise ValueError(f"vocab must start with the sentinels {_SENTINELS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocab contains duplicate tokens")
        self.tokens = tokens
        self.min_count = min_count
        self._index = {tok: i for i, tok in enumerate(tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._index.get(token, 0)

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.id(t) for t in tokens], dtype=np.int64)

    @classmethod
    def from_counts(cls, counts: Mapping[str, int], min_count: int = 1) -> "Vocab":
        if min_count < 1:
            raise ValueError(f"min_count must be >= 1, got {min_count}")
        kept = [
            (c, t) for t, c in counts.items() if c >= min_count and t not in _SENTINELS
        ]
        ordered = tuple(t for _, t in sorted(kept, key=lambda ct: (-ct[0], ct[1])))
        return cls(_SENTINELS + ordered, min_count=min_count)


def build_vocab(corpus: Corpus, min_count: int = 1) -> Vocab:
    """Vocabulary over a corpus; tokens below min_count fall back to <unk>."""
    counts: Counter[str] = Counter()
    for title in corpus.titles:
        counts.update(title.tokens)
    return Vocab.from_counts(counts, min_count=min_count)


class BiLmModel:
    """Forward and backward LSTM language models over a shared embedding table."""

    def __init__(
        self,
        vocab: Vocab,
        dim: int,
        hidden: int,
        layers: int,
        rng: np.random.Generator | None = None,
    ):
        if dim < 1 or hidden < 1 or layers < 1:
            raise ValueError(f"dims must be positive, got dim={dim} hidden={hidden} layers={layers}")
        self.vocab = vocab
        self.dim = dim
        self.hidden = hidden
        self.layers = layers
        if rng is None:
            rng = np.random.default_rng(0)
        self.embed = rng.uniform(-0.1, 0.1, size=(vocab.size, dim))
        self.fwd_cells = [
            LstmCell(dim if l == 0 else hidden, hidden, rng) for l in range(layers)
        ]
        self.bwd_cells = [
            LstmCell(dim if l == 0 else hidden, hidden, rng) for l in range(layers)
        ]
        bound = 1.0 / np.sqrt(hidden)
        self.fwd_out_W = rng.uniform(-bound, bound, size=(hidden, vocab.size))
        self.fwd_out_b = np.zeros(vocab.size)
        self.bwd_out_W = rng.uniform(-bound, bound, size=(hidden, vocab.size))
        self.bwd_out_b = np.zeros(vocab.size)
        self.history: list[float] = []

    @property
    def contextual_dim(self) -> int:
        return self.dim + 2 * self.hidden * self.layers

    def parameters(self) -> list[np.ndarray]:
        params = [self.embed]
        for cell in self.fwd_cells + self.bwd_cells:
            params.extend([cell.W, cell.b])
        params.extend([self.fwd_out_W, self.fwd_out_b, self.bwd_out_W, self.bwd_out_b])
        return params

    def save(self, path) -> None:
        meta = {
            "vocab": list(self.vocab.tokens),
            "min_count": self.vocab.min_count,
            "dim": self.dim,
            "hidden": self.hidden,
            "layers": self.layers,
        }
        arrays: dict[str, np.ndarray] = {"embed": self.embed}
        for l in range(self.layers):
            arrays[f"fwd{l}.W"] = self.fwd_cells[l].W
            arrays[f"fwd{l}.b"] = self.fwd_cells[l].b
            arrays[f"bwd{l}.W"] = self.bwd_cells[l].W
            arrays[f"bwd{l}.b"] = self.bwd_cells[l].b
        arrays["fwd_out.W"] = self.fwd_out_W
        arrays["fwd_out.b"] = self.fwd_out_b
        arrays["bwd_out.W"] = self.bwd_out_W
        arrays["bwd_out.b"] = self.bwd_out_b
        model_io.save_model(path, "bilm", meta, arrays)

    @classmethod
    def load(cls, path) -> "BiLmModel":
        kind, meta, arrays = model_io.load_model(path)
        if kind != "bilm":
            raise ValueError(f"{path}: expected a bilm model, found {kind!r}")
        vocab = Vocab(meta["vocab"], min_count=meta["min_count"])
        model = cls(vocab, meta["dim"], meta["hidden"], meta["layers"])
        model.embed = arrays["embed"]
        for l in range(model.layers):
            model.fwd_cells[l].W = arrays[f"fwd{l}.W"]
            model.fwd_cells[l].b = arrays[f"fwd{l}.b"]
            model.bwd_cells[l].W = arrays[f"bwd{l}.W"]
            model.bwd_cells[l].b = arrays[f"bwd{l}.b"]
        model.fwd_out_W = arrays["fwd_out.W"]
        model.fwd_out_b = arrays["fwd_out.b"]
        model.bwd_out_W = arrays["bwd_out.W"]
        model.bwd_out_b = arrays["bwd_out.b"]
        return model


def _stack_run(cells: list[LstmCell], xs: np.ndarray, want_cache: bool = False):
    """Run a stacked one-direction LSTM; layer l consumes layer l-1's states."""
    layer_hs = []
    layer_caches = []
    inp = xs
    for cell in cells:
        hs, caches = cell.run(inp, want_cache=want_cache)
        layer_hs.append(hs)
        layer_caches.append(caches)
        inp = hs
    return layer_hs, layer_caches


def _stack_backprop(cells, layer_caches, dh_top, weight_grads):
    """Backpropagate through the stack; returns the gradient on the inputs.

    weight_grads maps id(cell) -> (dW, db) accumulators.
    """
    dh = dh_top
    for l in range(len(cells) - 1, -1, -1):
        dxs, dW, db = cells[l].backprop(layer_caches[l], dh)
        gW, gb = weight_grads[id(cells[l])]
        gW += dW
        gb += db
        dh = dxs
    return dh


def _direction_batches(ids: np.ndarray, bos: int, eos: int, reverse: bool):
    """Inputs and targets for one LM direction over an id batch (B, T)."""
    if reverse:
        ids = ids[:, ::-1]
    B, T = ids.shape
    inputs = np.empty((B, T + 1), dtype=np.int64)
    targets = np.empty((B, T + 1), dtype=np.int64)
    inputs[:, 0] = bos if not reverse else eos
    inputs[:, 1:] = ids
    targets[:, :T] = ids
    targets[:, T] = eos if not reverse else bos
    return inputs, targets


def _length_groups(items: list) -> list[list[int]]:
    """Indices grouped by sequence length, ascending, stable within a group."""
    groups: dict[int, list[int]] = {}
    for pos, item in enumerate(items):
        groups.setdefault(len(item), []).append(pos)
    return [groups[length] for length in sorted(groups)]


def train_bilm(corpus: Corpus, dims: tuple[int, int, int], cfg, min_count: int = 1) -> BiLmModel:
    """Train the bidirectional LM; dims is (embedding, hidden, layers).

    Loss is mean cross-entropy per prediction over both directions; the
    per-epoch perplexity exp(loss) is logged and recorded in model.history.
    The dropout fields of the training config do not apply here.
    """
    dim, hidden, layers = dims
    if not corpus.titles:
        raise ValueError("cannot train a language model on an empty corpus")
    vocab = build_vocab(corpus, min_count=min_count)
    rng = np.random.default_rng(cfg.seed)
    model = BiLmModel(vocab, dim, hidden, layers, rng=rng)
    sequences = [vocab.ids(title.tokens) for title in corpus.titles]
    params = model.parameters()
    opt = optim.make_optimizer(cfg.optimizer, cfg.learning_rate, params)
    n = len(sequences)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_ce = 0.0
        epoch_preds = 0
        for lo in range(0, n, cfg.batch_size):
            batch = [sequences[int(j)] for j in order[lo : lo + cfg.batch_size]]
            grads = [np.zeros_like(p) for p in params]
            ce, preds = _bilm_batch(model, batch, grads)
            if not np.isfinite(ce):
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch + 1}, batch {lo // cfg.batch_size + 1}"
                )
            scale = 1.0 / preds
            for g in grads:
                g *= scale
            optim.clip_grads_(grads, cfg.clip_norm)
            opt.step(params, grads)
            epoch_ce += ce
            epoch_preds += preds
        mean_ce = epoch_ce / epoch_preds
        model.history.append(mean_ce)
        log.info(
            "bilm epoch %d/%d: ce %.6f  perplexity %.3f",
            epoch + 1, cfg.epochs, mean_ce, float(np.exp(mean_ce)),
        )
    return model


def _bilm_batch(model: BiLmModel, batch: list[np.ndarray], grads: list[np.ndarray] | None):
    """Summed CE over one batch; accumulates gradients in place when given.

    Returns (ce_sum, prediction_count).
    """
    params = model.parameters()
    if grads is not None:
        grad_of = {id(p): g for p, g in zip(params, grads)}
        cell_grads = {
            id(cell): (grad_of[id(cell.W)], grad_of[id(cell.b)])
            for cell in model.fwd_cells + model.bwd_cells
        }
    bos, eos = model.vocab.id(BOS), model.vocab.id(EOS)
    total_ce = 0.0
    total_preds = 0
    for group in _length_groups(batch):
        ids = np.stack([batch[j] for j in group])
        for reverse, cells, out_W, out_b in (
            (False, model.fwd_cells, model.fwd_out_W, model.fwd_out_b),
            (True, model.bwd_cells, model.bwd_out_W, model.bwd_out_b),
        ):
            inputs, targets = _direction_batches(ids, bos, eos, reverse)
            xs = model.embed[inputs]
            layer_hs, layer_caches = _stack_run(cells, xs, want_cache=grads is not None)
            logits = layer_hs[-1] @ out_W + out_b
            ce, dlogits = softmax_ce(logits, targets)
            total_ce += ce
            total_preds += targets.size
            if grads is None:
                continue
            top = layer_hs[-1]
            flat_h = top.reshape(-1, model.hidden)
            flat_d = dlogits.reshape(-1, model.vocab.size)
            grad_of[id(out_W)] += flat_h.T @ flat_d
            grad_of[id(out_b)] += flat_d.sum(axis=0)
            dh_top = dlogits @ out_W.T
            dxs = _stack_backprop(cells, layer_caches, dh_top, cell_grads)
            np.add.at(grad_of[id(model.embed)], inputs, dxs)
    return total_ce, total_preds


def batch_ce(model: BiLmModel, token_sequences: Sequence[Sequence[str]]) -> float:
    """Mean cross-entropy per prediction over both directions (no gradients)."""
    seqs = [model.vocab.ids(toks) for toks in token_sequences if len(toks)]
    if not seqs:
        raise ValueError("no non-empty sequences to score")
    total_ce = 0.0
    total_preds = 0
    for seq in seqs:
        ce, preds = _bilm_batch(model, [seq], None)
        total_ce += ce
        total_preds += preds
    return total_ce / total_preds


def perplexity(model: BiLmModel, corpus: Corpus) -> float:
    """exp(mean per-prediction cross-entropy) over a corpus, both directions."""
    return float(np.exp(batch_ce(model, [t.tokens for t in corpus.titles])))


def _direction_states(model: BiLmModel, tokens: Sequence[str], reverse: bool):
    """Per-layer hidden states for one direction, single sequence.

    Returns a list of (T+1, hidden) arrays, one per layer, in input order
    for that direction (position 0 consumed only the boundary sentinel).
    """
    ids = model.vocab.ids(tokens)
    inputs, _ = _direction_batches(ids[None, :], model.vocab.id(BOS), model.vocab.id(EOS), reverse)
    xs = model.embed[inputs]
    cells = model.bwd_cells if reverse else model.fwd_cells
    layer_hs, _ = _stack_run(cells, xs)
    return [hs[0] for hs in layer_hs]


def forward_logprobs(model: BiLmModel, tokens: Sequence[str]) -> np.ndarray:
    """(T+1, V) log-probabilities: row t predicts token t (row T predicts </s>)."""
    if not tokens:
        raise ValueError("empty token sequence")
    states = _direction_states(model, tokens, reverse=False)
    logits = states[-1] @ model.fwd_out_W + model.fwd_out_b
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


def backward_logprobs(model: BiLmModel, tokens: Sequence[str]) -> np.ndarray:
    """(T+1, V) log-probabilities in right-to-left order: row r predicts
    token T-1-r (row T predicts <s>)."""
    if not tokens:
        raise ValueError("empty token sequence")
    states = _direction_states(model, tokens, reverse=True)
    logits = states[-1] @ model.bwd_out_W + model.bwd_out_b
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


def embed_title(model: BiLmModel, tokens: Sequence[str]) -> np.ndarray:
    """Contextual vectors (T, D + 2*H*L): embedding, then forward hidden
    states per layer, then backward hidden states per layer."""
    if not tokens:
        raise ValueError("cannot embed an empty title")
    T = len(tokens)
    ids = model.vocab.ids(tokens)
    fwd_states = _direction_states(model, tokens, reverse=False)
    bwd_states = _direction_states(model, tokens, reverse=True)
    parts = [model.embed[ids]]
    # Token t was consumed at forward input position t+1 and at backward
    # input position T-t (the backward pass reads the title right to left).
    for hs in fwd_states:
        parts.append(hs[1 : T + 1])
    for hs in bwd_states:
        parts.append(hs[1 : T + 1][::-1])
    return np.concatenate(parts, axis=1)


class BiLmEmbeddings:
    """Adapter exposing a trained biLM as a frozen embedding provider."""

    trainable = False

    def __init__(self, model: BiLmModel, content_hash: str | None = None):
        self.model = model
        self.content_hash = content_hash

    @property
    def dim(self) -> int:
        return self.model.contextual_dim

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        return embed_title(self.model, tokens)


@dataclass(frozen=True, eq=False)
class TitleVectors:
    title_id: str
    vectors: np.ndarray  # (n_tokens, dim)


class EmbeddingStore:
    """In-memory set of per-title contextual vectors with a fixed dimension."""

    def __init__(self, dim: int, records: Sequence[TitleVectors]):
        self.dim = dim
        self.records = list(records)
        for rec in self.records:
            if rec.vectors.ndim != 2 or rec.vectors.shape[1] != dim:
                raise ValueError(
                    f"record {rec.title_id!r} has shape {rec.vectors.shape}, expected (*, {dim})"
                )
            if " " in rec.title_id or not rec.title_id:
                raise ValueError(f"bad title id {rec.title_id!r}")
        self._pooled: np.ndarray | None = None

    def pooled(self) -> np.ndarray:
        """Mean-pooled title vectors, (n_records, dim)."""
        if self._pooled is None:
            if self.records:
                self._pooled = np.stack([r.vectors.mean(axis=0) for r in self.records])
            else:
                self._pooled = np.zeros((0, self.dim))
        return self._pooled


def _render_body(records: Sequence[TitleVectors]) -> str:
    lines: list[str] = []
    for rec in records:
        lines.append(f"{rec.title_id} {rec.vectors.shape[0]}")
        for row in rec.vectors:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "".join(line + "\n" for line in lines)


def write_embeddings(store: EmbeddingStore, path) -> None:
    """Write the plain-text store; the header hash covers the record body."""
    body = _render_body(store.records)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]
    Path(path).write_text(f"ipod-emb v1 {store.dim} {digest}\n{body}", encoding="utf-8")


def read_embeddings(path) -> EmbeddingStore:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    newline = text.find("\n")
    if newline < 0:
        raise FormatError("missing header line", path=str(path))
    header = text[:newline].split(" ")
    if len(header) != 4 or header[0] != "ipod-emb" or header[1] != "v1":
        raise FormatError(f"bad header {text[:newline]!r}", path=str(path))
    try:
        dim = int(header[2])
    except ValueError:
        raise FormatError(f"bad dimension {header[2]!r}", path=str(path)) from None
    body = text[newline + 1 :]
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]
    if digest != header[3]:
        raise FormatError(
            f"content hash mismatch: header says {header[3]}, body hashes to {digest}",
            path=str(path),
        )
    records: list[TitleVectors] = []
    lines = body.splitlines()
    pos = 0
    while pos < len(lines):
        head = lines[pos].split(" ")
        if len(head) != 2:
            raise FormatError(f"bad record header {lines[pos]!r}", path=str(path), line=pos + 2)
        title_id, count_text = head
        try:
            count = int(count_text)
        except ValueError:
            raise FormatError(f"bad token count {count_text!r}", path=str(path), line=pos + 2) from None
        if pos + count >= len(lines):
            raise FormatError(f"record {title_id!r} is truncated", path=str(path), line=pos + 2)
        rows = []
        for k in range(count):
            values = lines[pos + 1 + k].split(" ")
            if len(values) != dim:
                raise FormatError(
                    f"expected {dim} values, got {len(values)}", path=str(path), line=pos + 2 + k
                )
            rows.append([float(v) for v in values])
        records.append(TitleVectors(title_id=title_id, vectors=np.array(rows)))
        pos += 1 + count
    return EmbeddingStore(dim=dim, records=records)


def nearest_titles(
    store: EmbeddingStore, query: np.ndarray, k: int
) -> list[tuple[str, float]]:
    """Top-k titles by cosine similarity of mean-pooled vectors.

    The query may be a single vector or per-token vectors (mean-pooled
    here). Ties keep insertion order; asking for more neighbors than the
    store holds returns everything.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.ndim == 2:
        query = query.mean(axis=0)
    if query.shape != (store.dim,):
        raise ValueError(f"query has shape {query.shape}, store dimension is {store.dim}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pooled = store.pooled()
    if len(store.records) == 0:
        return []
    qnorm = float(np.linalg.norm(query))
    norms = np.linalg.norm(pooled, axis=1)
    sims = np.zeros(len(store.records))
    valid = (norms > 0) & (qnorm > 0)
    if qnorm > 0:
        sims[valid] = (pooled[valid] @ query) / (norms[valid] * qnorm)
    ranked = np.argsort(-sims, kind="stable")[: min(k, len(store.records))]
    return [(store.records[int(i)].title_id, float(sims[int(i)])) for i in ranked]
