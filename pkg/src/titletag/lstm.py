"""Recurrent core shared by the taggers and the language model.

A single LSTM layer with gates packed row-wise as [input; forget; output;
candidate], run over whole batches of equal-length sequences, with
hand-derived backpropagation through time. An optional per-sequence mask
multiplies the recurrent hidden state at every step (variational dropout).
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_ce(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed cross-entropy and dloss/dlogits for (B, T, V) logits with
    integer targets (B, T)."""
    m = logits.max(axis=-1, keepdims=True)
    ex = np.exp(logits - m)
    z = ex.sum(axis=-1, keepdims=True)
    logp = logits - m - np.log(z)
    gold = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    dlogits = ex / z
    b_idx, t_idx = np.ogrid[: targets.shape[0], : targets.shape[1]]
    dlogits[b_idx, t_idx, targets] -= 1.0
    return float(-gold.sum()), dlogits


class LstmCell:
    """One LSTM layer; W maps [x_t, h_{t-1}] (input_dim + hidden) to 4*hidden."""

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator | None = None):
        self.input_dim = input_dim
        self.hidden = hidden
        if rng is None:
            self.W = np.zeros((4 * hidden, input_dim + hidden))
        else:
            bound = 1.0 / np.sqrt(hidden)
            self.W = rng.uniform(-bound, bound, size=(4 * hidden, input_dim + hidden))
        self.b = np.zeros(4 * hidden)
        # Forget-gate bias starts at 1 so early training keeps memory open.
        self.b[hidden : 2 * hidden] = 1.0

    def run(
        self, xs: np.ndarray, mask: np.ndarray | None = None, want_cache: bool = False
    ) -> tuple[np.ndarray, list | None]:
        """Run over xs of shape (B, T, input_dim); mask (B, hidden) scales h_{t-1}.

        Returns hidden states (B, T, hidden) and, when requested, the
        per-step caches needed by backprop.
        """
        B, T, _ = xs.shape
        H = self.hidden
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        caches: list | None = [] if want_cache else None
        for t in range(T):
            h_in = h if mask is None else h * mask
            xh = np.concatenate([xs[:, t], h_in], axis=1)
            z = xh @ self.W.T + self.b
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H : 2 * H])
            o = sigmoid(z[:, 2 * H : 3 * H])
            g = np.tanh(z[:, 3 * H :])
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h = o * tanh_c
            hs[:, t] = h
            if caches is not None:
                caches.append((xh, i, f, o, g, c, tanh_c))
            c = c_new
        return hs, caches

    def backprop(
        self, caches: list, dhs: np.ndarray, mask: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Backpropagate dhs (B, T, hidden); returns (dxs, dW, db)."""
        B, T, H = dhs.shape
        dW = np.zeros_like(self.W)
        db = np.zeros_like(self.b)
        dxs = np.empty((B, T, self.input_dim))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            xh, i, f, o, g, c_prev, tanh_c = caches[t]
            dh = dhs[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
            do = dh * tanh_c
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_next = dc * f
            dz = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)],
                axis=1,
            )
            dW += dz.T @ xh
            db += dz.sum(axis=0)
            dxh = dz @ self.W
            dxs[:, t] = dxh[:, : self.input_dim]
            dh_rec = dxh[:, self.input_dim :]
            dh_next = dh_rec if mask is None else dh_rec * mask
        return dxs, dW, db
