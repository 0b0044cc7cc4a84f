"""Dense-parameter optimizers and gradient clipping for the recurrent models.

Parameters are updated in place; callers pass the same parameter list in the
same order on every step.
"""

from __future__ import annotations

import numpy as np


def global_norm(grads: list[np.ndarray]) -> float:
    total = 0.0
    for g in grads:
        total += float((g * g).sum())
    return float(np.sqrt(total))


def clip_grads_(grads: list[np.ndarray], max_norm: float | None) -> float:
    """Scale grads in place to the given global norm; returns the unclipped norm."""
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    B1, B2, EPS = 0.9, 0.999, 1e-8

    def __init__(self, lr: float, params: list[np.ndarray]):
        self.lr = lr
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        bias1 = 1.0 - self.B1**self.t
        bias2 = 1.0 - self.B2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.B1
            m += (1.0 - self.B1) * g
            v *= self.B2
            v += (1.0 - self.B2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.EPS)


def make_optimizer(name: str, lr: float, params: list[np.ndarray]):
    if name == "adam":
        return Adam(lr, params)
    if name == "sgd":
        return Sgd(lr)
    raise ValueError(f"unknown optimizer {name!r}")
