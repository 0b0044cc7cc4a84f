"""Shared fixtures and independent reference implementations.

The reference helpers here deliberately avoid the library's own dynamic
programming and calculus: exact quantities come from exhaustive path
enumeration and central finite differences, so the fast implementations
are checked against something that cannot share their bugs.
"""

import itertools

import numpy as np
import pytest
from hypothesis import settings

from titletag.gazetteer import sample_annotation_sets, sample_gazetteer

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def sample_sets():
    return sample_annotation_sets()


@pytest.fixture(scope="session")
def sample_gaz():
    return sample_gazetteer()


def enumerate_paths(n_positions: int, n_labels: int):
    return itertools.product(range(n_labels), repeat=n_positions)


def score_path(emissions, trans, start, stop, path) -> float:
    """Plain sum-of-terms score of one label path."""
    total = start[path[0]] + stop[path[-1]]
    for t, y in enumerate(path):
        total += emissions[t, y]
    for t in range(len(path) - 1):
        total += trans[path[t], path[t + 1]]
    return float(total)


def brute_force_logz(emissions, trans, start, stop) -> float:
    """Partition function by summing exp(score) over every label path."""
    T, L = emissions.shape
    scores = [
        score_path(emissions, trans, start, stop, path)
        for path in enumerate_paths(T, L)
    ]
    m = max(scores)
    return m + float(np.log(sum(np.exp(s - m) for s in scores)))


def brute_force_best_path(emissions, trans, start, stop):
    """Argmax path by enumeration; ties resolve to the first (lowest) path.

    itertools.product yields label tuples in lexicographic order, so taking
    a strictly-greater maximum reproduces the documented lowest-index rule.
    """
    T, L = emissions.shape
    best, best_score = None, -np.inf
    for path in enumerate_paths(T, L):
        s = score_path(emissions, trans, start, stop, path)
        if s > best_score:
            best, best_score = list(path), s
    return best, best_score


def central_difference(f, param: np.ndarray, index, eps: float = 1e-5) -> float:
    """d f / d param[index] by symmetric perturbation."""
    old = param[index]
    param[index] = old + eps
    hi = f()
    param[index] = old - eps
    lo = f()
    param[index] = old
    return (hi - lo) / (2.0 * eps)


def scan_runs(coarse_tags):
    """Reference chunker: maximal runs of identical non-O tags, by scanning."""
    chunks = []
    i = 0
    n = len(coarse_tags)
    while i < n:
        tag = coarse_tags[i]
        if tag == "O":  # CoarseTag is a str enum
            i += 1
            continue
        j = i
        while j + 1 < n and coarse_tags[j + 1] == tag:
            j += 1
        chunks.append((tag, i, j))
        i = j + 1
    return chunks
