"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately naive: exhaustive path enumeration, full
linear scans, textbook dynamic programming. The point is that none of it
shares code (or mistakes) with the package under test.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np


def path_score(
    path: Sequence[int],
    emissions: np.ndarray,
    transitions: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
) -> float:
    s = start[path[0]] + emissions[0, path[0]]
    for t in range(1, len(path)):
        s += transitions[path[t - 1], path[t]] + emissions[t, path[t]]
    return float(s + end[path[-1]])


def all_paths(num_tokens: int, num_labels: int):
    return itertools.product(range(num_labels), repeat=num_tokens)


def brute_log_forward(
    emissions: np.ndarray,
    transitions: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
) -> float:
    T, L = emissions.shape
    scores = [
        path_score(p, emissions, transitions, start, end) for p in all_paths(T, L)
    ]
    m = max(scores)
    if math.isinf(m):
        return m
    return m + math.log(sum(math.exp(s - m) for s in scores))


def brute_viterbi(
    emissions: np.ndarray,
    transitions: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
) -> tuple[tuple[int, ...], float]:
    """Best path by enumeration.

    Ties break toward the path whose REVERSED label tuple is smallest,
    which is what lowest-index backpointer selection produces: the last
    label is minimized first, then the one before it, and so on.
    """
    T, L = emissions.shape
    best_score = -math.inf
    candidates: list[tuple[int, ...]] = []
    for p in all_paths(T, L):
        s = path_score(p, emissions, transitions, start, end)
        if s > best_score:
            best_score, candidates = s, [tuple(p)]
        elif s == best_score:
            candidates.append(tuple(p))
    winner = min(candidates, key=lambda p: tuple(reversed(p)))
    return winner, best_score


def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``f`` at ``x`` (both arbitrary shape)."""
    grad = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        hi = f(x)
        x[idx] = orig - eps
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * eps)
        it.iternext()
    return grad


def scan_topk(query: np.ndarray, rows: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Naive cosine top-k: python loop, sort by (-score, index)."""
    nq = math.sqrt(float(sum(float(v) ** 2 for v in query)))
    scored = []
    for i, row in enumerate(rows):
        dot = float(sum(float(a) * float(b) for a, b in zip(row, query)))
        nr = math.sqrt(float(sum(float(v) ** 2 for v in row)))
        scored.append((i, dot / (nr * nq)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def simple_normalize(s: str) -> str:
    """Oracle-side surface normalization (NFC assumed unnecessary for test data)."""
    return " ".join(s.lower().split())
