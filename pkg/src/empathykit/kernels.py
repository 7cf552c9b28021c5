"""Hot numeric kernels: numba-compiled loops with a pure-numpy fallback.

The numpy path is selected when numba is unavailable or when the environment
variable ``EMPATHYKIT_NO_NUMBA`` is set to a truthy value.  Both paths are
importable by name (``*_loop`` / ``*_numpy``) so the benchmark can compare
them; the module-level names (``lcs_length`` etc.) are what the rest of the
package calls.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _NUMBA_AVAILABLE = False

_NUMBA_DISABLED = os.environ.get("EMPATHYKIT_NO_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)
NUMBA_ENABLED = _NUMBA_AVAILABLE and not _NUMBA_DISABLED


# -- longest common subsequence ------------------------------------------------


def lcs_length_loop(a: np.ndarray, b: np.ndarray) -> int:
    """Two-row LCS DP; compiled with numba on the accelerated path."""
    n = a.shape[0]
    m = b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    curr = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        ai = a[i]
        for j in range(m):
            if ai == b[j]:
                curr[j + 1] = prev[j] + 1
            else:
                curr[j + 1] = max(prev[j + 1], curr[j])
        prev, curr = curr, prev
    return int(prev[m])


def lcs_length_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """Row-vectorized LCS DP.

    Within a row, dp[i][j] = max(dp[i][j-1], cand_j) with
    cand_j = max(dp[i-1][j], dp[i-1][j-1] + eq), so the row equals the
    running maximum of the candidates.
    """
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        eq = a[i] == b
        cand = np.maximum(prev[1:], np.where(eq, prev[:-1] + 1, 0))
        row = np.empty(m + 1, dtype=np.int64)
        row[0] = 0
        np.maximum.accumulate(cand, out=row[1:])
        prev = row
    return int(prev[m])


# -- hashed-feature embedding --------------------------------------------------


def embed_bag_loop(weights: np.ndarray, idx: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    """out = sum_j cnt[j] * weights[idx[j]]."""
    d = weights.shape[1]
    out = np.zeros(d, dtype=np.float64)
    for j in range(idx.shape[0]):
        c = cnt[j]
        row = weights[idx[j]]
        for k in range(d):
            out[k] += c * row[k]
    return out


def embed_bag_numpy(weights: np.ndarray, idx: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    return cnt @ weights[idx]


def scatter_add_rows_loop(
    grad: np.ndarray, idx: np.ndarray, cnt: np.ndarray, vec: np.ndarray
) -> None:
    """grad[idx[j]] += cnt[j] * vec, accumulating over duplicate indices."""
    d = vec.shape[0]
    for j in range(idx.shape[0]):
        r = idx[j]
        c = cnt[j]
        for k in range(d):
            grad[r, k] += c * vec[k]


def scatter_add_rows_numpy(
    grad: np.ndarray, idx: np.ndarray, cnt: np.ndarray, vec: np.ndarray
) -> None:
    np.add.at(grad, idx, cnt[:, None] * vec[None, :])


# -- bigram policy-gradient accumulation ----------------------------------------


def bigram_grad_loop(
    grad: np.ndarray,
    prev: np.ndarray,
    tok: np.ndarray,
    coef: np.ndarray,
    probs: np.ndarray,
) -> None:
    """grad[prev[j]] += coef[j] * (onehot(tok[j]) - probs[prev[j]])."""
    width = probs.shape[1]
    for j in range(prev.shape[0]):
        p = prev[j]
        c = coef[j]
        for w in range(width):
            grad[p, w] -= c * probs[p, w]
        grad[p, tok[j]] += c


def bigram_grad_numpy(
    grad: np.ndarray,
    prev: np.ndarray,
    tok: np.ndarray,
    coef: np.ndarray,
    probs: np.ndarray,
) -> None:
    row_coef = np.zeros(probs.shape[0], dtype=np.float64)
    np.add.at(row_coef, prev, coef)
    grad -= row_coef[:, None] * probs
    np.add.at(grad, (prev, tok), coef)


# -- path selection --------------------------------------------------------------

if NUMBA_ENABLED:
    lcs_length = njit(cache=True)(lcs_length_loop)
    embed_bag = njit(cache=True)(embed_bag_loop)
    scatter_add_rows = njit(cache=True)(scatter_add_rows_loop)
    bigram_grad = njit(cache=True)(bigram_grad_loop)
else:
    lcs_length = lcs_length_numpy
    embed_bag = embed_bag_numpy
    scatter_add_rows = scatter_add_rows_numpy
    bigram_grad = bigram_grad_numpy
