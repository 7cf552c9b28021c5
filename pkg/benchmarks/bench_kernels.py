"""Benchmark the numba-compiled kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
The same comparison can be forced package-wide with EMPATHYKIT_NO_NUMBA=1.
"""

from __future__ import annotations

import time

import numpy as np

from empathykit import kernels

REPEATS = 5


def best_of(fn, *args, repeats: int = REPEATS) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_lcs(rng):
    # two ~775-token sequences, the scale of long counseling answers
    a = rng.integers(0, 3000, size=775).astype(np.int64)
    b = rng.integers(0, 3000, size=775).astype(np.int64)
    numba_fn = kernels.lcs_length if kernels.NUMBA_ENABLED else None
    rows = []
    if numba_fn is not None:
        numba_fn(a, b)  # compile outside the timed region
        rows.append(("lcs_length 775x775", "numba", best_of(numba_fn, a, b)))
    rows.append(("lcs_length 775x775", "numpy", best_of(kernels.lcs_length_numpy, a, b)))
    return rows


def bench_embed(rng):
    weights = rng.normal(size=(2**15, 64))
    idx = rng.integers(0, 2**15, size=800).astype(np.int64)
    cnt = rng.uniform(1, 3, size=800)
    rows = []
    if kernels.NUMBA_ENABLED:
        compiled = kernels.embed_bag
        compiled(weights, idx, cnt)
        rows.append(("embed_bag 800 rows", "numba", best_of(compiled, weights, idx, cnt)))
    rows.append(("embed_bag 800 rows", "numpy", best_of(kernels.embed_bag_numpy, weights, idx, cnt)))
    return rows


def bench_scatter(rng):
    idx = rng.integers(0, 2**15, size=800).astype(np.int64)
    cnt = rng.uniform(1, 3, size=800)
    vec = rng.normal(size=64)
    rows = []
    if kernels.NUMBA_ENABLED:
        grad = np.zeros((2**15, 64))
        kernels.scatter_add_rows(grad, idx, cnt, vec)
        rows.append(
            (
                "scatter_add 800 rows",
                "numba",
                best_of(lambda: kernels.scatter_add_rows(np.zeros((2**15, 64)), idx, cnt, vec)),
            )
        )
    rows.append(
        (
            "scatter_add 800 rows",
            "numpy",
            best_of(lambda: kernels.scatter_add_rows_numpy(np.zeros((2**15, 64)), idx, cnt, vec)),
        )
    )
    return rows


def bench_bigram(rng):
    v = 20
    logits = rng.normal(size=(v, v))
    z = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    prev = rng.integers(0, v, size=2000).astype(np.int64)
    tok = rng.integers(0, v, size=2000).astype(np.int64)
    coef = rng.normal(size=2000)
    rows = []
    if kernels.NUMBA_ENABLED:
        kernels.bigram_grad(np.zeros((v, v)), prev, tok, coef, probs)
        rows.append(
            (
                "bigram_grad 2000 tok",
                "numba",
                best_of(lambda: kernels.bigram_grad(np.zeros((v, v)), prev, tok, coef, probs)),
            )
        )
    rows.append(
        (
            "bigram_grad 2000 tok",
            "numpy",
            best_of(lambda: kernels.bigram_grad_numpy(np.zeros((v, v)), prev, tok, coef, probs)),
        )
    )
    return rows


def main() -> None:
    rng = np.random.default_rng(0)
    print(f"numba enabled: {kernels.NUMBA_ENABLED}")
    all_rows = bench_lcs(rng) + bench_embed(rng) + bench_scatter(rng) + bench_bigram(rng)
    print(f"{'kernel':<24} {'path':<6} {'best of ' + str(REPEATS):>12}")
    by_kernel: dict[str, dict[str, float]] = {}
    for name, path, seconds in all_rows:
        print(f"{name:<24} {path:<6} {seconds * 1e3:>10.3f}ms")
        by_kernel.setdefault(name, {})[path] = seconds
    for name, paths in by_kernel.items():
        if "numba" in paths and "numpy" in paths:
            print(f"{name}: numpy/numba = {paths['numpy'] / paths['numba']:.1f}x")


if __name__ == "__main__":
    main()
