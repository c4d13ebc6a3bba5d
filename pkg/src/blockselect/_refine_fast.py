"""Numba kernel for the greedy single-node refiner.

Implements exactly the incremental move evaluation of
``spectral._RefineState`` with scalar loops; falls back to the numpy path
when numba is unavailable.  Model codes: 0 = Bernoulli profile, 1 = Poisson
degree-corrected profile.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _block_value(model: int, n_ab: float, m_ab: float) -> float:
    if model == 0:
        if n_ab <= 0.0:
            return 0.0
        r = m_ab / n_ab
        if r <= 0.0 or r >= 1.0:
            return 0.0
        return n_ab * (r * np.log(r) + (1.0 - r) * np.log(1.0 - r))
    if m_ab <= 0.0:
        return 0.0
    return m_ab * np.log(m_ab / n_ab) - m_ab


@njit(cache=True)
def _weight_value(n_a: float, deg_sum: float) -> float:
    if deg_sum <= 0.0:
        return 0.0
    return deg_sum * (np.log(n_a) - np.log(deg_sum))


@njit(cache=True)
def _greedy_refine(a, z, k, model, max_sweeps, tol):
    n = a.shape[0]
    n_a = np.zeros(k)
    for i in range(n):
        n_a[z[i]] += 1.0
    s = np.zeros((n, k))
    for i in range(n):
        for j in range(n):
            if a[i, j] != 0.0:
                s[i, z[j]] += a[i, j]
    m = np.zeros((k, k))
    for i in range(n):
        for b in range(k):
            m[z[i], b] += s[i, b]
    deg = np.zeros(n)
    for i in range(n):
        for j in range(n):
            deg[i] += a[i, j]
    deg_sum = np.zeros(k)
    for i in range(n):
        deg_sum[z[i]] += deg[i]

    deltas = np.zeros(k)
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            c = z[i]
            if n_a[c] <= 1.0:
                continue
            nc = n_a[c]
            # removal of i from block c, terms shared by every candidate
            rem_all = 0.0
            for b in range(k):
                if b == c:
                    continue
                rem_all += _block_value(model, (nc - 1.0) * n_a[b], m[c, b] - s[i, b]) - _block_value(
                    model, nc * n_a[b], m[c, b]
                )
            diag_c = 0.5 * (
                _block_value(model, (nc - 1.0) * (nc - 2.0), m[c, c] - 2.0 * s[i, c])
                - _block_value(model, nc * (nc - 1.0), m[c, c])
            )
            for d in range(k):
                if d == c:
                    deltas[d] = 0.0
                    continue
                nd = n_a[d]
                rem = rem_all - (
                    _block_value(model, (nc - 1.0) * nd, m[c, d] - s[i, d])
                    - _block_value(model, nc * nd, m[c, d])
                )
                ins = 0.0
                for b in range(k):
                    if b == c or b == d:
                        continue
                    ins += _block_value(model, (nd + 1.0) * n_a[b], m[d, b] + s[i, b]) - _block_value(
                        model, nd * n_a[b], m[d, b]
                    )
                diag_d = 0.5 * (
                    _block_value(model, (nd + 1.0) * nd, m[d, d] + 2.0 * s[i, d])
                    - _block_value(model, nd * (nd - 1.0), m[d, d])
                )
                cross = _block_value(
                    model, (nc - 1.0) * (nd + 1.0), m[c, d] + s[i, c] - s[i, d]
                ) - _block_value(model, nc * nd, m[c, d])
                delta = rem + ins + diag_c + diag_d + cross
                if model == 1:
                    delta += (
                        _weight_value(nc - 1.0, deg_sum[c] - deg[i])
                        - _weight_value(nc, deg_sum[c])
                        + _weight_value(nd + 1.0, deg_sum[d] + deg[i])
                        - _weight_value(nd, deg_sum[d])
                    )
                deltas[d] = delta
            best_d = 0
            best_val = deltas[0]
            for d in range(1, k):
                if deltas[d] > best_val:
                    best_val = deltas[d]
                    best_d = d
            if best_val > tol and best_d != c:
                d = best_d
                for b in range(k):
                    m[c, b] -= s[i, b]
                    m[b, c] -= s[i, b]
                    m[d, b] += s[i, b]
                    m[b, d] += s[i, b]
                n_a[c] -= 1.0
                n_a[d] += 1.0
                for j in range(n):
                    if a[j, i] != 0.0:
                        s[j, c] -= a[j, i]
                        s[j, d] += a[j, i]
                deg_sum[c] -= deg[i]
                deg_sum[d] += deg[i]
                z[i] = d
                moved = True
        if not moved:
            break
    return z


def greedy_refine(a: np.ndarray, z0: np.ndarray, k: int, model: str, max_sweeps: int,
                  tol: float = 1e-9) -> np.ndarray:
    """Refined 0-based labels; requires numba (callers check NUMBA_AVAILABLE)."""
    model_code = 0 if model == "sbm" else 1
    return _greedy_refine(
        np.ascontiguousarray(a, dtype=np.float64),
        z0.astype(np.int64).copy(),
        k,
        model_code,
        max_sweeps,
        tol,
    )
