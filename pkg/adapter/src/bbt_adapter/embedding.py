"""Compact UMAP implementation (fuzzy k-NN graph + SGD layout).

The reference umap-learn package is not an allowed dependency here, so this
module implements the algorithm directly: exact k-NN, smoothed fuzzy
simplicial set construction, the min_dist->(a, b) curve fit, spectral
initialization, and the standard attract/repulse negative-sampling descent.
Everything is seeded and single-threaded, so coordinates are reproducible
bit-for-bit under a fixed seed.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import curve_fit

from bbt.errors import DataError

SMOOTH_ITERS = 64
NEGATIVE_SAMPLES = 5
GRAD_CLIP = 4.0
REPULSION_EPS = 0.001


def _knn(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    d = np.sqrt(np.maximum(
        np.square(x[:, None, :] - x[None, :, :]).sum(axis=2), 0.0))
    np.fill_diagonal(d, np.inf)
    idx = np.argsort(d, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(d, idx, axis=1)


def _smooth_knn(knn_d: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (rho, sigma): rho is the nearest positive distance; sigma is
    binary-searched so the membership strengths sum to log2(k)."""
    n = knn_d.shape[0]
    target = np.log2(k)
    rho = np.zeros(n)
    sigma = np.ones(n)
    for i in range(n):
        positive = knn_d[i][knn_d[i] > 0.0]
        if positive.size:
            rho[i] = positive[0]
        lo, hi, mid = 0.0, np.inf, 1.0
        for _ in range(SMOOTH_ITERS):
            total = np.exp(-np.maximum(knn_d[i] - rho[i], 0.0) / mid).sum()
            if abs(total - target) < 1e-5:
                break
            if total > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigma[i] = mid
    return rho, sigma


def fuzzy_graph(x: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Symmetrized fuzzy k-NN membership matrix (dense, zero diagonal)."""
    n = x.shape[0]
    idx, knn_d = _knn(x, n_neighbors)
    rho, sigma = _smooth_knn(knn_d, n_neighbors)
    p = np.zeros((n, n))
    rows = np.repeat(np.arange(n), n_neighbors)
    strengths = np.exp(-np.maximum(knn_d - rho[:, None], 0.0) / sigma[:, None])
    p[rows, idx.ravel()] = strengths.ravel()
    return p + p.T - p * p.T


def find_ab(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Fit the low-dimensional similarity curve 1/(1 + a d^(2b)) to the
    piecewise target exp(-(d - min_dist)/spread)."""
    d = np.linspace(0.0, 3.0 * spread, 300)
    target = np.where(d <= min_dist, 1.0, np.exp(-(d - min_dist) / spread))
    (a, b), _ = curve_fit(lambda t, a, b: 1.0 / (1.0 + a * t ** (2.0 * b)),
                          d, target, p0=(1.0, 1.0), maxfev=10000)
    return float(a), float(b)


def _spectral_init(graph: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    deg = graph.sum(axis=1)
    deg[deg == 0.0] = 1.0
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(graph.shape[0]) - inv_sqrt[:, None] * graph * inv_sqrt[None, :]
    vals, vecs = np.linalg.eigh(lap)
    order = np.argsort(vals)
    init = vecs[:, order[1:3]]  # skip the trivial constant eigenvector
    scale = np.abs(init).max()
    if scale == 0.0:
        return rng.normal(scale=1.0, size=init.shape)
    init = init * (10.0 / scale)
    return init + rng.normal(scale=1e-4, size=init.shape)


def fit_umap(x: np.ndarray, n_neighbors: int = 20, min_dist: float = 0.2,
             n_epochs: int = 300, seed: int = 0) -> np.ndarray:
    """2-D embedding of the rows of x; deterministic for a fixed seed."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("embedding input must be a nonempty 2-D matrix")
    n = x.shape[0]
    if n <= n_neighbors:
        raise DataError(f"need more than n_neighbors={n_neighbors} rows, got {n}")

    rng = np.random.default_rng(seed)
    graph = fuzzy_graph(x, n_neighbors)
    a, b = find_ab(min_dist)
    y = _spectral_init(graph, rng)

    heads, tails = np.nonzero(np.triu(graph, k=1))
    weights = graph[heads, tails]
    sample_p = weights / weights.max()
    for epoch in range(n_epochs):
        alpha = 1.0 * (1.0 - epoch / n_epochs)
        live = rng.random(heads.size) < sample_p
        h, t = heads[live], tails[live]

        delta = y[h] - y[t]
        d2 = np.square(delta).sum(axis=1)
        coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2 ** b)
        coeff[d2 == 0.0] = 0.0
        grad = np.clip(coeff[:, None] * delta, -GRAD_CLIP, GRAD_CLIP)
        np.add.at(y, h, alpha * grad)
        np.add.at(y, t, -alpha * grad)

        for _ in range(NEGATIVE_SAMPLES):
            k = rng.integers(0, n, size=h.size)
            delta = y[h] - y[k]
            d2 = np.square(delta).sum(axis=1)
            coeff = (2.0 * b) / ((REPULSION_EPS + d2) * (1.0 + a * d2 ** b))
            coeff[h == k] = 0.0
            grad = np.clip(coeff[:, None] * delta, -GRAD_CLIP, GRAD_CLIP)
            np.add.at(y, h, alpha * grad)
    return y
