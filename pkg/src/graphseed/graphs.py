"""Graph generators, the karate-club dataset and random bandlimited signals."""

from __future__ import annotations

import numpy as np

from .spectral import Graph, SpectralBasis

# Zachary's karate club friendship network: 34 members, 78 undirected ties,
# 0-indexed.
KARATE_EDGES = (
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10),
    (0, 11), (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2),
    (1, 3), (1, 7), (1, 13), (1, 17), (1, 19), (1, 21), (1, 30), (2, 3),
    (2, 7), (2, 8), (2, 9), (2, 13), (2, 27), (2, 28), (2, 32), (3, 7),
    (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16), (6, 16),
    (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33),
    (15, 32), (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33),
    (22, 32), (22, 33), (23, 25), (23, 27), (23, 29), (23, 32), (23, 33),
    (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33),
    (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32),
    (31, 33), (32, 33),
)


def gen_er(n: int, p: float, rng: np.random.Generator, directed: bool = False) -> Graph:
    """Erdos-Renyi graph: each pair (ordered if directed) kept with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability {p} outside [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    if directed:
        keep = rng.random((n, n)) < p
        np.fill_diagonal(keep, False)
        src, dst = np.nonzero(keep)
    else:
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < p
        src, dst = iu[keep], ju[keep]
    return Graph(n, [(int(i), int(j)) for i, j in zip(src, dst)], directed=directed)


def gen_cycle(n: int) -> Graph:
    """Directed cycle with edges i -> i+1 (mod n)."""
    if n < 2:
        raise ValueError("a cycle needs n >= 2")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)], directed=True)


def karate() -> Graph:
    return Graph(34, list(KARATE_EDGES), directed=False)


def random_bandlimited(basis: SpectralBasis, K: int, rng: np.random.Generator,
                       complex_coeffs=None) -> np.ndarray:
    """V_K x_hat_K with i.i.d. unit-variance active coefficients.

    Coefficients are real Gaussian when the basis is real (so the signal is
    real), circular complex Gaussian otherwise; override with
    ``complex_coeffs``.
    """
    if not 1 <= K <= basis.n:
        raise ValueError(f"K={K} outside [1, {basis.n}]")
    if complex_coeffs is None:
        complex_coeffs = not (np.all(np.isreal(basis.V)) and np.all(np.isreal(basis.eigenvalues)))
    if complex_coeffs:
        xk = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2)
    else:
        xk = rng.standard_normal(K).astype(complex)
    return basis.V[:, :K] @ xk
