"""Graphs, shift operators, spectral bases and the graph Fourier transform.

All arithmetic is complex128. Eigenvalues are ordered by descending
magnitude; equal magnitudes are ordered by descending argument measured
in (-2*pi, 0], i.e. clockwise from the positive real axis, then by the
eigensolver's output index. With that convention the directed cycle gets
the classical DFT frequency order exp(-2j*pi*k/N), k = 0..N-1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NonDiagonalizable


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared across modules.

    distinct: eigenvalues a, b are equal iff |a - b| <= distinct * max|lambda|.
    zero: a spectral coefficient is zero iff |c| <= zero * ||vector||.
    rank: singular values below rank * sigma_max count as zero.
    """

    eig_residual: float = 1e-8
    eig_singular: float = 1e-12
    distinct: float = 1e-8
    zero: float = 1e-8
    rank: float = 1e-9
    annihilate: float = 1e-8
    recovery: float = 1e-6
    max_cond: float = 1e8


DEFAULT_TOL = Tolerances()


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple = ()
    directed: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        clean = []
        seen = set()
        for e in self.edges:
            if len(e) == 2:
                src, dst, w = e[0], e[1], 1.0
            else:
                src, dst, w = e
            src, dst = int(src), int(dst)
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise ValueError(f"edge ({src}, {dst}) outside [0, {self.n})")
            if not np.isfinite(w):
                raise ValueError(f"non-finite weight on edge ({src}, {dst})")
            key = (src, dst) if self.directed else tuple(sorted((src, dst)))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((src, dst, w))
        object.__setattr__(self, "edges", tuple(clean))

    def adjacency(self) -> np.ndarray:
        """A[j, i] = w for edge (i, j); symmetric when undirected."""
        A = np.zeros((self.n, self.n), dtype=complex)
        for src, dst, w in self.edges:
            A[dst, src] += w
            if not self.directed and src != dst:
                A[src, dst] += w
        return A

    def laplacian(self) -> np.ndarray:
        if self.directed:
            raise ValueError("Laplacian shifts require an undirected graph")
        A = self.adjacency()
        return np.diag(A.sum(axis=1)) - A


class ShiftKind(str, enum.Enum):
    ADJACENCY = "adjacency"
    LAPLACIAN = "laplacian"
    NORMALIZED = "normalized"  # S = I - alpha * L


@dataclass(frozen=True)
class ShiftOperator:
    matrix: np.ndarray
    kind: ShiftKind
    graph: Optional[Graph] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(np.asarray(self.matrix, dtype=complex)))
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("shift operator must be square")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("shift operator has non-finite entries")
        if self.graph is not None:
            allowed = np.abs(self.graph.adjacency()) > 0
            allowed |= np.eye(self.n, dtype=bool)
            bad = (np.abs(self.matrix) > 0) & ~allowed
            if bad.any():
                j, i = np.argwhere(bad)[0]
                raise ValueError(f"entry ({j}, {i}) nonzero but ({i}, {j}) is not an edge")

    @property
    def n(self):
        return self.matrix.shape[0]

    def __matmul__(self, x):
        return self.matrix @ x


def build_shift(graph: Graph, kind="adjacency", alpha=None) -> ShiftOperator:
    kind = ShiftKind(kind)
    if kind is ShiftKind.ADJACENCY:
        return ShiftOperator(graph.adjacency(), kind, graph)
    L = graph.laplacian()
    if kind is ShiftKind.LAPLACIAN:
        return ShiftOperator(L, kind, graph)
    if alpha is None:
        lmax = np.linalg.eigvalsh(L).max() if graph.n else 0.0
        if lmax <= 0:
            raise ValueError("alpha = 1/lambda_max(L) undefined for an edgeless graph")
        alpha = 1.0 / lmax
    return ShiftOperator(np.eye(graph.n) - alpha * L, kind, graph, float(alpha))


def _clockwise_angle(z, atol):
    z = np.where(np.abs(z.imag) <= atol, z.real + 0j, z)
    ang = np.mod(-np.angle(z), 2 * np.pi)
    # -0.0 angles from tiny negative imaginary parts land near 2*pi
    return np.where(ang >= 2 * np.pi - 1e-15, 0.0, ang)


def frequency_order(eigvals, distinct=DEFAULT_TOL.distinct) -> np.ndarray:
    """Permutation sorting eigenvalues into canonical frequency order."""
    lam = np.asarray(eigvals, dtype=complex)
    n = lam.size
    if n == 0:
        return np.arange(0)
    mag = np.abs(lam)
    atol = distinct * mag.max()
    cw = _clockwise_angle(lam, atol)
    by_mag = sorted(range(n), key=lambda i: (-mag[i], i))
    order = []
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and mag[by_mag[start]] - mag[by_mag[stop]] <= atol:
            stop += 1
        group = sorted(by_mag[start:stop], key=lambda i: (cw[i], i))
        # near-identical angles are the same eigenvalue; keep solver order
        r = mag[by_mag[start]]
        ang_tol = atol / r if r > 0 else np.inf
        g = 0
        while g < len(group):
            h = g + 1
            while h < len(group) and cw[group[h]] - cw[group[g]] <= ang_tol:
                h += 1
            order.extend(sorted(group[g:h]))
            g = h
        start = stop
    return np.array(order, dtype=int)


def _normalize_columns(V):
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    for c in range(V.shape[1]):
        col = V[:, c]
        mag = np.abs(col)
        pivot = int(np.argmax(mag >= (1 - 1e-8) * mag.max()))
        V[:, c] = col * (np.conj(col[pivot]) / mag[pivot])
    return V


@dataclass(frozen=True)
class SpectralBasis:
    V: np.ndarray
    eigenvalues: np.ndarray
    Vinv: np.ndarray
    cond_V: float
    hermitian: bool = False
    tol: Tolerances = field(default=DEFAULT_TOL, compare=False)

    def __post_init__(self):
        for name in ("V", "eigenvalues", "Vinv"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=complex)))

    @property
    def n(self):
        return self.eigenvalues.size

    @property
    def is_unitary(self):
        return bool(np.linalg.norm(self.V.conj().T @ self.V - np.eye(self.n)) <= 1e-10 * max(self.n, 1))

    def e_hat(self, node):
        """Frequency representation of the canonical vector at ``node``."""
        return self.Vinv[:, node]

    def magnitude_tie_at(self, K):
        """True when |lambda_K| == |lambda_{K+1}| within tolerance (1-indexed)."""
        if not 1 <= K < self.n:
            return False
        mag = np.abs(self.eigenvalues)
        return bool(abs(mag[K - 1] - mag[K]) <= self.tol.distinct * mag.max())


def decompose(shift, tol: Tolerances = DEFAULT_TOL) -> SpectralBasis:
    """Eigendecomposition S = V diag(lambda) V^{-1} in canonical order.

    Raises NonDiagonalizable when V is numerically singular or the
    reconstruction residual exceeds ``tol.eig_residual * ||S||_F``.
    """
    S = np.asarray(getattr(shift, "matrix", shift), dtype=complex)
    if not np.all(np.isfinite(S)):
        raise ValueError("shift has non-finite entries")
    n = S.shape[0]
    hermitian = bool(np.array_equal(S, S.conj().T))
    if hermitian:
        lam, V = np.linalg.eigh(S)
        lam = lam.astype(complex)
    else:
        lam, V = np.linalg.eig(S)
    perm = frequency_order(lam, tol.distinct)
    lam = lam[perm]
    V = _normalize_columns(V[:, perm].astype(complex))

    sv = np.linalg.svd(V, compute_uv=False)
    if n and sv[-1] < tol.eig_singular * sv[0]:
        raise NonDiagonalizable(
            "eigenvector matrix is numerically singular",
            sigma_min=float(sv[-1]), sigma_max=float(sv[0]),
        )
    Vinv = V.conj().T if hermitian else np.linalg.inv(V)
    resid = np.linalg.norm(S - (V * lam) @ Vinv)
    scale = np.linalg.norm(S)
    if resid > tol.eig_residual * scale:
        raise NonDiagonalizable(
            "eigendecomposition does not reproduce the shift",
            residual=float(resid), norm=float(scale),
        )
    cond = float(sv[0] / sv[-1]) if n else 1.0
    return SpectralBasis(V, lam, Vinv, cond, hermitian, tol)


def vandermonde(eigenvalues, cols: int) -> np.ndarray:
    """Matrix with entry (i, l) = lambda_i ** l, l = 0..cols-1."""
    if cols < 1:
        raise ValueError("cols must be >= 1")
    return np.vander(np.asarray(eigenvalues, dtype=complex), cols, increasing=True)


def gft(basis: SpectralBasis, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != basis.n:
        raise ValueError(f"signal length {x.shape[0]} != {basis.n}")
    return basis.Vinv @ x


def igft(basis: SpectralBasis, x_hat) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=complex)
    if x_hat.shape[0] != basis.n:
        raise ValueError(f"coefficient length {x_hat.shape[0]} != {basis.n}")
    return basis.V @ x_hat


def is_bandlimited(basis, x, K, eps=1e-8):
    xh = gft(basis, x)
    return bool(np.all(np.abs(xh[K:]) <= eps * np.linalg.norm(xh)))


def distinct_groups(values, tol_abs) -> list:
    """Greedy clustering of values into groups of mutually tol-close entries.

    Returns lists of positions, each ordered ascending, groups ordered by
    their first position.
    """
    values = np.asarray(values, dtype=complex)
    groups = []
    for i, v in enumerate(values):
        for g in groups:
            if abs(values[g[0]] - v) <= tol_abs:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def distinct_tol(basis_or_eigs, tol=DEFAULT_TOL):
    lam = getattr(basis_or_eigs, "eigenvalues", basis_or_eigs)
    lam = np.asarray(lam)
    return tol.distinct * (np.abs(lam).max() if lam.size else 0.0)


def count_distinct(values, tol_abs) -> int:
    return len(distinct_groups(values, tol_abs))


def collisions(basis: SpectralBasis, K: int, tol=DEFAULT_TOL):
    """Pairs (k1, k2), k1 < K <= k2 (0-indexed), with equal eigenvalues."""
    lam = basis.eigenvalues
    atol = distinct_tol(basis, tol)
    return [
        (k1, k2)
        for k1 in range(K)
        for k2 in range(K, basis.n)
        if abs(lam[k1] - lam[k2]) <= atol
    ]


@dataclass(frozen=True)
class Census:
    D: int
    D1: int
    D2: Optional[int] = None
    U1: Optional[int] = None
    U2: Optional[int] = None
    K_U: Optional[tuple] = None
    inexpressible: Optional[tuple] = None


def spectrum_census(basis: SpectralBasis, K: int, node=None, eps=None) -> Census:
    """Counts governing feasibility of the exact designs.

    D: distinct eigenvalues among the inactive frequencies K+1..N.
    D1: repeats among the active eigenvalues (K minus distinct count).
    With ``node``: U1/U2 zero entries of e_hat(node) among active/inactive
    frequencies, K_U the inactive indices it expresses (0-indexed) and D2
    the repeats among their eigenvalues.
    """
    n = basis.n
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, {n}]")
    tol = basis.tol
    eps = tol.zero if eps is None else eps
    atol = distinct_tol(basis, tol)
    lam = basis.eigenvalues
    D = count_distinct(lam[K:], atol)
    D1 = K - count_distinct(lam[:K], atol)
    if node is None:
        return Census(D, D1)
    e = basis.e_hat(node)
    zero = np.abs(e) <= eps * np.linalg.norm(e)
    U1 = int(zero[:K].sum())
    U2 = int(zero[K:].sum())
    K_U = tuple(int(k) for k in range(K, n) if not zero[k])
    D2 = len(K_U) - count_distinct(lam[list(K_U)], atol) if K_U else 0
    inexpressible = tuple(int(k) for k in range(K) if zero[k])
    return Census(D, D1, D2, U1, U2, K_U, inexpressible)


def as_signal(values, n: Optional[int] = None) -> np.ndarray:
    x = np.asarray(values, dtype=complex).reshape(-1) if np.ndim(values) <= 1 else np.asarray(values, dtype=complex)
    if n is not None and x.shape[0] != n:
        raise ValueError(f"signal length {x.shape[0]} != {n}")
    return x


def imag_residue(x) -> float:
    """Relative size of the imaginary part of a signal expected to be real."""
    x = np.asarray(x)
    nrm = np.linalg.norm(x)
    return float(np.linalg.norm(np.imag(x)) / nrm) if nrm > 0 else 0.0


def selector(indices: Sequence[int], n: int) -> np.ndarray:
    """Tall matrix whose columns are the canonical vectors at ``indices``."""
    E = np.zeros((n, len(indices)))
    E[list(indices), np.arange(len(indices))] = 1.0
    return E
