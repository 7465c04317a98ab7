"""Graph filter design and application.

A filter is a polynomial sum_l h_l S^l; its frequency response is
Psi @ h with Psi the eigenvalue Vandermonde matrix.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConditionViolation, KernelDimension
from .spectral import (
    SpectralBasis,
    _frozen,
    collisions,
    count_distinct,
    distinct_groups,
    distinct_tol,
    vandermonde,
)

COEFF_GROWTH_WARNING = 1e12


class FilterMode(str, enum.Enum):
    KERNEL_LOWPASS = "kernel_lowpass"
    PRODUCT = "product_annihilating"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class FilterDesign:
    coeffs: np.ndarray
    response: np.ndarray
    mode: FilterMode
    # factored form a0 * prod(S - root I), when known
    roots: Optional[tuple] = None
    a0: Optional[complex] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(np.asarray(self.coeffs, dtype=complex)))
        object.__setattr__(self, "response", _frozen(np.asarray(self.response, dtype=complex)))
        object.__setattr__(self, "mode", FilterMode(self.mode))

    @property
    def L(self):
        return self.coeffs.size

    @property
    def degree(self):
        return self.coeffs.size - 1


def _rotate_positive(h):
    k = int(np.argmax(np.abs(h)))
    return h * (np.conj(h[k]) / abs(h[k]))


def kernel_basis(basis: SpectralBasis, K: int, L: int) -> np.ndarray:
    """Orthonormal basis (columns) of the null space of Psi[K:, :L].

    Its dimension is L - D for L > D, D the distinct inactive eigenvalue
    count; any nonzero element gives a low-pass filter of bandwidth K.
    """
    A = vandermonde(basis.eigenvalues[K:], L)
    if A.shape[0] == 0:
        return np.eye(L, dtype=complex)
    _, s, Vh = np.linalg.svd(A)
    rank = int(np.sum(s > basis.tol.rank * s[0])) if s.size else 0
    return Vh[rank:].conj().T


def design_lowpass_kernel(basis: SpectralBasis, K: int, allow_collision=False) -> FilterDesign:
    """Minimal-degree filter annihilating every frequency with index > K.

    The coefficients are the unit-norm right singular vector of the smallest
    singular value of the (N-K) x (D+1) inactive Vandermonde block.
    """
    n = basis.n
    tol = basis.tol
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, {n}]")
    clash = collisions(basis, K, tol)
    if clash and not allow_collision:
        raise ConditionViolation(
            "active and inactive eigenvalues coincide", pairs=clash
        )
    lam = basis.eigenvalues
    if K == n:
        h = np.ones(1, dtype=complex)
        return FilterDesign(h, vandermonde(lam, 1) @ h, FilterMode.KERNEL_LOWPASS,
                            roots=(), a0=1.0 + 0j, diagnostics={"D": 0})

    atol = distinct_tol(basis, tol)
    inactive = lam[K:]
    groups = distinct_groups(inactive, atol)
    D = len(groups)
    L = D + 1
    A = vandermonde(inactive, L)
    _, s, Vh = np.linalg.svd(A)
    rank = int(np.sum(s > tol.rank * s[0]))
    if L - rank != 1:
        raise KernelDimension(
            f"numerical kernel dimension {L - rank}, expected {L - D}",
            singular_values=s.tolist(),
        )
    h = _rotate_positive(Vh[-1].conj())
    response = vandermonde(lam, L) @ h
    peak = np.abs(response).max()
    leak = np.abs(response[K:]).max()
    diag = {
        "D": D,
        "singular_values": s.tolist(),
        # ratio of the smallest retained singular value to the largest
        "singular_gap": float(s[rank - 1] / s[0]) if rank else 0.0,
        "leak": float(leak / peak),
        "passband_min": float(np.abs(response[:K]).min() / peak),
    }
    if leak > tol.annihilate * peak:
        raise KernelDimension(
            "kernel vector fails to annihilate inactive frequencies",
            **diag,
        )
    roots = tuple(complex(inactive[g[0]]) for g in groups)
    return FilterDesign(h, response, FilterMode.KERNEL_LOWPASS,
                        roots=roots, a0=complex(h[-1]), diagnostics=diag)


def poly_from_roots(roots, a0=1.0) -> np.ndarray:
    """Increasing-power coefficients of a0 * prod(z - r)."""
    h = np.array([a0], dtype=complex)
    for r in roots:
        h = np.concatenate([[0], h]) - r * np.concatenate([h, [0]])
    return h


def design_annihilating_product(basis: SpectralBasis, kill_set, a0=1.0) -> FilterDesign:
    """Filter a0 * prod (S - lambda_k I) over the distinct values in kill_set.

    Indices are 0-indexed frequency positions, factors applied in the order
    given (repeated eigenvalues collapse onto their first occurrence).
    """
    lam = basis.eigenvalues
    kill = [int(k) for k in kill_set]
    for k in kill:
        if not 0 <= k < basis.n:
            raise ValueError(f"frequency index {k} out of range")
    atol = distinct_tol(basis, basis.tol)
    roots = []
    for k in kill:
        if all(abs(lam[k] - r) > atol for r in roots):
            roots.append(complex(lam[k]))
    h = poly_from_roots(roots, a0)
    if np.abs(h).max() > COEFF_GROWTH_WARNING:
        warnings.warn(
            f"product filter coefficients reach {np.abs(h).max():.3g}; "
            "polynomial evaluation will be ill-conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    # evaluate the response in factored form, it is far better conditioned
    response = np.full(basis.n, complex(a0))
    for r in roots:
        response = response * (lam - r)
    return FilterDesign(h, response, FilterMode.PRODUCT, roots=tuple(roots),
                        a0=complex(a0), diagnostics={"kill_set": kill})


def design_explicit(basis: SpectralBasis, response) -> FilterDesign:
    """Interpolating filter with a prescribed frequency response.

    Solves the Vandermonde system on the distinct eigenvalues; the response
    must agree on repeated eigenvalues.
    """
    response = np.asarray(response, dtype=complex)
    lam = basis.eigenvalues
    groups = distinct_groups(lam, distinct_tol(basis, basis.tol))
    reps = [g[0] for g in groups]
    for g in groups:
        if not np.allclose(response[g], response[g[0]], rtol=1e-12, atol=1e-12):
            raise ConditionViolation("response differs on a repeated eigenvalue", group=g)
    Psi = vandermonde(lam[reps], len(reps))
    h = np.linalg.solve(Psi, response[reps])
    realized = vandermonde(lam, len(reps)) @ h
    return FilterDesign(h, realized, FilterMode.EXPLICIT,
                        diagnostics={"cond": float(np.linalg.cond(Psi))})


def design_ideal_lowpass(basis: SpectralBasis, K: int, gain=1.0) -> FilterDesign:
    response = np.zeros(basis.n, dtype=complex)
    response[:K] = gain
    return design_explicit(basis, response)


def apply_filter_polynomial(shift, h, x, record=False):
    """sum_l h_l S^l x using L-1 successive shifts; S^l is never formed.

    With ``record`` also returns the partial sums after each shift.
    """
    S = np.asarray(getattr(shift, "matrix", shift))
    h = np.asarray(h, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != S.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} != {S.shape[0]}")
    cur = x
    acc = h[0] * cur
    stages = [acc.copy()]
    for hl in h[1:]:
        cur = S @ cur
        acc = acc + hl * cur
        stages.append(acc.copy())
    return (acc, stages) if record else acc


def apply_filter_product(shift, roots, a0, x, record=False):
    """a0 * prod_l (S - r_l I) x applied one factor at a time."""
    S = np.asarray(getattr(shift, "matrix", shift))
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != S.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} != {S.shape[0]}")
    cur = a0 * x
    stages = [cur.copy()]
    for r in roots:
        cur = S @ cur - r * cur
        stages.append(cur.copy())
    return (cur, stages) if record else cur


def _as_work(x):
    # object arrays (e.g. mpmath numbers) pass through for extended precision
    x = np.asarray(x)
    return x if x.dtype == object else x.astype(complex)


def apply_diffusion_rate_filter(laplacian, rates, x, record=False):
    """prod_l (I - rate_l L) x, the rate-modulated diffusion form.

    Works on object arrays too, so the same code can run in extended
    precision when a long product loses accuracy in float64.
    """
    L = np.asarray(laplacian)
    x = _as_work(x)
    if x.shape[0] != L.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} != {L.shape[0]}")
    cur = x
    stages = [cur.copy()]
    for a in rates:
        cur = cur - a * (L @ cur)
        stages.append(cur.copy())
    return (cur, stages) if record else cur


def diffusion_rates_for(laplacian_eigenvalues, kill, tol_abs=0.0):
    """Rates 1/mu_k killing the Laplacian frequencies in ``kill``.

    A zero Laplacian eigenvalue cannot be annihilated this way.
    """
    mus = []
    for k in kill:
        mu = laplacian_eigenvalues[k]
        if abs(mu) <= tol_abs:
            raise ValueError(f"frequency {k} has zero Laplacian eigenvalue")
        if all(abs(mu - m) > tol_abs for m in mus):
            mus.append(mu)
    return [1.0 / m for m in mus]


def distinct_inactive(basis: SpectralBasis, K: int) -> int:
    return count_distinct(basis.eigenvalues[K:], distinct_tol(basis, basis.tol))
