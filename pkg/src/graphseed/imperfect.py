"""Imperfect reconstruction: too few seeding values, or noisy injections.

Everything here is expressed through the K x (N*tau) reconstruction
operator Phi_K = diag(h_hat_K) [Theta (I kron Psi)]_K, whose columns are
indexed by the slot convention of :mod:`graphseed.seeding`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import BudgetTooSmall, RankDeficient
from .filters import FilterDesign, design_lowpass_kernel
from .seeding import SelectionPattern, seeding_operator, theta_psi
from .spectral import SpectralBasis, vandermonde

EXHAUSTIVE_LIMIT = 10**6


@dataclass(frozen=True)
class ReconstructionOperator:
    Phi: np.ndarray  # K x (n * tau)
    basis: SpectralBasis
    filter: FilterDesign
    K: int
    tau: int

    @classmethod
    def build(cls, basis, K, tau=1, filt=None):
        filt = design_lowpass_kernel(basis, K) if filt is None else filt
        Phi = filt.response[:K, None] * theta_psi(basis, tau)[:K]
        Phi.setflags(write=False)
        return cls(Phi, basis, filt, K, tau)

    @property
    def n(self):
        return self.basis.n

    @property
    def V_K(self):
        return self.basis.V[:, :self.K]

    @property
    def n_slots(self):
        return self.Phi.shape[1]

    def columns(self, pattern: SelectionPattern):
        """Phi_K C^T for a pattern with the operator's tau."""
        if pattern.tau != self.tau:
            raise ValueError(f"pattern tau {pattern.tau} != operator tau {self.tau}")
        pattern.check_nodes(self.n)
        return self.Phi[:, pattern.slots()]

    def dictionary(self):
        """V_K Phi_K: node-domain output per unit injection in each slot."""
        return self.V_K @ self.Phi


class NoiseKind(str, enum.Enum):
    CONSTANT_SNR = "constant_snr"
    PER_INJECTION_SNR = "per_injection_snr"
    FIXED_POWER = "fixed_power"


@dataclass(frozen=True)
class NoiseModel:
    """Additive injection noise.

    constant_snr: R_w = sigma^2 ||s||^2 I (or sigma^2 E||s||^2 I when only the
    expected seeding energy is known). per_injection_snr: each value keeps
    its own SNR, R_w = sigma^2 diag(|s_i|^2). fixed_power: R_w = sigma^2 I.
    """

    kind: NoiseKind
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def variances(self, values=None, expected_energy=None, P=None):
        """Per-slot noise variances (the diagonal of R_w)."""
        if values is not None:
            values = np.asarray(values)
            P = values.shape[0]
        if P is None:
            raise ValueError("need values or P")
        if self.kind is NoiseKind.FIXED_POWER:
            return np.full(P, self.sigma**2)
        if self.kind is NoiseKind.PER_INJECTION_SNR:
            if values is None:
                raise ValueError("per-injection SNR noise needs the seeding values")
            return self.sigma**2 * np.abs(values) ** 2
        if values is not None and expected_energy is None:
            expected_energy = float(np.sum(np.abs(values) ** 2))
        if expected_energy is None:
            raise ValueError("constant-SNR noise needs the seeding energy")
        return np.full(P, self.sigma**2 * expected_energy)

    def covariance(self, values=None, expected_energy=None, P=None):
        return np.diag(self.variances(values, expected_energy, P))

    def sample(self, rng, values, size=None, complex_noise=False):
        """Noise draws with shape values.shape (+ (size,) if given)."""
        values = np.asarray(values)
        std = np.sqrt(self.variances(values))
        shape = values.shape + (() if size is None else (size,))
        if complex_noise:
            w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
        else:
            w = rng.standard_normal(shape)
        return std.reshape(std.shape + (1,) * (len(shape) - 1)) * w


class Method(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    GREEDY = "greedy_forward"
    L1 = "l1_relaxed"
    SEPARABLE = "separable"
    RELAXED = "relaxed"

    @classmethod
    def _missing_(cls, value):
        aliases = {"greedy": cls.GREEDY, "l1": cls.L1}
        return aliases.get(value)


@dataclass
class SelectionResult:
    pattern: SelectionPattern
    objective_value: float
    method: Method
    candidates_evaluated: int = 0
    values: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)


def _check_full_column_rank(A, rows, rtol=1e-9, floor=1e-12):
    """Rank test after dividing by the operator's row norms ``rows``.

    Row scaling keeps the rank, and using the rows of the whole operator
    (not of the selected columns) keeps roundoff-level columns negligible.
    """
    if A.shape[1] == 0:
        return
    rows = np.where(rows == 0, 1.0, rows)
    s = np.linalg.svd(A / rows[:, None], compute_uv=False)
    if A.shape[1] > A.shape[0] or s[-1] <= max(rtol * s[0], floor):
        raise RankDeficient("operator restricted to the pattern lacks full column rank",
                            singular_values=s.tolist())


def ls_seed_values(op: ReconstructionOperator, pattern: SelectionPattern, y):
    """Least-squares seeding values for fixed filter and locations.

    Minimizes ||y - V_K Phi_K C^T s||. Returns (values, error_energy). With a
    unitary basis this is (C Phi^H Phi C^T)^-1 C Phi^H V_K^H y; otherwise the
    weighting by V_K is kept, so the energy is always the realized one.
    """
    y = np.asarray(y, dtype=complex)
    A = op.V_K @ op.columns(pattern)
    _check_full_column_rank(op.columns(pattern), np.linalg.norm(op.Phi, axis=1))
    if pattern.P == 0:
        return np.zeros(0, dtype=complex), float(np.vdot(y, y).real)
    if op.basis.is_unitary:
        PhiC = op.columns(pattern)
        rhs = PhiC.conj().T @ (op.V_K.conj().T @ y)
        values = np.linalg.solve(PhiC.conj().T @ PhiC, rhs)
    else:
        values = np.linalg.lstsq(A, y, rcond=None)[0]
    return values, error_energy(op, pattern, y)


def error_energy(op: ReconstructionOperator, pattern: SelectionPattern, y) -> float:
    """Closed-form residual energy y^H (I - A (A^H A)^-1 A^H) y, A = V_K Phi_K C^T.

    For a unitary basis and bandlimited y this is the frequency-domain
    expression y^H V_K (I - Phi_C (Phi_C^H Phi_C)^-1 Phi_C^H) V_K^H y.
    """
    y = np.asarray(y, dtype=complex)
    if pattern.P == 0:
        return float(np.vdot(y, y).real)
    A = op.V_K @ op.columns(pattern)
    G = A.conj().T @ A
    b = A.conj().T @ y
    return float((np.vdot(y, y) - np.vdot(b, np.linalg.solve(G, b))).real)


@dataclass
class JointResult:
    values: np.ndarray
    h: np.ndarray
    error: float
    history: list
    converged: bool


def joint_seed_filter(basis, pattern: SelectionPattern, y, K=None, max_iters=200, tol=1e-10,
                      h0=None) -> JointResult:
    """Alternating least squares over seeding values and filter coefficients.

    Objective ||y - V diag(Psi h) G s||^2 with G the seeding operator of the
    pattern. Starts from ``h0`` (default: the kernel low-pass filter of
    bandwidth K) and alternates exact LS steps, so the objective is
    monotone non-increasing. Returns the best iterate.
    """
    if pattern.P == 0:
        raise ValueError("pattern is empty")
    y = np.asarray(y, dtype=complex)
    if h0 is None:
        if K is None:
            raise ValueError("need K or h0")
        h0 = design_lowpass_kernel(basis, K).coeffs
    h = np.array(h0, dtype=complex)
    G = seeding_operator(basis, pattern)
    Psi = vandermonde(basis.eigenvalues, h.size)
    V = basis.V

    def objective(h, s):
        r = y - V @ ((Psi @ h) * (G @ s))
        return float(np.vdot(r, r).real)

    history = []
    best = None
    converged = False
    for it in range(max_iters):
        A_s = V @ ((Psi @ h)[:, None] * G)
        s = np.linalg.lstsq(A_s, y, rcond=None)[0]
        A_h = V @ ((G @ s)[:, None] * Psi)
        h_new = np.linalg.lstsq(A_h, y, rcond=None)[0]
        # keep h only if it does not increase the objective (LS guarantees
        # this up to rounding)
        f_s = objective(h, s)
        f_h = objective(h_new, s)
        if f_h <= f_s:
            h = h_new
        f = min(f_s, f_h)
        history.append(f)
        if best is None or f <= best[0]:
            best = (f, s.copy(), h.copy())
        if len(history) > 1:
            prev = history[-2]
            if prev - f <= tol * max(prev, np.finfo(float).tiny) or f <= 1e-30:
                converged = True
                break
        elif f <= 1e-30:
            converged = True
            break
    f, s, h = best
    return JointResult(s, h, f, history, converged)


def _greedy_forward(A, y, gamma, max_cols=None):
    """Forward selection on columns of A by exact LS residual reduction."""
    n_cols = A.shape[1]
    max_cols = n_cols if max_cols is None else max_cols
    support = []
    resid = float(np.vdot(y, y).real)
    evaluated = 0
    while len(support) < max_cols:
        best = None
        for j in range(n_cols):
            if j in support:
                continue
            cols = A[:, support + [j]]
            evaluated += 1
            coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
            r = y - cols @ coef
            e = float(np.vdot(r, r).real)
            if best is None or e < best[0] - 1e-15 * resid:
                best = (e, j)
        if best is None or resid - best[0] <= gamma or resid - best[0] <= 1e-14 * np.vdot(y, y).real:
            break
        resid, j = best
        support.append(j)
    return support, resid, evaluated


def _soft(x, thr):
    mag = np.abs(x)
    return np.where(mag > thr, (1 - thr / np.maximum(mag, 1e-300)) * x, 0)


def _ista(A, y, gamma, max_iters=10**4, tol=1e-12):
    """min ||y - A d||^2 + gamma ||d||_1 by iterative soft thresholding."""
    L = np.linalg.norm(A, 2) ** 2
    if L == 0:
        return np.zeros(A.shape[1], dtype=complex), 0
    step = 1.0 / L
    d = np.zeros(A.shape[1], dtype=complex)
    for it in range(max_iters):
        # gradient of 0.5||y - Ad||^2; threshold gamma/2 matches the scaled objective
        g = A.conj().T @ (A @ d - y)
        d_new = _soft(d - step * g, step * gamma / 2)
        if np.linalg.norm(d_new - d) <= tol * max(np.linalg.norm(d), 1e-300):
            d = d_new
            break
        d = d_new
    return d, it + 1


def sparse_location_design(op: ReconstructionOperator, y, gamma: float, method="greedy",
                           max_cols=None) -> SelectionResult:
    """Jointly pick seeding slots and values, each slot costing ``gamma``.

    Objective ||y - V_K Phi_K d||^2 + gamma ||d||_0. ``greedy`` adds the slot
    with the largest residual reduction while it exceeds gamma; ``l1``
    solves the 1-norm relaxation and re-fits the values on its support.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    method = Method(method)
    y = np.asarray(y, dtype=complex)
    A = op.dictionary()
    if method is Method.GREEDY:
        support, resid, evaluated = _greedy_forward(A, y, gamma, max_cols)
        info = {}
    elif method is Method.L1:
        d, iters = _ista(A, y, gamma)
        mag = np.abs(d)
        support = [int(j) for j in np.flatnonzero(mag > 1e-10 * max(mag.max(), 1e-300))]
        evaluated = iters
        info = {"iterations": iters}
    else:
        raise ValueError(f"unsupported method {method}")
    support = sorted(support)
    if support:
        coef, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
        r = y - A[:, support] @ coef
        resid = float(np.vdot(r, r).real)
    else:
        coef = np.zeros(0, dtype=complex)
        resid = float(np.vdot(y, y).real)
    pattern = SelectionPattern.from_slots(support, op.tau)
    info["residual"] = resid
    return SelectionResult(pattern, resid + gamma * len(support), method, evaluated, coef, info)


def error_covariance(op: ReconstructionOperator, pattern: SelectionPattern, noise: NoiseModel,
                     values=None):
    """Covariance of the reconstruction error due to injection noise, and its trace.

    Under constant SNR the noise power uses ||values||^2 when values are
    given, else the expected energy ||pinv(Phi_C)||_F^2 of the least-squares
    values for unit-covariance active coefficients.
    """
    PhiC = op.columns(pattern)
    expected = None
    if noise.kind is NoiseKind.CONSTANT_SNR and values is None:
        expected = float(np.linalg.norm(np.linalg.pinv(PhiC)) ** 2)
    var = noise.variances(values, expected, P=pattern.P)
    B = op.V_K @ PhiC
    R = (B * var) @ B.conj().T
    return R, float(np.trace(R).real)


def _gram(Phi, slots):
    C = Phi[:, list(slots)]
    return C @ C.conj().T


def constant_snr_objective(Phi, slots, rtol=1e-12) -> float:
    """trace(M^-1) trace(M), M = Phi_C Phi_C^H; +inf when M is singular."""
    M = _gram(Phi, slots)
    ev = np.linalg.eigvalsh(M)
    if ev.size == 0 or ev[0] <= rtol * max(ev[-1], 0.0) or ev[-1] <= 0:
        return math.inf
    return float(np.sum(1.0 / ev) * np.sum(ev))


def fixed_noise_objective(Phi, slots) -> float:
    """trace(Phi_C Phi_C^H), the sum of selected squared column norms."""
    cols = Phi[:, list(slots)]
    return float(np.sum(np.abs(cols) ** 2))


def _exhaustive(n_slots, P, score, limit, candidates=None):
    pool = range(n_slots) if candidates is None else candidates
    total = math.comb(len(pool), P)
    if total > limit:
        raise ValueError(f"{total} candidate patterns exceed the exhaustive limit {limit}")
    best = (math.inf, None)
    scores = {}
    for combo in itertools.combinations(pool, P):
        v = score(combo)
        scores[combo] = v
        if v < best[0]:
            best = (v, combo)
    return best, total, scores


def _greedy_constant_snr(Phi, P):
    """Add columns one at a time; before K columns the Gram is ridge-regularized."""
    K, n_slots = Phi.shape
    ridge = 1e-6 * float(np.sum(np.abs(Phi) ** 2)) / max(K, 1)
    chosen = []
    evaluated = 0
    for _ in range(P):
        best = (math.inf, None)
        for j in range(n_slots):
            if j in chosen:
                continue
            evaluated += 1
            trial = chosen + [j]
            if len(trial) >= K:
                v = constant_snr_objective(Phi, trial)
            else:
                M = _gram(Phi, trial) + ridge * np.eye(K)
                ev = np.linalg.eigvalsh(M)
                v = float(np.sum(1.0 / ev) * np.sum(ev))
            if v < best[0]:
                best = (v, j)
        if best[1] is None:
            # every extension is singular; fall back to the strongest column
            rest = [j for j in range(n_slots) if j not in chosen]
            best = (math.inf, max(rest, key=lambda j: np.linalg.norm(Phi[:, j])))
        chosen.append(best[1])
    return chosen, evaluated


def select_constant_snr(op: ReconstructionOperator, P: int, strategy="exhaustive",
                        limit=EXHAUSTIVE_LIMIT, candidates=None) -> SelectionResult:
    """Slots minimizing the constant-SNR MSE criterion.

    ``candidates`` restricts the searchable slots (e.g. only final-time
    slots for single-instant seeding).
    """
    if P < op.K:
        raise BudgetTooSmall(f"P={P} < K={op.K}: the criterion needs an invertible Gram")
    strategy = Method(strategy)
    Phi = op.Phi
    if candidates is not None:
        candidates = list(candidates)
    if strategy is Method.EXHAUSTIVE:
        (v, combo), total, scores = _exhaustive(op.n_slots, P,
                                                lambda c: constant_snr_objective(Phi, c),
                                                limit, candidates)
        info = {"scores": scores}
        slots = list(combo) if combo is not None else []
    elif strategy is Method.GREEDY:
        sub = Phi if candidates is None else Phi[:, candidates]
        chosen, total = _greedy_constant_snr(sub, P)
        slots = chosen if candidates is None else [candidates[j] for j in chosen]
        v = constant_snr_objective(Phi, slots)
        info = {}
    else:
        raise ValueError(f"unsupported strategy {strategy}")
    info["singular"] = math.isinf(v)
    return SelectionResult(SelectionPattern.from_slots(slots, op.tau), v, strategy, total, info=info)


def select_fixed_noise(op: ReconstructionOperator, P: int, strategy="separable",
                       limit=EXHAUSTIVE_LIMIT, candidates=None) -> SelectionResult:
    """Slots minimizing trace(Phi diag(c) Phi^H) under fixed-power noise.

    The objective is separable, so ``separable`` (the P weakest columns) is
    exact. ``relaxed`` solves the box-relaxed linear program and
    ``exhaustive`` enumerates, both for cross-checking.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    strategy = Method(strategy)
    Phi = op.Phi
    pool = list(range(op.n_slots)) if candidates is None else list(candidates)
    weights = np.sum(np.abs(Phi[:, pool]) ** 2, axis=0)
    if strategy is Method.SEPARABLE:
        order = np.argsort(weights, kind="stable")[:P]
        slots = [pool[j] for j in order]
        total = len(pool)
    elif strategy is Method.RELAXED:
        res = linprog(weights, A_eq=np.ones((1, len(pool))), b_eq=[P],
                      bounds=[(0, 1)] * len(pool), method="highs")
        order = np.argsort(-res.x, kind="stable")[:P]
        slots = [pool[j] for j in order]
        total = len(pool)
    elif strategy is Method.EXHAUSTIVE:
        (_, combo), total, _ = _exhaustive(op.n_slots, P, lambda c: fixed_noise_objective(Phi, c),
                                           limit, pool)
        slots = list(combo)
    else:
        raise ValueError(f"unsupported strategy {strategy}")
    slots = sorted(slots)
    v = fixed_noise_objective(Phi, slots)
    rank = np.linalg.matrix_rank(Phi[:, slots]) if slots else 0
    return SelectionResult(SelectionPattern.from_slots(slots, op.tau), v, strategy, total,
                           info={"rank": int(rank), "can_reconstruct": bool(rank >= op.K)})
