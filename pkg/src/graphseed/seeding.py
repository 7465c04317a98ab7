"""Seeding-phase simulation and the exact reconstruction designers.

Vectorization convention for node-time seeding values: the vector over all
N*tau (node, time) slots is node-major and, within a node, ordered by
descending time, so slot index = node * tau + (tau - 1 - time). A value
injected at time t is shifted tau - 1 - t times before the seeding phase
ends, so column ``node * tau + j`` of the frequency-domain seeding operator
is e_hat(node) * lambda**j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ConditionViolation,
    DegenerateSpectrum,
    Infeasible,
    NodeCannotExpress,
    RankDeficient,
)
from .filters import (
    FilterDesign,
    apply_filter_polynomial,
    apply_filter_product,
    design_annihilating_product,
    design_lowpass_kernel,
)
from .spectral import (
    SpectralBasis,
    _frozen,
    collisions,
    distinct_groups,
    distinct_tol,
    gft,
    imag_residue,
    spectrum_census,
)

SCHEMES = ("mnst", "snmt", "mnmt")


@dataclass(frozen=True)
class SelectionPattern:
    """Which (node, time) slots inject values; row order of the selection matrix."""

    tau: int
    pairs: tuple

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        pairs = tuple((int(i), int(t)) for i, t in self.pairs)
        if len(set(pairs)) != len(pairs):
            raise ValueError("selection pattern repeats a (node, time) pair")
        for i, t in pairs:
            if i < 0 or not 0 <= t < self.tau:
                raise ValueError(f"pair ({i}, {t}) outside node range or [0, {self.tau})")
        object.__setattr__(self, "pairs", pairs)

    @property
    def P(self):
        return len(self.pairs)

    @property
    def nodes(self):
        return sorted({i for i, _ in self.pairs})

    @classmethod
    def mnst(cls, nodes, tau=1):
        """All nodes inject once, at the last seeding instant."""
        return cls(tau, tuple((i, tau - 1) for i in nodes))

    @classmethod
    def snmt(cls, node, P):
        """One node injecting at times P-1, ..., 0 (values ordered that way)."""
        return cls(P, tuple((node, t) for t in range(P - 1, -1, -1)))

    @classmethod
    def grid(cls, nodes, times, tau=None):
        tau = max(times) + 1 if tau is None else tau
        return cls(tau, tuple((i, t) for i in nodes for t in sorted(times, reverse=True)))

    @classmethod
    def from_slots(cls, slots, tau):
        return cls(tau, tuple((int(c) // tau, tau - 1 - int(c) % tau) for c in slots))

    def slots(self) -> np.ndarray:
        return np.array([i * self.tau + (self.tau - 1 - t) for i, t in self.pairs], dtype=int)

    def check_nodes(self, n):
        bad = [i for i, _ in self.pairs if i >= n]
        if bad:
            raise ValueError(f"nodes {bad} outside [0, {n})")

    def matrix(self, n) -> np.ndarray:
        """Binary P x (n*tau) selection matrix."""
        self.check_nodes(n)
        C = np.zeros((self.P, n * self.tau))
        C[np.arange(self.P), self.slots()] = 1.0
        return C


@dataclass(frozen=True)
class SeedingSchedule:
    pattern: SelectionPattern
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = _frozen(np.asarray(self.values, dtype=complex))
        if values.shape[0] != self.pattern.P:
            raise ValueError(f"{values.shape[0]} values for {self.pattern.P} slots")
        object.__setattr__(self, "values", values)

    @property
    def tau(self):
        return self.pattern.tau

    def injections(self):
        return [(i, t, complex(v)) for (i, t), v in zip(self.pattern.pairs, self.values)]


@dataclass(frozen=True)
class ReconstructionPlan:
    schedule: SeedingSchedule
    filter: FilterDesign
    K: int
    scheme: str = "mnmt"
    diagnostics: dict = field(default_factory=dict, compare=False)


@dataclass
class ReconstructionReport:
    z: np.ndarray
    relative_error: float
    per_frequency_residual: Optional[np.ndarray]
    feasibility: dict
    cond_numbers: dict
    imag_residue: float = 0.0
    trace: Optional[list] = None


def simulate_seeding(shift, schedule: SeedingSchedule, x_init=None, record=False):
    """Run x(t) = S x(t-1) + s(t) for t = 0..tau-1 and return x(tau-1).

    ``x_init`` is a signal already on the graph when seeding starts; it is
    present at t = 0 alongside s(0). Values may carry a trailing batch axis.
    """
    S = np.asarray(getattr(shift, "matrix", shift))
    n = S.shape[0]
    schedule.pattern.check_nodes(n)
    vals = schedule.values
    x = np.zeros((n,) + vals.shape[1:], dtype=complex)
    if x_init is not None:
        x = x + np.asarray(x_init, dtype=complex).reshape((n,) + (1,) * (vals.ndim - 1))
    snapshots = []
    by_time = {}
    for j, (i, t) in enumerate(schedule.pattern.pairs):
        by_time.setdefault(t, []).append((i, j))
    for t in range(schedule.tau):
        if t > 0:
            x = S @ x
        for i, j in by_time.get(t, ()):
            x[i] = x[i] + vals[j]
        if record:
            snapshots.append(x.copy())
    return (x, snapshots) if record else x


def seeding_operator(basis: SpectralBasis, pattern: SelectionPattern) -> np.ndarray:
    """N x P matrix mapping selected seeding values to x_hat.

    Built column by column; the full N x (N*tau) operator is never formed.
    """
    pattern.check_nodes(basis.n)
    lam = basis.eigenvalues
    cols = [basis.Vinv[:, i] * lam ** (pattern.tau - 1 - t) for i, t in pattern.pairs]
    if not cols:
        return np.zeros((basis.n, 0), dtype=complex)
    return np.stack(cols, axis=1)


def theta_psi(basis: SpectralBasis, tau: int) -> np.ndarray:
    """Full N x (N*tau) frequency-domain seeding operator, assembled blockwise."""
    n = basis.n
    powers = np.vander(basis.eigenvalues, tau, increasing=True)
    out = np.empty((n, n * tau), dtype=complex)
    for i in range(n):
        out[:, i * tau:(i + 1) * tau] = basis.Vinv[:, i:i + 1] * powers
    return out


def _rank(M, rtol):
    if M.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0, s


def _check_condition_i(basis, K, filt):
    if filt is None:
        clash = collisions(basis, K, basis.tol)
        if clash:
            raise ConditionViolation("active and inactive eigenvalues coincide", pairs=clash)
        return design_lowpass_kernel(basis, K)
    hK = filt.response[:K]
    if np.any(np.abs(hK) <= basis.tol.annihilate * np.abs(filt.response).max()):
        raise ConditionViolation("filter response vanishes on an active frequency")
    return filt


def _solve_active(G_K, hK, yK, rtol):
    """Solve diag(hK) G_K s = yK; minimum-norm when underdetermined."""
    K, P = G_K.shape
    if P < K:
        raise RankDeficient(f"{P} seeding values cannot reach {K} frequencies", P=P, K=K)
    rank, s = _rank(G_K, rtol)
    if rank < K:
        raise RankDeficient(
            f"seeding matrix has rank {rank} < K={K}", singular_values=s.tolist()
        )
    rhs = np.asarray(yK, dtype=complex) / hK
    if P == K:
        values = np.linalg.solve(G_K, rhs)
    else:
        values = np.linalg.lstsq(G_K, rhs, rcond=None)[0]
    cond = float(s[0] / s[K - 1])
    return values, {"cond": cond, "singular_values": s.tolist()}


def mnst_design(basis, K, seed_nodes, y_hat_K, filt=None) -> SeedingSchedule:
    """Single-instant injection at ``seed_nodes`` (tau = 1)."""
    filt = _check_condition_i(basis, K, filt)
    pattern = SelectionPattern.mnst(seed_nodes)
    pattern.check_nodes(basis.n)
    G_K = basis.Vinv[:K, list(seed_nodes)]
    values, diag = _solve_active(G_K, filt.response[:K], y_hat_K, basis.tol.rank)
    return SeedingSchedule(pattern, values, diag)


def snmt_design(basis, K, seed_node, y_hat_K, P=None, filt=None) -> SeedingSchedule:
    """P successive injections at a single node (P defaults to K)."""
    P = K if P is None else P
    census = spectrum_census(basis, K, node=seed_node)
    if census.U1:
        raise NodeCannotExpress(
            f"node {seed_node} does not express frequencies {list(census.inexpressible)}",
            frequencies=list(census.inexpressible),
        )
    if census.D1:
        raise DegenerateSpectrum(f"{census.D1} repeated active eigenvalue(s)", D1=census.D1)
    filt = _check_condition_i(basis, K, filt)
    pattern = SelectionPattern.snmt(seed_node, P)
    G_K = seeding_operator(basis, pattern)[:K]
    values, diag = _solve_active(G_K, filt.response[:K], y_hat_K, basis.tol.rank)
    return SeedingSchedule(pattern, values, diag)


def mnmt_design(basis, K, pattern: SelectionPattern, y_hat_K, filt=None) -> SeedingSchedule:
    filt = _check_condition_i(basis, K, filt)
    G_K = seeding_operator(basis, pattern)[:K]
    values, diag = _solve_active(G_K, filt.response[:K], y_hat_K, basis.tol.rank)
    return SeedingSchedule(pattern, values, diag)


def pattern_for(scheme, locations, P=None):
    """Selection pattern for a scheme; ``locations`` is nodes, a node or a pattern."""
    if scheme == "mnst":
        return SelectionPattern.mnst(list(locations))
    if scheme == "snmt":
        node = locations if np.isscalar(locations) else list(locations)[0]
        return SelectionPattern.snmt(int(node), P)
    if scheme == "mnmt":
        if isinstance(locations, SelectionPattern):
            return locations
        return SelectionPattern(max(t for _, t in locations) + 1, tuple(locations))
    raise ValueError(f"unknown scheme {scheme!r}")


def design_exact(basis, K, scheme, locations, y_hat_K, filt=None) -> ReconstructionPlan:
    """Dispatch to the designer for ``scheme`` with the kernel low-pass filter."""
    filt = _check_condition_i(basis, K, filt)
    if scheme == "mnst":
        sched = mnst_design(basis, K, list(locations), y_hat_K, filt)
    elif scheme == "snmt":
        node = locations if np.isscalar(locations) else list(locations)[0]
        sched = snmt_design(basis, K, int(node), y_hat_K, filt=filt)
    elif scheme == "mnmt":
        sched = mnmt_design(basis, K, pattern_for("mnmt", locations), y_hat_K, filt)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return ReconstructionPlan(sched, filt, K, scheme, {"cond": sched.diagnostics["cond"]})


def _unit_rows(M, floor=0.0):
    """Rows scaled to unit norm; rows at or below ``floor`` become zero."""
    nrm = np.linalg.norm(M, axis=1, keepdims=True)
    small = nrm <= floor
    nrm[small] = 1.0
    return np.where(small, 0.0, M / nrm)


def degree_reduced_design(basis, K, scheme, P, locations, y_hat_K) -> ReconstructionPlan:
    """Trade extra seeding values for a lower-degree filter.

    Inactive frequencies are split between those zeroed by the seeding
    values and those annihilated by a product-form filter. Frequencies the
    pattern cannot reach (zero rows of the seeding operator) need neither,
    eigenvalue groups whose rows are proportional cost one equation, and
    inactive frequencies sharing an eigenvalue with an active one must be
    zeroed by seeding. Groups are moved to the seeding side cheapest first
    while the active equations stay solvable.
    """
    n = basis.n
    tol = basis.tol
    pattern = pattern_for(scheme, locations, P)
    if pattern.P != P:
        raise ValueError(f"pattern has {pattern.P} slots, expected P={P}")
    if P < K:
        raise Infeasible(f"P={P} < K={K}")
    G = seeding_operator(basis, pattern)
    lam = basis.eigenvalues
    atol = distinct_tol(basis, tol)
    row_norm = np.linalg.norm(G, axis=1)
    scale = row_norm.max() if row_norm.size else 0.0
    zero_row = row_norm <= tol.zero * scale

    floor = tol.zero * scale
    G_K = _unit_rows(G[:K], floor)
    rank_K, _ = _rank(G_K, tol.rank)
    if rank_K < K:
        raise Infeasible("pattern cannot express every active frequency",
                         frequencies=[int(k) for k in range(K) if zero_row[k]])

    groups = [[K + k for k in g] for g in distinct_groups(lam[K:], atol)]
    forced, optional, free = [], [], []
    for g in groups:
        live = [k for k in g if not zero_row[k]]
        if not live:
            free.append(g)
        elif any(abs(lam[g[0]] - lam[a]) <= atol for a in range(K)):
            forced.append(live)
        else:
            optional.append(live)

    def solvable(rows):
        if not rows:
            return True, 0
        R = _unit_rows(G[rows], floor)
        r_R, _ = _rank(R, tol.rank)
        r_all, _ = _rank(np.vstack([G_K, R]), tol.rank)
        return r_all - r_R == K, r_R

    zeroed = [k for g in forced for k in g]
    ok, used = solvable(zeroed)
    if not ok:
        raise Infeasible("frequencies colliding with active eigenvalues cannot be zeroed by seeding",
                         frequencies=zeroed)
    remaining = list(optional)
    while remaining:
        best = None
        for gi, g in enumerate(remaining):
            ok, r = solvable(zeroed + g)
            if ok and (best is None or r - used < best[0]):
                best = (r - used, gi, r)
        if best is None:
            break
        _, gi, used = best
        zeroed.extend(remaining.pop(gi))

    killed = sorted(g[0] for g in remaining)
    filt = design_annihilating_product(basis, killed)
    hK = filt.response[:K]
    rows = list(range(K)) + zeroed
    A = np.vstack([G[:K] * hK[:, None], G[zeroed] * filt.response[zeroed][:, None]])
    rhs = np.concatenate([np.asarray(y_hat_K, dtype=complex), np.zeros(len(zeroed))])
    values, *_ = np.linalg.lstsq(A, rhs, rcond=None)

    z_hat = filt.response * (G @ values)
    target = np.zeros(n, dtype=complex)
    target[:K] = y_hat_K
    resid = np.linalg.norm(z_hat - target)
    ref = max(np.linalg.norm(y_hat_K), np.finfo(float).tiny)
    if resid > tol.recovery * ref:
        bad = [int(k) for k in range(n) if abs(z_hat[k] - target[k]) > tol.recovery * ref]
        raise Infeasible("split system is inconsistent", frequencies=bad, residual=float(resid))
    s = np.linalg.svd(A, compute_uv=False)
    diag = {
        "degree": filt.degree,
        "zeroed_by_seeding": sorted(int(k) for k in zeroed),
        "annihilated": [int(k) for g in remaining for k in g],
        "unreachable": sorted(int(k) for g in groups for k in g if zero_row[k]),
        "cond": float(s[0] / s[min(A.shape) - 1]) if s.size and s[min(A.shape) - 1] > 0 else np.inf,
        "rows": rows,
    }
    sched = SeedingSchedule(pattern, values, {"cond": diag["cond"]})
    return ReconstructionPlan(sched, filt, K, scheme, diag)


def reconstruct(shift, plan: ReconstructionPlan, y_target, basis=None, record=False,
                form="polynomial", x_init=None, error_reference=None) -> ReconstructionReport:
    """Seeding phase followed by the filtering phase, with diagnostics.

    ``form="product"`` applies the filter factor by factor (requires known
    roots), so each recorded stage annihilates one more frequency. The
    relative error is ||z - y|| / ||y|| unless ``error_reference`` supplies
    another denominator signal (e.g. the adjusted target when an initial
    state is present).
    """
    y = np.asarray(y_target, dtype=complex)
    sim = simulate_seeding(shift, plan.schedule, x_init=x_init, record=record)
    x, seed_trace = sim if record else (sim, None)
    filt = plan.filter
    if form == "product":
        if filt.roots is None:
            raise ValueError("filter has no factored form")
        out = apply_filter_product(shift, filt.roots, filt.a0, x, record=record)
    elif form == "polynomial":
        out = apply_filter_polynomial(shift, filt.coeffs, x, record=record)
    else:
        raise ValueError(f"unknown filter form {form!r}")
    z, filt_trace = out if record else (out, None)
    ny = np.linalg.norm(y if error_reference is None else np.asarray(error_reference))
    err = np.linalg.norm(z - y)
    rel = float(err / ny) if ny > 0 else float(err)
    per_freq = None
    if basis is not None:
        per_freq = np.abs(gft(basis, z) - gft(basis, y))
    trace = None
    if record:
        trace = [("seed", t, s) for t, s in enumerate(seed_trace)]
        trace += [("filter", l, s) for l, s in enumerate(filt_trace[1:], start=1)]
    feas = {k: v for k, v in plan.diagnostics.items() if k not in ("cond",)}
    feas["recovered"] = rel <= (basis.tol.recovery if basis is not None else 1e-6)
    conds = {"seeding": plan.schedule.diagnostics.get("cond")}
    if basis is not None:
        conds["V"] = basis.cond_V
    resid = imag_residue(z) if np.all(np.isreal(y)) else 0.0
    feas["imag_residue_flag"] = resid > 1e-8
    return ReconstructionReport(z, rel, per_freq, feas, conds, resid, trace)


def adjust_for_initial_state(basis, shift, y_init, y_target, tau, filt=None):
    """Target to design for when ``y_init`` is already on the graph.

    Returns y_t - S^(tau-1) y_i. That is exact when the filtering phase is
    trivial; passing the plan's filter returns y_t - H S^(tau-1) y_i, which
    is exact for any filter.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    S = np.asarray(getattr(shift, "matrix", shift))
    carried = np.asarray(y_init, dtype=complex)
    for _ in range(tau - 1):
        carried = S @ carried
    if filt is not None:
        carried = apply_filter_polynomial(S, filt.coeffs, carried)
    return np.asarray(y_target, dtype=complex) - carried


@dataclass(frozen=True)
class IdentitySeedingCheck:
    is_diagonal: bool
    offdiag_norm: float
    diag_values: np.ndarray
    M: np.ndarray


def identity_seeding_check(basis, K, seed_nodes, eps=1e-10) -> IdentitySeedingCheck:
    """Whether seeding the target's own values could work for these nodes.

    That requires Vinv[:K, nodes] @ V[nodes, :K] to be diagonal.
    """
    nodes = list(seed_nodes)
    if len(nodes) != K:
        raise ValueError("identity seeding needs exactly K seed nodes")
    M = basis.Vinv[:K, nodes] @ basis.V[nodes, :K]
    off = M - np.diag(np.diag(M))
    off_norm = float(np.linalg.norm(off))
    return IdentitySeedingCheck(off_norm <= eps * max(np.linalg.norm(M), 1.0), off_norm,
                                np.diag(M).copy(), M)
