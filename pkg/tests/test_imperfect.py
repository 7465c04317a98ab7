import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import spearmanr

from conftest import er_instance
from graphseed import build_shift, decompose
from graphseed.errors import BudgetTooSmall, RankDeficient
from graphseed.filters import design_ideal_lowpass
from graphseed.graphs import gen_cycle, random_bandlimited
from graphseed.imperfect import (
    Method,
    NoiseModel,
    ReconstructionOperator,
    constant_snr_objective,
    error_covariance,
    error_energy,
    fixed_noise_objective,
    joint_seed_filter,
    ls_seed_values,
    select_constant_snr,
    select_fixed_noise,
    sparse_location_design,
)
from graphseed.seeding import (
    ReconstructionPlan,
    SeedingSchedule,
    SelectionPattern,
    reconstruct,
    seeding_operator,
)
from graphseed.spectral import Graph


def cycle_op(n=8, K=4, tau=1):
    basis = decompose(build_shift(gen_cycle(n)))
    return ReconstructionOperator.build(basis, K, tau, filt=design_ideal_lowpass(basis, K))


def random_pattern(rng, n, tau, P):
    return SelectionPattern.from_slots(rng.choice(n * tau, size=P, replace=False), tau)


# ---------------------------------------------------------------- operator

def test_operator_columns_match_seeding_operator(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, tau=3, filt=filt)
    assert op.Phi.shape == (4, 30)
    pattern = random_pattern(rng, 10, 3, 5)
    expected = filt.response[:4, None] * seeding_operator(basis, pattern)[:4]
    np.testing.assert_allclose(op.columns(pattern), expected, atol=1e-12)
    with pytest.raises(ValueError):
        op.columns(SelectionPattern.mnst([0]))


# ---------------------------------------------------------------- least squares

def test_ls_square_feasible_is_exact(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    _, err = ls_seed_values(op, SelectionPattern.mnst([0, 3, 5, 7]), y)
    assert err <= 1e-10 * np.vdot(y, y).real


@given(st.integers(0, 2**31 - 1))
def test_ls_energy_matches_realized_pipeline(seed):
    shift, basis, filt, rng = er_instance(seed)
    tau = int(rng.integers(1, 3))
    op = ReconstructionOperator.build(basis, 4, tau, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    pattern = random_pattern(rng, basis.n, tau, int(rng.integers(1, 4)))
    try:
        values, err = ls_seed_values(op, pattern, y)
    except RankDeficient:
        return
    plan = ReconstructionPlan(SeedingSchedule(pattern, values), filt, 4)
    z = reconstruct(shift, plan, y).z
    realized = float(np.linalg.norm(y - z) ** 2)
    assert abs(err - realized) <= 1e-8 * max(realized, np.vdot(y, y).real * 1e-6)


def test_ls_single_seed_on_karate_is_projection():
    from graphseed.graphs import karate

    basis = decompose(build_shift(karate(), "normalized"))
    op = ReconstructionOperator.build(basis, 5, filt=design_ideal_lowpass(basis, 5))
    rng = np.random.default_rng(0)
    y = random_bandlimited(basis, 5, rng)
    pattern = SelectionPattern.mnst([33])
    _, err = ls_seed_values(op, pattern, y)
    A = op.V_K @ op.columns(pattern)
    r = y - A @ (np.linalg.pinv(A) @ y)
    np.testing.assert_allclose(err, np.vdot(r, r).real, rtol=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_ls_is_locally_optimal(seed):
    _, basis, filt, rng = er_instance(seed)
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    pattern = random_pattern(rng, basis.n, 1, 3)
    try:
        s, err = ls_seed_values(op, pattern, y)
    except RankDeficient:
        return
    A = op.V_K @ op.columns(pattern)
    for _ in range(5):
        d = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        d *= 1e-3 * np.linalg.norm(s) / np.linalg.norm(d)
        r = y - A @ (s + d)
        assert np.vdot(r, r).real >= err - 1e-12 * np.vdot(y, y).real


def test_ls_rank_deficient_pattern(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    with pytest.raises(RankDeficient):
        ls_seed_values(op, SelectionPattern.mnst(range(6)), np.ones(10))


def test_error_energy_empty_pattern(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    assert error_energy(op, SelectionPattern(1, ()), y) == pytest.approx(np.vdot(y, y).real)


# ---------------------------------------------------------------- joint design

def test_joint_exact_instance_converges(er10):
    _, basis, _, rng = er10
    y = random_bandlimited(basis, 4, rng)
    res = joint_seed_filter(basis, SelectionPattern.mnst([0, 2, 4, 6]), y, K=4)
    assert res.error <= 1e-12 * np.vdot(y, y).real


@given(st.integers(0, 2**31 - 1))
def test_joint_monotone_and_beats_fixed_filter(seed):
    _, basis, filt, rng = er_instance(seed)
    y = random_bandlimited(basis, 4, rng)
    pattern = random_pattern(rng, basis.n, 2, int(rng.integers(1, 4)))
    op = ReconstructionOperator.build(basis, 4, 2, filt=filt)
    try:
        _, ls_err = ls_seed_values(op, pattern, y)
    except RankDeficient:
        return
    res = joint_seed_filter(basis, pattern, y, K=4, max_iters=50)
    h = np.asarray(res.history)
    assert np.all(np.diff(h) <= 1e-12 * np.vdot(y, y).real)
    assert res.error <= ls_err * (1 + 1e-9) + 1e-14


def test_joint_rejects_empty_pattern(er10):
    _, basis, _, _ = er10
    with pytest.raises(ValueError):
        joint_seed_filter(basis, SelectionPattern(1, ()), np.ones(10), K=4)


# ---------------------------------------------------------------- sparse locations

def test_greedy_zero_cost_reaches_exact(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    res = sparse_location_design(op, y, 0.0, "greedy", max_cols=4)
    assert res.pattern.P <= 4
    assert res.info["residual"] <= 1e-10 * np.vdot(y, y).real


@pytest.mark.parametrize("method", ["greedy", "l1"])
def test_sparse_infinite_cost_selects_nothing(er10, method):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    res = sparse_location_design(op, y, 1e12, method)
    assert res.pattern.P == 0
    assert res.info["residual"] == pytest.approx(np.vdot(y, y).real)


def test_greedy_support_shrinks_with_cost(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, 2, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    e = np.vdot(y, y).real
    sizes = [sparse_location_design(op, y, g * e, "greedy").pattern.P
             for g in [0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 2.0]]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))
    assert sizes[0] >= 4 and sizes[-1] == 0


def test_l1_small_cost_fits_and_debiases(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    y = random_bandlimited(basis, 4, rng)
    res = sparse_location_design(op, y, 1e-6 * np.vdot(y, y).real, "l1")
    assert res.method is Method.L1
    assert res.info["residual"] <= 1e-6 * np.vdot(y, y).real
    A = op.dictionary()[:, res.pattern.slots()]
    np.testing.assert_allclose(res.values, np.linalg.lstsq(A, y, rcond=None)[0], atol=1e-8)


def test_sparse_negative_cost(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    with pytest.raises(ValueError):
        sparse_location_design(op, np.ones(10), -1.0)


# ---------------------------------------------------------------- noise

def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel("fixed_power", -1.0)
    with pytest.raises(ValueError):
        NoiseModel("per_injection_snr", 0.1).variances(P=3)
    with pytest.raises(ValueError):
        NoiseModel("constant_snr", 0.1).variances(P=3)
    np.testing.assert_allclose(NoiseModel("constant_snr", 0.5).variances([3, 4]), [6.25, 6.25])
    np.testing.assert_allclose(NoiseModel("per_injection_snr", 0.5).variances([3, 4]), [2.25, 4.0])


def test_zero_noise_zero_covariance(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    R, mse = error_covariance(op, SelectionPattern.mnst([0, 1, 2, 3]), NoiseModel("fixed_power", 0.0))
    assert mse == 0.0 and not np.any(R)


def test_fixed_power_trace_formula(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    pattern = SelectionPattern.mnst([0, 1, 2, 3, 8])
    R, mse = error_covariance(op, pattern, NoiseModel("fixed_power", 0.3))
    assert basis.is_unitary
    assert mse == pytest.approx(0.09 * fixed_noise_objective(op.Phi, pattern.slots()), rel=1e-10)
    np.testing.assert_allclose(R, R.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(R).min() >= -1e-12 * mse


@pytest.mark.parametrize("kind", ["constant_snr", "fixed_power", "per_injection_snr"])
def test_covariance_matches_monte_carlo(er10, kind):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    pattern = SelectionPattern.mnst([0, 2, 5, 7])
    values = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    noise = NoiseModel(kind, 0.05)
    _, mse = error_covariance(op, pattern, noise, values)
    w = noise.sample(rng, values, size=10**4)
    e = op.V_K @ op.columns(pattern) @ w
    assert np.mean(np.sum(np.abs(e) ** 2, axis=0)) == pytest.approx(mse, rel=0.05)


def test_expected_energy_constant_snr(er10):
    _, basis, filt, rng = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    pattern = SelectionPattern.mnst([0, 2, 5, 7])
    PhiC = op.columns(pattern)
    # unit-variance complex active coefficients -> E||s||^2 = ||PhiC^-1||_F^2
    yk = (rng.standard_normal((4, 20000)) + 1j * rng.standard_normal((4, 20000))) / np.sqrt(2)
    s = np.linalg.solve(PhiC, yk)
    _, mse = error_covariance(op, pattern, NoiseModel("constant_snr", 1.0))
    empirical = np.mean(np.sum(np.abs(s) ** 2, axis=0)) * np.sum(np.abs(PhiC) ** 2)
    assert mse == pytest.approx(empirical, rel=0.05)


# ---------------------------------------------------------------- selection

def test_cycle_uniform_patterns_are_the_minimizers():
    op = cycle_op()
    res = select_constant_snr(op, 4, "exhaustive")
    scores = res.info["scores"]
    assert len(scores) == 70
    best = min(scores.values())
    argmin = {c for c, v in scores.items() if v <= best * (1 + 1e-9)}
    assert argmin == {(0, 2, 4, 6), (1, 3, 5, 7)}
    assert best == pytest.approx(16.0, rel=1e-12)


def test_cycle_uniform_trace_value():
    op = cycle_op()
    M = op.Phi[:, [0, 2, 4, 6]] @ op.Phi[:, [0, 2, 4, 6]].conj().T
    assert abs(np.trace(M).real - 4**2 / 8) <= 1e-12


def test_cycle_single_node_objective_is_node_independent():
    op = cycle_op(tau=4)
    vals = [constant_snr_objective(op.Phi, SelectionPattern.snmt(i, 4).slots()) for i in range(8)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-10)


def test_objective_ranking_matches_monte_carlo():
    op = cycle_op()
    rng = np.random.default_rng(11)
    draws = 10**4
    yk = rng.standard_normal((4, draws)) + 1j * rng.standard_normal((4, draws))
    z = rng.standard_normal((4, draws))
    objective, empirical = [], []
    for combo in itertools.combinations(range(8), 4):
        PhiC = op.Phi[:, combo]
        s = np.linalg.solve(PhiC, yk)
        w = np.sqrt(np.sum(np.abs(s) ** 2, axis=0)) * z
        e = op.V_K @ PhiC @ w
        empirical.append(np.mean(np.sum(np.abs(e) ** 2, axis=0)))
        objective.append(constant_snr_objective(op.Phi, combo))
    assert spearmanr(objective, empirical).correlation >= 0.95


def test_greedy_never_beats_exhaustive():
    for seed in range(5):
        _, basis, filt, _ = er_instance(seed)
        op = ReconstructionOperator.build(basis, 4, filt=filt)
        ex = select_constant_snr(op, 5, "exhaustive")
        gr = select_constant_snr(op, 5, "greedy")
        assert gr.pattern.P == 5
        assert gr.objective_value >= ex.objective_value * (1 - 1e-12)


def test_constant_snr_budget_too_small(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    with pytest.raises(BudgetTooSmall):
        select_constant_snr(op, 3)


def test_exhaustive_limit_guard(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, tau=4, filt=filt)
    with pytest.raises(ValueError):
        select_constant_snr(op, 8, "exhaustive", limit=1000)


def test_singular_candidates_score_infinite(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, filt=filt)
    assert math.isinf(constant_snr_objective(op.Phi, [0, 1, 2]))


def test_fixed_noise_single_slot_is_weakest_column(er10):
    _, basis, filt, _ = er10
    op = ReconstructionOperator.build(basis, 4, 2, filt=filt)
    res = select_fixed_noise(op, 1)
    assert list(res.pattern.slots()) == [int(np.argmin(np.sum(np.abs(op.Phi) ** 2, axis=0)))]


@pytest.mark.parametrize("strategy", ["relaxed", "exhaustive"])
def test_fixed_noise_separable_matches(strategy):
    for op in [cycle_op(), cycle_op(tau=2)] + [
            ReconstructionOperator.build(er_instance(s)[1], 4, 2, filt=er_instance(s)[2])
            for s in range(3)]:
        a = select_fixed_noise(op, 3, "separable")
        b = select_fixed_noise(op, 3, strategy)
        assert a.objective_value == pytest.approx(b.objective_value, rel=1e-10)


def test_fixed_noise_prefers_weakly_expressing_node():
    # a pendant node hanging off the graph by a very light edge
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (4, 5, 0.01)]
    basis = decompose(build_shift(Graph(6, edges)))
    op = ReconstructionOperator.build(basis, 2, filt=design_ideal_lowpass(basis, 2))
    res = select_fixed_noise(op, 1)
    weakest = int(np.argmin(np.abs(basis.Vinv[:2]).max(axis=0)))
    assert weakest == 5
    assert res.pattern.nodes == [5]
    assert not res.info["can_reconstruct"]
