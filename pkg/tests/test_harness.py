import networkx as nx
import numpy as np
import pytest

from graphseed import build_shift, decompose
from graphseed.experiments import (
    ExperimentConfig,
    draw_instance,
    is_connected,
    run_experiment,
    run_insufficient_seeding,
    run_recovery_comparison,
)
from graphseed.graphs import gen_cycle, gen_er, karate, random_bandlimited
from graphseed.spectral import gft


def test_cycle_generator():
    g = gen_cycle(4)
    assert len(g.edges) == 4
    A = g.adjacency()
    assert np.all(A.sum(axis=0) == 1) and np.all(A.sum(axis=1) == 1)
    assert np.trace(A) == 0


def test_er_extremes():
    rng = np.random.default_rng(0)
    assert gen_er(10, 0.0, rng).edges == ()
    assert len(gen_er(10, 1.0, rng).edges) == 45
    assert len(gen_er(6, 1.0, rng, directed=True).edges) == 30
    with pytest.raises(ValueError):
        gen_er(10, 1.5, rng)


def test_er_edge_rate():
    rng = np.random.default_rng(1)
    counts = [len(gen_er(20, 0.3, rng).edges) for _ in range(200)]
    assert np.mean(counts) == pytest.approx(0.3 * 190, rel=0.03)


def test_karate_matches_reference_dataset():
    g = karate()
    assert g.n == 34 and len(g.edges) == 78
    ref = nx.to_numpy_array(nx.karate_club_graph(), nodelist=range(34), weight=None)
    np.testing.assert_array_equal(g.adjacency(), ref)


def test_bandlimited_support_and_covariance():
    basis = decompose(build_shift(gen_er(10, 0.4, np.random.default_rng(2))))
    rng = np.random.default_rng(3)
    X = np.stack([gft(basis, random_bandlimited(basis, 4, rng)) for _ in range(10**4)], axis=1)
    assert np.abs(X[4:]).max() <= 1e-10 * np.abs(X).max()
    C = (X[:4] @ X[:4].conj().T) / X.shape[1]
    np.testing.assert_allclose(C, np.eye(4), atol=0.05)
    full = random_bandlimited(basis, 10, rng)
    assert np.count_nonzero(np.abs(gft(basis, full)) > 1e-8) == 10


def test_config_round_trip_and_validation():
    cfg = ExperimentConfig(trials=3, seed=9)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"trails": 3})
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(schemes=("mnst", "bogus"))


def test_draw_instance_honours_connectivity():
    cfg = ExperimentConfig(graph={"generator": "er", "n": 10, "p": 0.15, "connected": True})
    rng = np.random.default_rng(0)
    for _ in range(5):
        shift, basis, filt, p, _ = draw_instance(cfg, rng)
        assert filt is not None and p == 0.15
        assert basis.n == 10


def test_connectivity_helper():
    from graphseed.spectral import Graph

    assert is_connected(gen_cycle(5))
    assert not is_connected(Graph(4, [(0, 1), (2, 3)]))


def test_cycle_smoke_run_recovers_everything():
    cfg = ExperimentConfig(graph={"generator": "cycle", "n": 4}, K=1, trials=3,
                           noise={"kind": "fixed_power", "sigma": 1e-3})
    summary = run_recovery_comparison(cfg)
    for scheme in ("mnst", "snmt", "mnmt"):
        assert summary.schemes[scheme]["recovery_pct"] == 100.0
    assert summary.schemes["mnst"]["locations_per_graph"] == 4
    assert summary.schemes["mnmt"]["locations_per_graph"] == 6
    rec = summary.records[0]
    assert {"feasible", "cond", "error_noiseless", "error_noisy", "recovered"} <= set(rec)


def test_recovery_records_are_auditable():
    summary = run_recovery_comparison(ExperimentConfig(trials=2, seed=5))
    assert len(summary.records) == 2 * (210 + 10 + 45)
    for scheme in summary.schemes.values():
        assert 0.0 <= scheme["recovery_pct"] <= 100.0
    assert all(r["recovered"] <= r["feasible"] for r in summary.records)


def test_same_seed_same_bytes():
    cfg = ExperimentConfig(trials=3, seed=42)
    a = run_experiment(cfg).to_json()
    b = run_experiment(ExperimentConfig.from_dict(cfg.to_dict())).to_json()
    assert a == b
    assert '"seed": 42' in a


def test_worker_count_does_not_change_results():
    a = run_recovery_comparison(ExperimentConfig(trials=4, seed=1, workers=1))
    b = run_recovery_comparison(ExperimentConfig(trials=4, seed=1, workers=2))
    assert a.to_json().replace('"workers": 2', '"workers": 1') == b.to_json().replace(
        '"workers": 2', '"workers": 1')


def test_insufficient_seeding_small_karate_run():
    cfg = ExperimentConfig(kind="insufficient_seeding", graph={"generator": "karate"},
                           shift="normalized", K=3, P_range=(1, 3), noise=None, trials=3)
    summary = run_insufficient_seeding(cfg)
    curve = {(c["scheme"], c["P"]): c["mean_error"] for c in summary.curves}
    assert curve[("mnst", 1)] == pytest.approx(curve[("snmt", 1)], rel=1e-9)
    assert curve[("mnst", 1)] == pytest.approx(curve[("mnmt", 1)], rel=1e-9)
    for scheme in ("mnst", "snmt", "mnmt"):
        errs = [curve[(scheme, P)] for P in (1, 2, 3)]
        assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))
        assert errs[-1] <= 1e-6
        assert curve[("mnmt", 2)] <= min(curve[("mnst", 2)], curve[("snmt", 2)]) + 1e-12
