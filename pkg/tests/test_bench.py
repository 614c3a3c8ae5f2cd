import numpy as np
import pytest

from hawkesnet.bench import (PLOT_COLUMNS, BenchConfig, BenchReport, edge_trees, emit_plot_data,
                             max_rho1, normalized_auc, read_plot_data, run_benchmark_estimation,
                             run_benchmark_testing)
from hawkesnet.bench import testing_model as bench_model
from hawkesnet.crosscov import uniform_weights
from hawkesnet.estimate import joint_fit, precompute_design
from hawkesnet.simulate import default_layouts, make_benchmark_networks, simulate_multi


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(seeds=())
    with pytest.raises(ValueError):
        BenchConfig(strategies=())
    with pytest.raises(ValueError):
        BenchConfig(strategies=("magic",))
    with pytest.raises(ValueError):
        BenchConfig(null="some")


def test_normalized_auc_examples():
    assert normalized_auc([0], [10], 100, 10) == pytest.approx(1.0)
    assert normalized_auc([], [], 100, 10) == pytest.approx(0.5)
    assert normalized_auc([50], [5], 100, 10) == pytest.approx(0.5)


def test_max_rho1_zeroes_every_edge():
    data = simulate_multi(make_benchmark_networks(10), (200, 200, 200), seed=0)
    d = precompute_design(data)
    top = max_rho1(d)
    assert not joint_fit(d, None, top * 1.001, 0.0).beta.any()
    assert joint_fit(d, None, top * 0.9, 0.0).beta.any()


def test_separate_strategy_is_fusion_free_joint_fit():
    data = simulate_multi(make_benchmark_networks(10), (200, 200, 200), seed=1)
    d = precompute_design(data)
    a = joint_fit(d, uniform_weights(3), 0.01, 0.0)
    b = joint_fit(d, None, 0.01, 0.0)
    np.testing.assert_array_equal(a.theta, b.theta)


def test_estimation_report_invariants():
    cfg = BenchConfig(p=10, horizons=(100.0, 150.0, 120.0), seeds=(0, 1), n_path=5,
                      strategies=("oracle", "separate"), fusion=("weak",))
    rep = run_benchmark_estimation(cfg)
    model = cfg.model()
    n_true = int((model.beta != 0).sum())
    n_false = model.beta.size - n_true
    for s, r1, r2, metric, value, se, n in rep.records:
        assert n == 2
        if metric == "tp":
            assert 0 <= value <= n_true
        elif metric == "fp":
            assert 0 <= value <= n_false
        elif metric == "auc":
            assert 0 <= value <= 1
    assert {r[0] for r in rep.records} == {"oracle-weak", "separate"}
    assert rep.failures["fits"][0] == 0


@pytest.mark.slow
def test_fourth_similar_experiment_raises_auc():
    auc = {}
    for M in (3, 4):
        cfg = BenchConfig(M=M, layouts=tuple(default_layouts(20, n_experiments=M)),
                          horizons=(200.0, 500.0, 300.0, 500.0)[:M], seeds=tuple(range(10)),
                          strategies=("oracle", "empirical"), fusion=("strong",), n_path=12)
        rep = run_benchmark_estimation(cfg)
        for name in ("oracle-strong", "empirical-strong"):
            per = rep.per_seed[(name, "auc")]
            auc[(M, name)] = np.array([per[s] for s in sorted(per)])
    for name in ("oracle-strong", "empirical-strong"):
        gain = auc[(4, name)] - auc[(3, name)]
        assert gain.mean() > 0, name


def test_testing_model_layout():
    model = bench_model(10, 4)
    np.testing.assert_array_equal(model.beta[0], model.beta[2])
    assert set(model.beta[3][model.beta[3] != 0]) == {0.6}
    assert not bench_model(10, 4, null="all-null").beta.any()
    assert bench_model(10, 1).M == 1


def test_scrambled_trees_reverse_oracle():
    beta = bench_model(5, 3).beta
    oracle, scrambled = edge_trees(beta), edge_trees(beta, "scrambled")
    assert len(oracle) == 25
    for a, b in zip(oracle, scrambled):
        assert b.order == tuple(reversed(a.order))


def test_single_experiment_methods_coincide():
    cfg = BenchConfig(p=5, testing_Ms=(1,), seeds=(0, 1, 2), testing_horizon=300.0)
    rep = run_benchmark_testing(cfg)
    for metric in ("power@M=1", "fwer@M=1"):
        vals = {m: rep.value(m, metric) for m in cfg.methods}
        assert len(set(vals.values())) == 1


def test_plot_data_header_only_when_empty(tmp_path):
    path = emit_plot_data(BenchReport(), tmp_path / "e.csv")
    assert path.read_text().strip() == ",".join(PLOT_COLUMNS)
    assert read_plot_data(path).records == []


def test_plot_data_round_trip(tmp_path):
    rep = BenchReport()
    rep.add("oracle-weak", 0.1, 0.1, "tp", [3, 4, 8])
    rep.add("separate", np.nan, np.nan, "auc", [0.91234567890123, 0.95])
    rep.add("bonferroni", np.nan, np.nan, "power@M=5", [1.0])
    back = read_plot_data(emit_plot_data(rep, tmp_path / "r.csv"))
    assert len(back.records) == len(rep.records)
    for a, b in zip(rep.records, back.records):
        assert a[0] == b[0] and a[3] == b[3] and a[6] == b[6]
        np.testing.assert_array_equal(np.array(a[1:3] + a[4:6]), np.array(b[1:3] + b[4:6]))


def test_plot_data_rejects_wrong_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("strategy,value\nx,1\n")
    with pytest.raises(ValueError):
        read_plot_data(path)
