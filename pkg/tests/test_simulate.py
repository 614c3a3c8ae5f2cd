import numpy as np
import pytest
from numba import njit

from hawkesnet.core import Link, StabilityError, TabulatedKernel
from hawkesnet.simulate import (MotifSpec, default_layouts, experiment_seeds,
                                make_benchmark_networks, motif_adjacency, simulate_hawkes,
                                simulate_multi)


@njit(cache=True)
def bernoulli_hawkes(mu, beta, rate, T, dt, burn, seed):
    """Fine-grid approximation: each step has an event with probability lambda*dt."""
    np.random.seed(seed)
    p = mu.shape[0]
    n = int((T + burn) / dt)
    x = np.zeros(p)
    decay = np.exp(-rate * dt)
    out_t = []
    out_u = []
    for k in range(n):
        t = k * dt - burn
        fired = np.zeros(p)
        for i in range(p):
            lam = mu[i]
            for j in range(p):
                lam += beta[i, j] * x[j]
            if lam < 0:
                lam = 0.0
            if np.random.random() < lam * dt:
                fired[i] = 1.0
                if t >= 0:
                    out_t.append(t)
                    out_u.append(i)
        for j in range(p):
            x[j] = x[j] * decay + fired[j] * decay
    return np.array(out_t), np.array(out_u)


def lag_correlation(times_a, times_b, T, lag, width=1.0):
    """corr(count_b[t + lag], count_a[t]) of binned counts."""
    edges = np.arange(0, T + width, width)
    a = np.histogram(times_a, edges)[0].astype(float)
    b = np.histogram(times_b, edges)[0].astype(float)
    return np.corrcoef(a[:-lag], b[lag:])[0, 1]


def test_stationary_rate_one_unit():
    rates = [simulate_hawkes([0.2], [[0.3]], T=5000.0, seed=s).counts[0] / 5000.0
             for s in range(20)]
    assert abs(np.mean(rates) - 0.2 / 0.7) / (0.2 / 0.7) < 0.05


def test_poisson_rate():
    rates = [simulate_hawkes([0.2], [[0.0]], T=5000.0, seed=s).counts[0] / 5000.0
             for s in range(20)]
    assert abs(np.mean(rates) - 0.2) / 0.2 < 0.05


def test_inhibition_lowers_rate_like_fine_grid_simulator():
    mu, beta = np.array([0.2, 0.5]), np.array([[0.0, -0.3], [0.0, 0.0]])
    thin, grid = [], []
    for s in range(20):
        thin.append(simulate_hawkes(mu, beta, T=500.0, seed=s).counts[0] / 500.0)
        t, u = bernoulli_hawkes(mu, beta, 1.0, 500.0, 1e-3, 10.0, s)
        grid.append(np.sum(u == 0) / 500.0)
    thin, grid = np.array(thin), np.array(grid)
    se = np.sqrt(thin.var(ddof=1) / 20 + grid.var(ddof=1) / 20)
    assert thin.mean() + 2 * thin.std(ddof=1) / np.sqrt(20) < 0.2
    assert abs(thin.mean() - grid.mean()) < 2 * se


def test_correlogram_matches_fine_grid_simulator():
    mu, beta = np.array([0.3, 0.2]), np.array([[0.0, 0.0], [0.5, 0.0]])
    T = 400.0
    stats = {"thin": [], "grid": []}
    for s in range(50):
        e = simulate_hawkes(mu, beta, T=T, seed=s)
        t, u = bernoulli_hawkes(mu, beta, 1.0, T, 1e-3, 10.0, 1000 + s)
        for key, (a, b) in (("thin", (e.streams[0].times, e.streams[1].times)),
                            ("grid", (t[u == 0], t[u == 1]))):
            stats[key].append([lag_correlation(a, b, T, lag) for lag in (1, 2, 3)])
    thin, grid = np.array(stats["thin"]), np.array(stats["grid"])
    se = np.sqrt(thin.var(0, ddof=1) / 50 + grid.var(0, ddof=1) / 50)
    assert thin.mean(0)[0] > 0.05
    assert np.all(np.abs(thin.mean(0) - grid.mean(0)) < 2 * se)


def test_counts_scale_linearly_with_horizon():
    mu, beta = [0.3, 0.3], [[0.1, 0.2], [0.2, 0.1]]
    per_T = []
    for T in (500.0, 1000.0, 2000.0):
        per_T.append(np.mean([simulate_hawkes(mu, beta, T=T, seed=s).counts.sum() / T
                              for s in range(10)]))
    assert max(per_T) / min(per_T) - 1 < 0.1


def test_stationary_after_burn_in():
    diffs = []
    for s in range(50):
        times = simulate_hawkes([0.3], [[0.5]], T=400.0, seed=s).streams[0].times
        diffs.append(np.sum(times < 200) - np.sum(times >= 200))
    diffs = np.array(diffs, float)
    assert abs(diffs.mean()) < 3 * diffs.std(ddof=1) / np.sqrt(50)


def test_stability_and_runaway_errors():
    with pytest.raises(StabilityError):
        simulate_hawkes([0.2, 0.2], [[0.6, 0.5], [0, 0]], T=10.0)
    with pytest.raises(RuntimeError):
        simulate_hawkes([5.0], [[0.5]], T=1000.0, max_events=100)
    with pytest.raises(ValueError):
        simulate_hawkes([0.2], [[0.1]], T=0.0)


def test_tabulated_kernel_simulation_rate():
    grid = np.linspace(0, 8, 801)
    kern = TabulatedKernel(grid, np.exp(-grid))
    rates = [simulate_hawkes([0.2], [[0.3]], kern, T=2000.0, seed=s).counts[0] / 2000.0
             for s in range(10)]
    # the tabulated kernel integrates to 1 - e^-8 over its support
    target = 0.2 / (1 - 0.3 * kern.integral)
    assert abs(np.mean(rates) - target) / target < 0.05


def test_exponential_link_simulation_rate():
    rates = [simulate_hawkes([np.log(0.2)], [[0.0]], link=Link.EXP, T=3000.0, seed=s)
             .counts[0] / 3000.0 for s in range(10)]
    assert abs(np.mean(rates) - 0.2) / 0.2 < 0.05


# -- multi-experiment -----------------------------------------------------------


def three_experiment_model():
    return make_benchmark_networks(20, default_layouts(20))


def test_simulate_multi_horizons_and_determinism():
    model = three_experiment_model()
    a = simulate_multi(model, (200, 500, 300), seed=7)
    b = simulate_multi(model, (200, 500, 300), seed=7)
    np.testing.assert_array_equal(a.horizons, [200, 500, 300])
    for ea, eb in zip(a, b):
        for sa, sb in zip(ea.streams, eb.streams):
            assert sa.times.tobytes() == sb.times.tobytes()


def test_simulate_multi_experiments_are_isolated():
    model = three_experiment_model()
    full = simulate_multi(model, (200, 500, 300), seed=3)
    # experiment 2 alone, given its own sub-stream seed, is unchanged
    seed2 = experiment_seeds(3, 3)[1]
    alone = simulate_hawkes(model.mu[1], model.beta[1], T=500.0, seed=seed2, experiment_id=2)
    for s1, s2 in zip(full[1].streams, alone.streams):
        np.testing.assert_array_equal(s1.times, s2.times)


# -- benchmark networks -------------------------------------------------------------


def test_network_one_has_100_edges_at_0_3():
    model = make_benchmark_networks(100)
    b1 = model.beta[0]
    assert np.count_nonzero(b1) == 100
    assert set(b1[b1 != 0]) == {0.3}
    assert set(model.beta[2][model.beta[2] != 0]) == {0.6}
    assert np.all(model.mu == 0.2)


def test_star_is_hub_to_leaves():
    block = motif_adjacency(MotifSpec("star", 5, 0.6))
    assert np.count_nonzero(block) == 4
    assert np.all(block[1:, 0] == 0.6)
    circle = motif_adjacency(MotifSpec("circle", 5, 0.3))
    assert circle[1, 0] == circle[0, 4] == 0.3


def test_networks_one_and_two_share_ninety_percent():
    beta = make_benchmark_networks(100).beta
    same_motif = np.all(beta[0] == beta[1], axis=1).reshape(20, 5).all(axis=1)
    assert same_motif.mean() == pytest.approx(0.9)
    shared = np.count_nonzero((beta[0] != 0) & (beta[1] != 0))
    # each star keeps the hub -> first leaf edge of the circle it replaced
    assert shared / np.count_nonzero(beta[0]) == pytest.approx(0.92)


def test_indivisible_p_is_rejected():
    with pytest.raises(ValueError):
        make_benchmark_networks(22)
    with pytest.raises(ValueError):
        MotifSpec("triangle")
