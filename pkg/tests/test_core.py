import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkesnet.core import (EventStream, ExperimentData, ExponentialKernel, Link,
                            MultiExperimentData, MultiModel, TabulatedKernel, UnitParams,
                            experiment_design, integrated_path, integrated_process, intensity,
                            least_squares_loss, negloglik_grad, negloglik_loss)
from hawkesnet.simulate import simulate_hawkes

EXP1 = ExponentialKernel(1.0)


def direct_x(times, t, rate=1.0):
    times = np.asarray(times, float)
    past = times[times < t]
    return float(np.sum(np.exp(-rate * (t - past))))


def random_experiment(rng, p=3, T=20.0, n=30):
    return ExperimentData.from_times(
        [np.sort(rng.uniform(0, T, rng.integers(0, n))) for _ in range(p)], T)


# -- types -------------------------------------------------------------------


def test_event_stream_rejects_unsorted_and_out_of_range():
    with pytest.raises(ValueError):
        EventStream(np.array([2.0, 1.0]), 5.0)
    with pytest.raises(ValueError):
        EventStream(np.array([1.0, 6.0]), 5.0)
    with pytest.raises(ValueError):
        EventStream(np.array([1.0]), 0.0)


def test_experiment_needs_common_horizon():
    with pytest.raises(ValueError):
        ExperimentData((EventStream(np.array([]), 1.0), EventStream(np.array([]), 2.0)))


def test_multi_experiment_needs_common_p():
    a = ExperimentData.from_times([[0.5]], 1.0)
    b = ExperimentData.from_times([[0.5], [0.2]], 1.0)
    with pytest.raises(ValueError):
        MultiExperimentData((a, b))
    data = MultiExperimentData((a, ExperimentData.from_times([[0.1]], 3.0)))
    assert data.total_horizon == 4.0


def test_model_round_trip_and_stability():
    beta = np.array([[[0, 0.3], [0.4, 0]], [[0, -0.2], [0, 0]]])
    model = MultiModel(np.full((2, 2), 0.2), beta)
    back = MultiModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(back.beta, beta)
    assert model.is_stable()
    assert not MultiModel(np.full((1, 1), 0.2), np.array([[[1.2]]])).is_stable()


# -- integrated process --------------------------------------------------------


def test_integrated_process_examples():
    assert integrated_process(EventStream(np.array([1.0]), 5.0), EXP1, 2.0) == pytest.approx(
        math.exp(-1), abs=1e-15)
    assert integrated_process(EventStream(np.array([]), 5.0), EXP1, 3.0) == 0.0
    assert integrated_process(EventStream(np.array([0.5, 1.5]), 5.0), EXP1, 2.0) == pytest.approx(
        math.exp(-1.5) + math.exp(-0.5), abs=1e-15)


def test_integrated_process_left_limit_and_domain():
    s = EventStream(np.array([1.0]), 5.0)
    assert integrated_process(s, EXP1, 1.0) == 0.0
    with pytest.raises(ValueError):
        integrated_process(s, EXP1, 6.0)


def test_integrated_path_examples():
    exp = ExperimentData.from_times([[1.0]], 3.0)
    np.testing.assert_allclose(integrated_path(exp, EXP1, [0.5, 2.0])[0], [0, math.exp(-1)],
                               atol=1e-15)
    empty = ExperimentData.from_times([[], []], 3.0)
    assert not integrated_path(empty, EXP1, np.linspace(0, 3, 7)).any()
    with pytest.raises(ValueError):
        integrated_path(exp, EXP1, [2.0, 1.0])


def test_integrated_path_matches_direct_sum_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        rate = rng.uniform(0.2, 3)
        exp = random_experiment(rng, p=2)
        grid = np.sort(rng.uniform(0, exp.horizon, 15))
        X = integrated_path(exp, ExponentialKernel(rate), grid)
        for j in range(2):
            oracle = [direct_x(exp.streams[j].times, t, rate) for t in grid]
            np.testing.assert_allclose(X[j], oracle, rtol=0, atol=1e-12)


def test_tabulated_kernel_path_matches_direct_sum():
    grid = np.linspace(0, 4, 401)
    kern = TabulatedKernel(grid, np.exp(-grid) * (1 + grid))
    times = [0.3, 1.1, 2.9]
    exp = ExperimentData.from_times([times], 5.0)
    ts = np.array([0.2, 1.0, 3.0, 4.9])
    X = integrated_path(exp, kern, ts)[0]
    f = lambda u: np.interp(u, grid, kern.values, right=0.0)
    oracle = [sum(f(t - s) for s in times if s < t) for t in ts]
    np.testing.assert_allclose(X, oracle, atol=1e-12)


times_lists = st.lists(st.floats(0, 10, allow_nan=False), max_size=15).map(sorted)


@settings(max_examples=60, deadline=None)
@given(a=times_lists, b=times_lists, t=st.floats(0, 10))
def test_integrated_process_additive_in_events(a, b, t):
    b = [x for x in b if x not in a]
    both = EventStream(np.array(sorted(a + b)), 10.0)
    xa = integrated_process(EventStream(np.array(a), 10.0), EXP1, t)
    xb = integrated_process(EventStream(np.array(b), 10.0), EXP1, t)
    assert integrated_process(both, EXP1, t) == pytest.approx(xa + xb, rel=1e-12, abs=1e-14)


# -- intensity -----------------------------------------------------------------


def test_intensity_examples():
    assert intensity(UnitParams(0.2, np.zeros(2)), [5.0, 1.0]) == 0.2
    assert intensity(UnitParams(0.2, np.array([0.3])), [1.0]) == pytest.approx(0.5)
    assert intensity(UnitParams(0.0, np.array([1.0])), [1.0], Link.EXP) == pytest.approx(math.e)
    assert intensity(UnitParams(0.1, np.array([-1.0])), [1.0]) == 0.0
    with pytest.raises(OverflowError):
        intensity(UnitParams(0.0, np.array([1.0])), [1e4], Link.EXP)


# -- design and losses ----------------------------------------------------------


def riemann_design(exp, dt=1e-4, rate=1.0):
    """Midpoint rule on a fine grid with x from direct summation."""
    T = exp.horizon
    t = np.arange(dt / 2, T, dt)
    X = np.zeros((t.size, exp.p))
    for j, s in enumerate(exp.streams):
        for tk in s.times:
            after = t > tk
            X[after, j] += np.exp(-rate * (t[after] - tk))
    Z = np.column_stack([np.ones(t.size), X])
    return (Z * dt).T @ Z


def test_design_matches_fine_grid_quadrature():
    exp = simulate_hawkes([0.3, 0.2, 0.25], np.array([[0, .3, 0], [0, 0, .4], [.2, 0, 0]]),
                          T=100.0, seed=4)
    Q = experiment_design(exp, EXP1).Q
    np.testing.assert_allclose(Q, riemann_design(exp), rtol=1e-4)


def test_design_of_empty_data():
    d = experiment_design(ExperimentData.from_times([[], []], 7.0), EXP1)
    np.testing.assert_array_equal(d.Q, np.diag([7.0, 0, 0]))
    assert not d.gamma.any()


def test_least_squares_loss_zero_parameter_is_count():
    exp = simulate_hawkes([0.5, 0.5], np.zeros((2, 2)), T=50.0, seed=1)
    assert least_squares_loss(exp, 1, np.zeros(3), EXP1) == exp.counts[1]


def test_least_squares_loss_matches_brute_force():
    rng = np.random.default_rng(2)
    exp = random_experiment(rng, p=2, T=10.0, n=12)
    theta = np.array([0.4, 0.3, -0.2])
    dt = 1e-4
    t = np.arange(dt / 2, exp.horizon, dt)
    X = np.zeros((t.size, 2))
    for j, s in enumerate(exp.streams):
        for tk in s.times:
            X[t > tk, j] += np.exp(-(t[t > tk] - tk))
    lam = theta[0] + X @ theta[1:]
    ev = exp.streams[0].times
    lam_ev = [theta[0] + sum(theta[1 + j] * direct_x(s.times, tk) for j, s in enumerate(exp.streams))
              for tk in ev]
    oracle = np.sum(lam ** 2) * dt - 2 * np.sum(lam_ev) + ev.size
    assert least_squares_loss(exp, 0, theta, EXP1) == pytest.approx(oracle, rel=1e-4)


def test_least_squares_minimizer_is_normal_equation_solution():
    exp = simulate_hawkes([0.3, 0.2, 0.25], 0.2 * np.eye(3)[::-1], T=200.0, seed=3)
    d = experiment_design(exp, EXP1)
    theta = np.linalg.solve(d.Q, d.gamma[2])
    base = least_squares_loss(d, 2, theta)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert least_squares_loss(d, 2, theta + 1e-3 * rng.standard_normal(4)) > base


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.floats(0.01, 0.99))
def test_least_squares_loss_is_convex(seed, alpha):
    rng = np.random.default_rng(seed)
    exp = random_experiment(rng, p=2, T=10.0, n=10)
    d = experiment_design(exp, EXP1)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    mix = least_squares_loss(d, 0, alpha * a + (1 - alpha) * b)
    assert mix <= alpha * least_squares_loss(d, 0, a) + (1 - alpha) * least_squares_loss(
        d, 0, b) + 1e-10


def test_unpenalized_mu_tracks_empirical_rate():
    mus, rates = [], []
    for seed in range(20):
        exp = simulate_hawkes([0.2, 0.4], np.zeros((2, 2)), T=5000.0, seed=seed)
        d = experiment_design(exp, EXP1)
        mus.append([np.linalg.solve(d.Q, d.gamma[i])[0] for i in range(2)])
        rates.append(exp.counts / exp.horizon)
    mus, rates = np.array(mus), np.array(rates)
    assert np.all(np.abs(mus.mean(0) - rates.mean(0)) / rates.mean(0) < 0.05)
    assert np.mean(np.abs(mus - rates) / rates) < 0.05


def test_negloglik_homogeneous_poisson_closed_form():
    exp = simulate_hawkes([0.5], np.zeros((1, 1)), T=100.0, seed=0)
    mu_lin = math.log(0.4)
    loss = negloglik_loss(exp, 0, [mu_lin, 0.0], EXP1)
    assert loss == pytest.approx(-exp.counts[0] * mu_lin + 100.0 * math.exp(mu_lin), rel=1e-12)


def test_negloglik_gradient_matches_finite_differences():
    exp = simulate_hawkes([-1.0, -1.2], np.array([[0, 0.5], [0.4, 0]]), link=Link.EXP,
                          T=200.0, seed=5)
    rng = np.random.default_rng(1)
    for _ in range(20):
        theta = np.array([-1.0, 0.2, 0.3]) + 0.3 * rng.standard_normal(3)
        g = negloglik_grad(exp, 0, theta, EXP1)
        fd = np.empty(3)
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1e-5
            fd[k] = (negloglik_loss(exp, 0, theta + e, EXP1)
                     - negloglik_loss(exp, 0, theta - e, EXP1)) / 2e-5
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_negloglik_decreases_toward_truth():
    truth = np.array([-1.0, 0.0, 0.6])
    gaps = []
    for seed in range(20):
        exp = simulate_hawkes([-1.0, -1.0], np.array([[0, 0.6], [0, 0]]), link=Link.EXP,
                              T=300.0, seed=seed)
        gaps.append(negloglik_loss(exp, 0, np.zeros(3), EXP1)
                    - negloglik_loss(exp, 0, truth, EXP1))
    assert np.mean(gaps) > 0
