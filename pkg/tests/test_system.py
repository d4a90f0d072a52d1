"""System assembly, subsystem extraction, exact Q matrices, rollouts, costs."""
import numpy as np
import pytest

from malspi.graphs import GraphValidationError, build_coupling_graphs, dependency_sets
from malspi.examples import build_example_system, generate_example1
from malspi.linalg import InstabilityError, lyapunov_solve
from malspi.system import (
    ClosureError,
    average_cost,
    bellman_offset,
    bellman_residual,
    build_system,
    extract_subsystem,
    policy_from_global_gain,
    rollout,
    structured_policy_from_blocks,
    true_q_matrix,
    x_coords,
    u_coords,
    zero_policy,
)
from malspi.verify import random_graphs, random_stabilizing_policy, random_system


def scalar_system(a, b, s, r, sigma_w):
    loops = [(1, 1)]
    g = build_coupling_graphs(1, loops, loops, loops)
    return build_system(
        g, 1, 1,
        {(1, 1): np.array([[a]])},
        {(1, 1): np.array([[b]])},
        {1: np.array([[s]])},
        {1: np.array([[r]])},
        sigma_w,
    )


def decoupled_pair(a1=0.5, a2=0.3):
    loops = [(1, 1), (2, 2)]
    g = build_coupling_graphs(2, loops, loops, loops)
    return build_system(
        g, 1, 1,
        {(1, 1): [[a1]], (2, 2): [[a2]]},
        {(1, 1): [[1.0]], (2, 2): [[1.0]]},
        {1: [[1.0]], 2: [[2.0]]},
        {1: [[1.0]], 2: [[1.0]]},
        1.0,
    )


def test_global_assembly_zero_fills_off_pattern():
    sys2 = decoupled_pair()
    assert sys2.a[0, 1] == 0.0 and sys2.a[1, 0] == 0.0
    np.testing.assert_allclose(np.diag(sys2.a), [0.5, 0.3])
    # 1/N averaging folded into the global cost
    np.testing.assert_allclose(np.diag(sys2.s), [0.5, 1.0])


def test_build_rejects_block_outside_state_graph():
    loops = [(1, 1), (2, 2)]
    g = build_coupling_graphs(2, loops, loops, loops)
    with pytest.raises(GraphValidationError):
        build_system(g, 1, 1, {(1, 2): [[0.1]]}, {}, {1: [[1.0]], 2: [[1.0]]},
                     {1: [[1.0]], 2: [[1.0]]}, 1.0)


def test_build_rejects_indefinite_cost():
    with pytest.raises(ValueError):
        scalar_system(0.5, 1.0, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        scalar_system(0.5, 1.0, 1.0, 0.0, 1.0)


def test_policy_sparsity_validation():
    loops = [(1, 1), (2, 2)]
    g = build_coupling_graphs(2, loops, loops, loops)
    with pytest.raises(GraphValidationError):
        structured_policy_from_blocks(g, 1, 1, {(1, 2): np.array([[0.5]])})
    bad = np.array([[0.0, 0.3], [0.0, 0.1]])
    with pytest.raises(GraphValidationError):
        policy_from_global_gain(g, 1, 1, bad)


def test_full_index_set_subsystem_equals_global():
    rng = np.random.default_rng(0)
    g = random_graphs(rng, 4, edge_prob=0.4, cost_self_loops=True)
    system = random_system(rng, g, 2, 1)
    policy = random_stabilizing_policy(rng, system)
    sub = extract_subsystem(system, policy, g.agents, cost_owners=g.agents, average=True)
    np.testing.assert_allclose(sub.a, system.a)
    np.testing.assert_allclose(sub.b, system.b)
    np.testing.assert_allclose(sub.s, system.s)
    np.testing.assert_allclose(sub.r, system.r)
    np.testing.assert_allclose(sub.k, policy.gain)


def test_decoupled_extraction_picks_agent_blocks():
    sys2 = decoupled_pair()
    policy = zero_policy(sys2.graphs, 1, 1)
    sub = extract_subsystem(sys2, policy, (1,), cost_owners=(1,))
    np.testing.assert_allclose(sub.a, [[0.5]])
    np.testing.assert_allclose(sub.b, [[1.0]])
    np.testing.assert_allclose(sub.s, [[1.0]])


def test_extraction_rejects_open_set():
    g = build_coupling_graphs(2, [(1, 1), (2, 2), (1, 2)], [(1, 1), (2, 2)],
                              [(1, 1), (2, 2)])
    system = build_system(
        g, 1, 1,
        {(1, 1): [[0.5]], (2, 2): [[0.5]], (2, 1): [[0.1]]},
        {(1, 1): [[1.0]], (2, 2): [[1.0]]},
        {1: [[1.0]], 2: [[1.0]]},
        {1: [[1.0]], 2: [[1.0]]},
        1.0,
    )
    policy = zero_policy(g, 1, 1)
    with pytest.raises(ClosureError, match="agent 1"):
        extract_subsystem(system, policy, (2,))
    sub = extract_subsystem(system, policy, (2,), require_closed=False)
    np.testing.assert_allclose(sub.a, [[0.5]])


def test_restricted_subsystem_reproduces_global_trajectory():
    g = generate_example1(8)
    system = build_example_system(g, n_x=2, n_u=2)
    rng = np.random.default_rng(1)
    play = random_stabilizing_policy(rng, system)
    deps = dependency_sets(g)
    agent_set = deps.direct[3]
    batch = rollout(system, play, 50, 0.5, seed=42)
    sub = extract_subsystem(system, play, agent_set)
    xs = batch.states(agent_set)
    us = batch.controls(agent_set)
    # process noise recovered from the global trajectory, restricted
    w_full = batch.x[1:] - batch.x[:-1] @ system.a.T - batch.u @ system.b.T
    w_sub = w_full[:, x_coords(agent_set, system.n_x)]
    x_sim = xs[0]
    for t in range(50):
        x_sim = sub.a @ x_sim + sub.b @ us[t] + w_sub[t]
        np.testing.assert_allclose(x_sim, xs[t + 1], atol=1e-10)


def test_true_q_scalar_static_dynamics():
    system = scalar_system(0.0, 1.0, 1.0, 1.0, 1.0)
    sub = extract_subsystem(system, zero_policy(system.graphs, 1, 1), (1,), cost_owners=(1,))
    np.testing.assert_allclose(true_q_matrix(sub), [[1.0, 0.0], [0.0, 2.0]], atol=1e-12)


def test_true_q_scalar_geometric():
    system = scalar_system(0.5, 1.0, 1.0, 1.0, 1.0)
    sub = extract_subsystem(system, zero_policy(system.graphs, 1, 1), (1,), cost_owners=(1,))
    expected = np.array([[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 7.0 / 3.0]])
    np.testing.assert_allclose(true_q_matrix(sub), expected, rtol=1e-12)


def test_true_q_rejects_unstable_closed_loop():
    system = scalar_system(1.1, 0.0, 1.0, 1.0, 1.0)
    sub = extract_subsystem(system, zero_policy(system.graphs, 1, 1), (1,), cost_owners=(1,))
    with pytest.raises(InstabilityError):
        true_q_matrix(sub)


def test_true_q_matches_monte_carlo_value_differences():
    rng = np.random.default_rng(2)
    g = random_graphs(rng, 2, edge_prob=0.6, cost_self_loops=True)
    system = random_system(rng, g, 1, 1, sigma_w=0.3)
    policy = random_stabilizing_policy(rng, system)
    everyone = tuple(g.agents)
    sub = extract_subsystem(system, policy, everyone, cost_owners=everyone)
    q = true_q_matrix(sub)
    lam = bellman_offset(sub, q)

    def mc_return(x0, u0, noise):
        x, u = np.array(x0), np.array(u0)
        acc = 0.0
        for w in noise:
            acc += sub.stage_cost(x, u) - lam
            x = sub.a @ x + sub.b @ u + sub.sigma_w * w
            u = sub.k @ x
        return acc

    za = (np.array([3.0, -2.0]), np.array([2.0, 1.0]))
    zb = (np.array([-0.3, 0.8]), np.array([-0.1, 0.4]))
    horizon, reps = 125, 400
    mc_rng = np.random.default_rng(3)
    # common random numbers across the two starting points
    diff_mc = 0.0
    for _ in range(reps):
        noise = mc_rng.standard_normal((horizon, sub.nx))
        diff_mc += mc_return(*za, noise) - mc_return(*zb, noise)
    diff_mc /= reps
    qa = np.concatenate(za) @ q @ np.concatenate(za)
    qb = np.concatenate(zb) @ q @ np.concatenate(zb)
    assert diff_mc == pytest.approx(qa - qb, rel=0.02)


def test_bellman_residual_vanishes_for_exact_q():
    rng = np.random.default_rng(4)
    for _ in range(5):
        g = random_graphs(rng, int(rng.integers(2, 5)), edge_prob=0.4, cost_self_loops=True)
        system = random_system(rng, g, 1, 2)
        policy = random_stabilizing_policy(rng, system)
        everyone = tuple(g.agents)
        sub = extract_subsystem(system, policy, everyone, cost_owners=everyone)
        q = true_q_matrix(sub)
        lam = bellman_offset(sub, q)
        for _ in range(20):
            x = rng.normal(size=sub.nx)
            u = rng.normal(size=sub.nu)
            assert abs(bellman_residual(sub, q, lam, x, u)) < 1e-9


def test_rollout_all_zero_without_noise():
    system = scalar_system(0.5, 1.0, 1.0, 1.0, 0.0)
    batch = rollout(system, zero_policy(system.graphs, 1, 1), 10, 0.0, seed=0,
                    x0=np.zeros(1), sigma0=0.0)
    assert np.all(batch.x == 0.0)
    assert np.all(batch.u == 0.0)


def test_rollout_pure_exploration_propagation():
    system = scalar_system(0.0, 1.0, 1.0, 1.0, 0.0)
    batch = rollout(system, zero_policy(system.graphs, 1, 1), 25, 1.0, seed=1,
                    x0=np.zeros(1), sigma0=0.0)
    np.testing.assert_allclose(batch.x[1:, 0], batch.u[:, 0], atol=1e-14)


def test_rollout_deterministic_given_seed():
    sys2 = decoupled_pair()
    p = zero_policy(sys2.graphs, 1, 1)
    b1 = rollout(sys2, p, 40, 0.7, seed=123)
    b2 = rollout(sys2, p, 40, 0.7, seed=123)
    assert b1.x.tobytes() == b2.x.tobytes()
    assert b1.u.tobytes() == b2.u.tobytes()


def test_rollout_matches_stationary_covariance():
    rng = np.random.default_rng(5)
    g = random_graphs(rng, 2, edge_prob=0.5, cost_self_loops=True)
    system = random_system(rng, g, 2, 1)
    play = random_stabilizing_policy(rng, system)
    sigma_eta = 0.8
    batch = rollout(system, play, 10_000, sigma_eta, seed=6)
    closed = system.a + system.b @ play.gain
    target = lyapunov_solve(
        closed,
        system.sigma_w**2 * np.eye(system.nx_total)
        + sigma_eta**2 * (system.b @ system.b.T),
    )
    xs = batch.x[500:]
    empirical = (xs.T @ xs) / xs.shape[0]
    assert np.linalg.norm(empirical - target) / np.linalg.norm(target) < 0.10


def test_average_cost_zero_without_noise():
    system = scalar_system(0.5, 1.0, 1.0, 1.0, 0.0)
    result = average_cost(system, zero_policy(system.graphs, 1, 1), 50, seed=0,
                          x0=np.zeros(1), sigma0=0.0)
    assert result.value == 0.0 and not result.diverged


def test_average_cost_scalar_analytic():
    system = scalar_system(0.0, 1.0, 1.0, 1.0, 1.0)
    result = average_cost(system, zero_policy(system.graphs, 1, 1), 100_000, seed=7)
    assert not result.diverged
    assert result.value == pytest.approx(1.0, rel=0.05)


def test_average_cost_matches_lyapunov_trace():
    rng = np.random.default_rng(8)
    g = random_graphs(rng, 2, edge_prob=0.5, cost_self_loops=True)
    system = random_system(rng, g, 1, 1)
    policy = random_stabilizing_policy(rng, system)
    closed = system.a + system.b @ policy.gain
    cov = lyapunov_solve(closed, system.sigma_w**2 * np.eye(system.nx_total))
    expected = float(np.trace(cov @ (system.s + policy.gain.T @ system.r @ policy.gain)))
    result = average_cost(system, policy, 100_000, seed=9)
    assert result.value == pytest.approx(expected, rel=0.03)


def test_average_cost_flags_divergence():
    system = scalar_system(1.3, 0.0, 1.0, 1.0, 1.0)
    result = average_cost(system, zero_policy(system.graphs, 1, 1), 2_000, seed=10)
    assert result.diverged and result.value == np.inf


def test_coordinate_helpers():
    np.testing.assert_array_equal(x_coords((1, 3), 2), [0, 1, 4, 5])
    np.testing.assert_array_equal(u_coords((2,), 3), [3, 4, 5])
