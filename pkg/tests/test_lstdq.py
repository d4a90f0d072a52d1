"""Error-in-variables policy evaluation on restricted trajectories."""
import math

import numpy as np
import pytest

from malspi.graphs import build_coupling_graphs, dependency_sets
from malspi.examples import build_example_system, generate_example1
from malspi.lstdq import (
    SingularOperatorError,
    UnderdeterminedError,
    build_regression,
    lstdq_solve,
)
from malspi.system import (
    build_system,
    extract_subsystem,
    rollout,
    structured_policy_from_blocks,
    true_q_matrix,
    zero_policy,
)
from malspi.verify import build_noise_free_variant, random_stabilizing_policy, random_system


def scalar_system(a=0.5, b=1.0, s=1.0, r=1.0, sigma_w=1.0):
    loops = [(1, 1)]
    g = build_coupling_graphs(1, loops, loops, loops)
    return build_system(g, 1, 1, {(1, 1): [[a]]}, {(1, 1): [[b]]},
                        {1: [[s]]}, {1: [[r]]}, sigma_w)


def test_feature_rows_hand_checked_smallest_instance():
    system = scalar_system(sigma_w=0.0)
    policy = zero_policy(system.graphs, 1, 1)
    batch = rollout(system, policy, 3, 1.0, seed=0)
    bundle = build_regression(batch, (1,), policy, (1,), system)
    assert bundle.d == 3
    for t in range(3):
        x, u = batch.x[t, 0], batch.u[t, 0]
        np.testing.assert_allclose(
            bundle.phi[t], [x * x, math.sqrt(2.0) * x * u, u * u], atol=1e-14
        )
        xp = batch.x[t + 1, 0]
        np.testing.assert_allclose(bundle.psi_plus[t], [xp * xp, 0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(bundle.f_row, 0.0)
    np.testing.assert_allclose(bundle.c_hat, batch.x[:3, 0] ** 2 + batch.u[:, 0] ** 2)


def test_noise_row_value():
    system = scalar_system(sigma_w=0.8)
    policy = structured_policy_from_blocks(system.graphs, 1, 1, {(1, 1): [[-0.2]]})
    batch = rollout(system, policy, 10, 1.0, seed=1)
    bundle = build_regression(batch, (1,), policy, (1,), system)
    g = np.array([[1.0], [-0.2]])
    expected = 0.8**2 * (g @ g.T)
    np.testing.assert_allclose(
        bundle.f_row,
        [expected[0, 0], math.sqrt(2) * expected[0, 1], expected[1, 1]],
        atol=1e-14,
    )
    assert bundle.f.shape == bundle.phi.shape


def test_empty_cost_owner_set_gives_zero_solution():
    system = scalar_system()
    policy = zero_policy(system.graphs, 1, 1)
    batch = rollout(system, policy, 50, 1.0, seed=2)
    bundle = build_regression(batch, (1,), policy, (), system)
    np.testing.assert_allclose(bundle.c_hat, 0.0)
    estimate = lstdq_solve(bundle)
    np.testing.assert_allclose(estimate.q, 0.0, atol=1e-12)


def test_aggregated_cost_matches_raw_recomputation():
    g = generate_example1(8)
    system = build_example_system(g, n_x=2, n_u=1)
    policy = zero_policy(g, 2, 1)
    deps = dependency_sets(g)
    batch = rollout(system, policy, 40, 1.0, seed=3)
    owners = deps.gradient[1]
    bundle = build_regression(batch, deps.direct[1], policy, owners, system,
                              allow_underdetermined=True)
    expected = np.zeros(40)
    for t in range(40):
        for j in owners:
            expected[t] += system.agent_stage_cost(j, batch.x[t], batch.u[t])
    np.testing.assert_allclose(bundle.c_hat, expected, rtol=1e-12)


def test_underdetermined_error_reports_required_length():
    system = scalar_system()
    policy = zero_policy(system.graphs, 1, 1)
    batch = rollout(system, policy, 2, 1.0, seed=4)
    with pytest.raises(UnderdeterminedError) as err:
        build_regression(batch, (1,), policy, (1,), system)
    assert err.value.required == 3


def test_singular_operator_raises_with_advice():
    system = scalar_system(sigma_w=0.0)
    policy = zero_policy(system.graphs, 1, 1)
    batch = rollout(system, policy, 20, 0.0, seed=5, x0=np.zeros(1), sigma0=0.0)
    bundle = build_regression(batch, (1,), policy, (1,), system)
    with pytest.raises(SingularOperatorError, match="longer trajectory"):
        lstdq_solve(bundle)


def test_noise_free_recovery_is_exact_scalar():
    system = scalar_system(sigma_w=0.0)
    eval_policy = structured_policy_from_blocks(system.graphs, 1, 1, {(1, 1): [[-0.3]]})
    play = zero_policy(system.graphs, 1, 1)
    batch = rollout(system, play, 60, 1.0, seed=6)
    bundle = build_regression(batch, (1,), eval_policy, (1,), system)
    estimate = lstdq_solve(bundle)
    sub = extract_subsystem(system, eval_policy, (1,), cost_owners=(1,))
    np.testing.assert_allclose(estimate.matrix, true_q_matrix(sub), atol=1e-6)
    assert estimate.diagnostics.sigma_min is not None


def test_noise_free_recovery_direct_and_per_owner_sets():
    rng = np.random.default_rng(7)
    g = generate_example1(4)
    system = build_noise_free_variant(random_system(rng, g, 1, 1))
    eval_policy = random_stabilizing_policy(rng, system)
    play = zero_policy(g, 1, 1)
    deps = dependency_sets(g)
    batch = rollout(system, play, 500, 1.0, seed=8)
    for i in g.agents:
        # aggregated evaluation on the direct set
        bundle = build_regression(batch, deps.direct[i], eval_policy, deps.gradient[i], system)
        sub = extract_subsystem(system, eval_policy, deps.direct[i],
                                cost_owners=deps.gradient[i])
        np.testing.assert_allclose(lstdq_solve(bundle).matrix, true_q_matrix(sub), atol=1e-6)
        # per-owner evaluation on the owner's value set
        own = build_regression(batch, deps.value[i], eval_policy, (i,), system)
        sub_own = extract_subsystem(system, eval_policy, deps.value[i], cost_owners=(i,))
        np.testing.assert_allclose(lstdq_solve(own).matrix, true_q_matrix(sub_own), atol=1e-6)


def test_off_policy_consistency_noise_free():
    system = scalar_system(sigma_w=0.0)
    eval_policy = structured_policy_from_blocks(system.graphs, 1, 1, {(1, 1): [[-0.4]]})
    sub = extract_subsystem(system, eval_policy, (1,), cost_owners=(1,))
    q_true = true_q_matrix(sub)
    for k_play in (0.0, -0.6):
        play = structured_policy_from_blocks(system.graphs, 1, 1, {(1, 1): [[k_play]]})
        batch = rollout(system, play, 80, 1.0, seed=9)
        estimate = lstdq_solve(build_regression(batch, (1,), eval_policy, (1,), system))
        np.testing.assert_allclose(estimate.matrix, q_true, atol=1e-6)


def test_longer_trajectories_reduce_error_on_paired_seeds():
    system = scalar_system(a=0.8, sigma_w=1.0)
    policy = zero_policy(system.graphs, 1, 1)
    sub = extract_subsystem(system, policy, (1,), cost_owners=(1,))
    q_exact = true_q_matrix(sub)
    improved = 0
    for seed in range(20):
        errors = {}
        for k, t_len in enumerate((500, 8000)):
            batch = rollout(system, policy, t_len, 1.0, seed=1000 * seed + k)
            est = lstdq_solve(build_regression(batch, (1,), policy, (1,), system))
            errors[t_len] = np.linalg.norm(est.matrix - q_exact)
        if errors[8000] < errors[500]:
            improved += 1
    assert improved >= 18


def test_exact_parameter_empirical_residual_shrinks_like_inverse_sqrt():
    # c_hat - (phi - psi_plus + f) q_true has zero conditional mean (the
    # average-cost offset is folded into f); its empirical mean over one
    # trajectory decays roughly as 1/sqrt(T)
    system = scalar_system(a=0.7, sigma_w=1.0)
    policy = zero_policy(system.graphs, 1, 1)
    sub = extract_subsystem(system, policy, (1,), cost_owners=(1,))
    from malspi.linalg import svec

    q_vec = svec(true_q_matrix(sub))
    t_grid = (400, 1600, 6400, 25600)
    means = []
    for t_len in t_grid:
        residuals = []
        for seed in range(12):
            batch = rollout(system, policy, t_len, 1.0, seed=70_000 + 13 * seed + t_len)
            bundle = build_regression(batch, (1,), policy, (1,), system)
            rows = bundle.phi - bundle.psi_plus + bundle.f_row[None, :]
            residuals.append(abs(np.mean(bundle.c_hat - rows @ q_vec)))
        means.append(np.median(residuals))
    slope = np.polyfit(np.log(t_grid), np.log(means), 1)[0]
    assert -0.8 <= slope <= -0.25


def test_projection_floors_eigenvalues():
    system = scalar_system()
    policy = zero_policy(system.graphs, 1, 1)
    batch = rollout(system, policy, 200, 1.0, seed=10)
    estimate = lstdq_solve(build_regression(batch, (1,), policy, (1,), system))
    projected = estimate.project(1e-6)
    assert projected.zeta == 1e-6
    assert np.linalg.eigvalsh(projected.matrix).min() >= 1e-6 - 1e-12
    np.testing.assert_allclose(projected.q, projected.project(1e-6).q, atol=1e-12)
