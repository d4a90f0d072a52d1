"""Least-squares policy iteration over the coupling-graph architectures.

Each iteration rolls out a fresh trajectory under the fixed play policy,
evaluates quadratic Q-functions per agent by restricted LSTDQ, and performs
one gradient step on every agent's structured gain.

The four architectures differ only in where each cost owner's Q-function is
estimated:

* ``direct``               on the agent's direct dependence set
* ``indirect``             on each owner's own value dependence set
* ``undecomposed_direct``  on the full agent set
* ``centralized``          on the full agent set

Estimation is unified as one regression solve per (estimation set, cost
owner) pair; an agent's update aggregates the embedded solutions over its
gradient dependence set, floors the aggregate's eigenvalues, and descends
the resulting quadratic.  Forcing every dependence set to the full agent
set therefore collapses all four architectures onto the identical
computation.  Solves are deduplicated across agents that share an
estimation set, which never changes any agent's result.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .graphs import DependencySets, dependency_sets
from .linalg import InstabilityError, psd_project, smat, spectral_radius, svec
from .lstdq import (
    LstdqOperator,
    QEstimate,
    SingularOperatorError,
    UnderdeterminedError,
    build_regression,
)
from .system import (
    MultiAgentSystem,
    StructuredPolicy,
    TrajectoryBatch,
    average_cost,
    embed_quadratic,
    extract_subsystem,
    rollout,
    true_q_matrix,
    x_coords,
    zero_policy,
)

AgentSet = tuple[int, ...]


class Architecture(str, Enum):
    CENTRALIZED = "centralized"
    UNDECOMPOSED_DIRECT = "undecomposed_direct"
    DIRECT = "direct"
    INDIRECT = "indirect"

    @classmethod
    def parse(cls, name: str) -> "Architecture":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown architecture {name!r}; expected one of: {valid}")


@dataclass(frozen=True)
class AgentPlan:
    """Estimation and update layout of one agent under one architecture.

    ``terms`` lists (estimation set, cost owner) pairs whose solutions are
    embedded into ``update_set`` coordinates and summed before the gradient
    step.  ``own_set`` is the set on which the agent's own estimation task
    runs, recorded for diagnostics.
    """

    agent: int
    terms: tuple[tuple[AgentSet, int], ...]
    update_set: AgentSet
    own_set: AgentSet


def architecture_plans(
    architecture: Architecture, deps: DependencySets, n_agents: int
) -> dict[int, AgentPlan]:
    """Per-agent estimation/update layout for the chosen architecture."""
    everyone = tuple(range(1, n_agents + 1))
    plans: dict[int, AgentPlan] = {}
    for i in everyone:
        grad_set = deps.gradient[i]
        if architecture is Architecture.DIRECT:
            est_for = {j: deps.direct[i] for j in grad_set}
            update_set = deps.direct[i]
            own = deps.direct[i]
        elif architecture is Architecture.INDIRECT:
            est_for = {j: deps.value[j] for j in grad_set}
            update_set = deps.direct[i]
            own = deps.value[i]
        else:  # centralized and undecomposed_direct evaluate on everything
            est_for = {j: everyone for j in grad_set}
            update_set = everyone
            own = everyone
        terms = tuple((est_for[j], j) for j in grad_set)
        plans[i] = AgentPlan(agent=i, terms=terms, update_set=update_set, own_set=own)
    return plans


def policy_gradient_update(
    policy: StructuredPolicy,
    agent: int,
    q_hat: QEstimate,
    batch: TrajectoryBatch,
    alpha: float,
) -> StructuredPolicy:
    """One gradient step on agent i's gain from an estimated quadratic.

    K_i <- K_i - 2 alpha * mean_t [ (Q z_t)_{u_i rows} x_O(t)' ] with
    z_t the batch's stacked state/control restricted to the estimate's
    index set.  Only the blocks over agent i's observation in-neighbors
    change; the sparsity pattern is preserved.
    """
    agent_set = q_hat.index_set
    if agent not in agent_set:
        raise ValueError(f"agent {agent} is not in the estimate's index set {agent_set}")
    observed = policy.graphs.observation_in_neighbors(agent)
    outside = [j for j in observed if j not in agent_set]
    if outside:
        raise ValueError(
            f"agent {agent} observes {outside} outside the estimate's index set {agent_set}"
        )
    if not observed:
        return policy

    t_length = batch.length
    z = np.hstack([batch.states(agent_set)[:t_length], batch.controls(agent_set)])
    w = z @ q_hat.matrix
    nx_set = policy.n_x * len(agent_set)
    pos = sorted(agent_set).index(agent)
    cols = nx_set + pos * policy.n_u + np.arange(policy.n_u)
    x_obs = batch.x[:t_length, x_coords(observed, policy.n_x)]
    grad = (w[:, cols].T @ x_obs) / t_length
    new_row = policy.row_gain(agent) - 2.0 * alpha * grad
    return policy.with_row_gain(agent, new_row)


@dataclass(frozen=True)
class MalspiConfig:
    """Tuning and determinism knobs of one policy-iteration run."""

    n_iterations: int = 15
    t_rollout: int = 500
    t_eval: int = 500
    sigma_eta: float = 1.0
    alpha: float = 1e-3
    zeta: float = 1e-6
    seed: int = 0
    x0: Optional[np.ndarray] = None
    sigma0: float = 1.0
    k0: Optional[StructuredPolicy] = None
    force_full_sets: bool = False
    oracle_diagnostics: bool = False


@dataclass(frozen=True)
class AgentDiagnostics:
    """Per-agent evaluation record of one iteration."""

    agent: int
    set_size: int
    feature_dim: int
    sigma_min: Optional[float]
    flags: tuple[str, ...]
    q_error: Optional[float]


@dataclass(frozen=True)
class IterationRecord:
    """One policy iterate: the updated gain, its cost, and diagnostics.

    Record 0 holds the initial policy and its evaluation; records l >= 1
    hold post-update iterates.
    """

    iteration: int
    gain: np.ndarray
    eval_cost: float
    eval_diverged: bool
    agents: tuple[AgentDiagnostics, ...]
    wall_eval_s: float
    wall_update_s: float


def _embed_packed(
    q: np.ndarray, small: AgentSet, big: AgentSet, n_x: int, n_u: int
) -> np.ndarray:
    if small == big:
        return q
    return svec(embed_quadratic(smat(q), small, big, n_x, n_u))


def _oracle_error(
    system: MultiAgentSystem,
    eval_policy: StructuredPolicy,
    update_set: AgentSet,
    owners: Iterable[int],
    q_aggregate: np.ndarray,
) -> tuple[Optional[float], tuple[str, ...]]:
    try:
        sub = extract_subsystem(system, eval_policy, update_set, cost_owners=owners)
        q_true = true_q_matrix(sub)
    except InstabilityError:
        return None, ("oracle_unstable",)
    return float(np.linalg.norm(q_aggregate - svec(q_true))), ()


def run_malspi(
    system: MultiAgentSystem,
    architecture: Architecture,
    config: MalspiConfig,
) -> list[IterationRecord]:
    """Run the full policy-iteration loop and record every iterate.

    A fresh trajectory is collected every iteration under the fixed play
    policy K0 with exploration noise; evaluation inside the temporal-
    difference features uses the current iterate.  A singular or
    underdetermined regression flags the affected agents for that iteration
    and carries their gains forward unchanged.  Deterministic given the
    config seed, regardless of how per-agent work is scheduled.
    """
    graphs = system.graphs
    n = graphs.n_agents
    k0 = config.k0 if config.k0 is not None else zero_policy(graphs, system.n_x, system.n_u)
    rho0 = spectral_radius(system.a + system.b @ k0.gain)
    if rho0 >= 1.0:
        raise InstabilityError("initial policy does not stabilize the system", rho0)

    deps = DependencySets.full(n) if config.force_full_sets else dependency_sets(graphs)
    plans = architecture_plans(architecture, deps, n)

    seed_children = np.random.SeedSequence(config.seed).spawn(2 * config.n_iterations + 1)
    policy = k0
    records: list[IterationRecord] = []

    cost0 = average_cost(
        system, policy, config.t_eval, seed_children[0], x0=config.x0, sigma0=config.sigma0
    )
    records.append(
        IterationRecord(
            iteration=0,
            gain=policy.gain,
            eval_cost=cost0.value,
            eval_diverged=cost0.diverged,
            agents=(),
            wall_eval_s=0.0,
            wall_update_s=0.0,
        )
    )

    for it in range(1, config.n_iterations + 1):
        batch = rollout(
            system,
            k0,
            config.t_rollout,
            config.sigma_eta,
            seed_children[2 * it - 1],
            x0=config.x0,
            sigma0=config.sigma0,
        )

        # --- policy evaluation: one factorization per distinct estimation set
        t0 = time.perf_counter()
        owners_by_set: dict[AgentSet, set[int]] = {}
        for plan in plans.values():
            for est_set, owner in plan.terms:
                owners_by_set.setdefault(est_set, set()).add(owner)
        solutions: dict[tuple[AgentSet, int], np.ndarray] = {}
        set_flags: dict[AgentSet, tuple[str, ...]] = {}
        set_sigma: dict[AgentSet, Optional[float]] = {}
        for est_set in sorted(owners_by_set):
            owners = tuple(sorted(owners_by_set[est_set]))
            try:
                bundle = build_regression(batch, est_set, policy, owners, system)
            except UnderdeterminedError:
                set_flags[est_set] = ("underdetermined",)
                set_sigma[est_set] = None
                continue
            try:
                op = LstdqOperator(bundle)
            except SingularOperatorError:
                set_flags[est_set] = ("singular",)
                set_sigma[est_set] = None
                continue
            set_flags[est_set] = ()
            set_sigma[est_set] = op.diagnostics.sigma_min
            for owner in owners:
                solutions[(est_set, owner)] = op.solve_cost(bundle.owner_costs[owner])
        wall_eval = time.perf_counter() - t0

        # --- policy improvement: aggregate, floor eigenvalues, gradient step
        t1 = time.perf_counter()
        new_policy = policy
        diags: list[AgentDiagnostics] = []
        for i in graphs.agents:
            plan = plans[i]
            own_m = (system.n_x + system.n_u) * len(plan.own_set)
            own_d = own_m * (own_m + 1) // 2
            if not plan.terms:
                diags.append(
                    AgentDiagnostics(
                        agent=i,
                        set_size=len(plan.own_set),
                        feature_dim=own_d,
                        sigma_min=None,
                        flags=("empty_gradient_set",),
                        q_error=None,
                    )
                )
                continue
            flags: tuple[str, ...] = ()
            for est_set, _ in plan.terms:
                flags = flags + set_flags.get(est_set, ())
            flags = tuple(dict.fromkeys(flags))
            if flags:
                diags.append(
                    AgentDiagnostics(
                        agent=i,
                        set_size=len(plan.own_set),
                        feature_dim=own_d,
                        sigma_min=set_sigma.get(plan.own_set),
                        flags=flags,
                        q_error=None,
                    )
                )
                continue

            aggregate = None
            for est_set, owner in plan.terms:
                packed = _embed_packed(
                    solutions[(est_set, owner)],
                    est_set,
                    plan.update_set,
                    system.n_x,
                    system.n_u,
                )
                aggregate = packed if aggregate is None else aggregate + packed

            q_error = None
            if config.oracle_diagnostics:
                owners = tuple(owner for _, owner in plan.terms)
                q_error, oracle_flags = _oracle_error(
                    system, policy, plan.update_set, owners, aggregate
                )
                flags = flags + oracle_flags

            floored = psd_project(smat(aggregate), config.zeta)
            estimate = QEstimate(
                q=svec(floored),
                matrix=floored,
                index_set=plan.update_set,
                diagnostics=None,
                zeta=config.zeta,
            )
            new_policy = policy_gradient_update(new_policy, i, estimate, batch, config.alpha)
            diags.append(
                AgentDiagnostics(
                    agent=i,
                    set_size=len(plan.own_set),
                    feature_dim=own_d,
                    sigma_min=set_sigma.get(plan.own_set),
                    flags=flags,
                    q_error=q_error,
                )
            )
        wall_update = time.perf_counter() - t1

        policy = new_policy
        cost = average_cost(
            system, policy, config.t_eval, seed_children[2 * it], x0=config.x0, sigma0=config.sigma0
        )
        records.append(
            IterationRecord(
                iteration=it,
                gain=policy.gain,
                eval_cost=cost.value,
                eval_diverged=cost.diverged,
                agents=tuple(diags),
                wall_eval_s=wall_eval,
                wall_update_s=wall_update,
            )
        )
    return records
