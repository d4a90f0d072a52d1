"""Directed coupling graphs over agents and the dependency sets they induce.

Three directed graphs over agents 1..N describe which agents enter each
agent's dynamics (state graph), observations (observation graph), and stage
cost (cost graph).  An edge (i, j) means agent i appears in agent j's index
set.  Everything downstream (subsystem extraction, per-agent Q-function
supports, gradient aggregation) is driven by reachability closures over the
union of the state and observation graphs:

* ``reachability_set(g, i)``       agents with a directed path to i, plus i
* ``value_dependence_set(g, i)``   union of reachability sets over i's cost
                                   in-neighbors; the exact support of agent
                                   i's local Q-function
* ``gradient_dependence_set``      transpose relation: agents whose local Q
                                   depends on i
* ``direct_dependence_set``        union of value sets over the gradient set;
                                   the support of the aggregated Q used by the
                                   direct learning architecture

All operations are pure functions of immutable inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

Edge = tuple[int, int]
AgentSet = tuple[int, ...]


class GraphValidationError(ValueError):
    """Raised for out-of-range endpoints or an invalid agent count."""


def _validate_edges(name: str, edges: Iterable[Iterable[int]], n_agents: int) -> frozenset[Edge]:
    out = set()
    for edge in edges:
        pair = tuple(int(v) for v in edge)
        if len(pair) != 2:
            raise GraphValidationError(f"{name}: edge {pair!r} is not a (from, to) pair")
        a, b = pair
        if not (1 <= a <= n_agents and 1 <= b <= n_agents):
            raise GraphValidationError(
                f"{name}: edge ({a}, {b}) has an endpoint outside 1..{n_agents}"
            )
        out.add((a, b))
    return frozenset(out)


@dataclass(frozen=True)
class CouplingGraphs:
    """State, observation, and cost coupling graphs over agents 1..n_agents.

    Edge (i, j) in ``edges_s`` means agent i's state/control enters agent j's
    dynamics; analogously for ``edges_o`` (observation) and ``edges_c``
    (cost).  Self-loops are not inserted automatically: the edge sets are
    taken verbatim.
    """

    n_agents: int
    edges_s: frozenset[Edge]
    edges_o: frozenset[Edge]
    edges_c: frozenset[Edge]

    @property
    def agents(self) -> range:
        """All agent indices, 1-indexed."""
        return range(1, self.n_agents + 1)

    def _in_neighbors(self, edges: frozenset[Edge], i: int) -> AgentSet:
        self.require_valid_agent(i)
        return tuple(sorted(j for (j, k) in edges if k == i))

    def _out_neighbors(self, edges: frozenset[Edge], i: int) -> AgentSet:
        self.require_valid_agent(i)
        return tuple(sorted(k for (j, k) in edges if j == i))

    def state_in_neighbors(self, i: int) -> AgentSet:
        """Agents whose state/control enters agent i's dynamics."""
        return self._in_neighbors(self.edges_s, i)

    def observation_in_neighbors(self, i: int) -> AgentSet:
        """Agents whose state agent i observes."""
        return self._in_neighbors(self.edges_o, i)

    def cost_in_neighbors(self, i: int) -> AgentSet:
        """Agents whose state/control enters agent i's stage cost."""
        return self._in_neighbors(self.edges_c, i)

    def cost_out_neighbors(self, i: int) -> AgentSet:
        """Agents whose stage cost depends on agent i."""
        return self._out_neighbors(self.edges_c, i)

    def require_valid_agent(self, i: int) -> None:
        if not (isinstance(i, (int,)) and 1 <= i <= self.n_agents):
            raise GraphValidationError(f"agent index {i!r} outside 1..{self.n_agents}")


def build_coupling_graphs(
    n_agents: int,
    edges_s: Iterable[Iterable[int]],
    edges_o: Iterable[Iterable[int]],
    edges_c: Iterable[Iterable[int]],
) -> CouplingGraphs:
    """Validate and deduplicate the three edge lists into a CouplingGraphs.

    Raises GraphValidationError for n_agents < 1 or any endpoint outside
    1..n_agents, naming the offending edge.
    """
    if int(n_agents) < 1:
        raise GraphValidationError(f"n_agents must be positive, got {n_agents}")
    n = int(n_agents)
    return CouplingGraphs(
        n_agents=n,
        edges_s=_validate_edges("edges_s", edges_s, n),
        edges_o=_validate_edges("edges_o", edges_o, n),
        edges_c=_validate_edges("edges_c", edges_c, n),
    )


def _so_edges(graphs: CouplingGraphs) -> frozenset[Edge]:
    return graphs.edges_s | graphs.edges_o


def _bfs(adjacency: dict[int, list[int]], start: int) -> set[int]:
    seen = {start}
    pending = [start]
    while pending:
        node = pending.pop()
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                pending.append(nxt)
    return seen


def _in_adjacency(edges: frozenset[Edge]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(b, []).append(a)
    return adj


def _out_adjacency(edges: frozenset[Edge]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    return adj


def reachability_set(graphs: CouplingGraphs, i: int) -> AgentSet:
    """Agents that reach i through the combined state/observation graph.

    Includes i itself by definition.  Computed by breadth-first traversal
    over reversed edges, O(N + |E|) per agent.
    """
    graphs.require_valid_agent(i)
    return tuple(sorted(_bfs(_in_adjacency(_so_edges(graphs)), i)))


def forward_reachability_set(graphs: CouplingGraphs, i: int) -> AgentSet:
    """Agents reachable from i through the combined state/observation graph.

    The edge-transposed counterpart of ``reachability_set``; includes i
    itself, mirroring the self-inclusion convention of the reverse set.
    """
    graphs.require_valid_agent(i)
    return tuple(sorted(_bfs(_out_adjacency(_so_edges(graphs)), i)))


def value_dependence_set(graphs: CouplingGraphs, i: int) -> AgentSet:
    """Exact support of agent i's local Q-function.

    Union of the reachability sets of agent i's cost in-neighbors.  Closed
    under the reachability relation: any member's reachability set is
    contained in the result.
    """
    graphs.require_valid_agent(i)
    adj = _in_adjacency(_so_edges(graphs))
    members: set[int] = set()
    for k in graphs.cost_in_neighbors(i):
        members |= _bfs(adj, k)
    return tuple(sorted(members))


def gradient_dependence_set(graphs: CouplingGraphs, i: int) -> AgentSet:
    """Agents whose local Q-function depends on agent i (transpose relation)."""
    graphs.require_valid_agent(i)
    return tuple(
        sorted(j for j in graphs.agents if i in value_dependence_set(graphs, j))
    )


def direct_dependence_set(graphs: CouplingGraphs, i: int) -> AgentSet:
    """Union of value dependence sets over agent i's gradient set.

    Support of the aggregated Q-function that the direct architecture
    estimates for agent i.
    """
    graphs.require_valid_agent(i)
    members: set[int] = set()
    for j in gradient_dependence_set(graphs, i):
        members.update(value_dependence_set(graphs, j))
    return tuple(sorted(members))


@dataclass(frozen=True)
class DependencySets:
    """Per-agent dependency sets, all computed once from the graphs.

    ``reach[i]`` is the reachability set, ``value[i]`` the local Q support,
    ``gradient[i]`` the set of agents whose Q depends on i, and
    ``direct[i]`` the union of value sets over ``gradient[i]``.
    """

    n_agents: int
    reach: dict[int, AgentSet]
    value: dict[int, AgentSet]
    gradient: dict[int, AgentSet]
    direct: dict[int, AgentSet]

    @classmethod
    def full(cls, n_agents: int) -> "DependencySets":
        """Sets forced to the full agent set (collapses all architectures)."""
        everyone = tuple(range(1, n_agents + 1))
        full_map = {i: everyone for i in everyone}
        return cls(
            n_agents=n_agents,
            reach=dict(full_map),
            value=dict(full_map),
            gradient=dict(full_map),
            direct=dict(full_map),
        )


def dependency_sets(graphs: CouplingGraphs) -> DependencySets:
    """Compute reachability, value, gradient, and direct sets for all agents."""
    adj = _in_adjacency(_so_edges(graphs))
    reach = {i: tuple(sorted(_bfs(adj, i))) for i in graphs.agents}
    value: dict[int, AgentSet] = {}
    for i in graphs.agents:
        members: set[int] = set()
        for k in graphs.cost_in_neighbors(i):
            members.update(reach[k])
        value[i] = tuple(sorted(members))
    gradient = {
        i: tuple(sorted(j for j in graphs.agents if i in value[j]))
        for i in graphs.agents
    }
    direct = {}
    for i in graphs.agents:
        members = set()
        for j in gradient[i]:
            members.update(value[j])
        direct[i] = tuple(sorted(members))
    return DependencySets(
        n_agents=graphs.n_agents, reach=reach, value=value, gradient=gradient, direct=direct
    )


def value_dependency_edges(graphs: CouplingGraphs) -> frozenset[Edge]:
    """Edges (j, i) of the value dependency graph: j in agent i's Q support."""
    deps = dependency_sets(graphs)
    return frozenset((j, i) for i in graphs.agents for j in deps.value[i])


def is_closed_set(graphs: CouplingGraphs, agent_set: Iterable[int]) -> bool:
    """True when the set contains every agent that reaches any of its members."""
    members = set(agent_set)
    adj = _in_adjacency(_so_edges(graphs))
    return all(set(adj.get(j, ())) <= members for j in members)


def missing_closure_agent(graphs: CouplingGraphs, agent_set: Iterable[int]) -> Optional[int]:
    """An agent that violates closure of the set, or None when closed."""
    members = set(agent_set)
    adj = _in_adjacency(_so_edges(graphs))
    for j in sorted(members):
        for pred in sorted(adj.get(j, ())):
            if pred not in members:
                return pred
    return None


@dataclass(frozen=True)
class GraphicalConditionReport:
    """Outcome of the necessary-and-sufficient coupling conditions.

    ``cond_a`` evaluates whether some agent stays outside agent i's direct
    dependence set, via the forward-reachability / cost-successor
    intersection test.  ``direct_set_proper`` is the direct cardinality
    check it must match.  ``cond_b`` (only when a partner j is supplied)
    tests strict containment of agent j's value set in i's direct set, with
    ``value_set_strictly_contained`` the direct check.
    """

    agent: int
    cond_a: bool
    direct_set_proper: bool
    partner: Optional[int] = None
    cond_b: Optional[bool] = None
    value_set_strictly_contained: Optional[bool] = None


def check_graphical_conditions(
    graphs: CouplingGraphs, i: int, j: Optional[int] = None
) -> GraphicalConditionReport:
    """Evaluate the graphical sample-efficiency conditions for agent i.

    Condition (a): there exists an agent k such that no forward-reachable
    agent of i and no forward-reachable agent of k share a cost successor.
    Equivalent to the direct dependence set being a proper subset of all
    agents.

    Condition (b), for j in agent i's gradient set: there exist an agent k
    outside j's value set and forward-reachable agents m (of i) and p (of k)
    sharing a cost successor.  Equivalent to j's value set being strictly
    contained in i's direct set.  Any shared cost successor found this way
    necessarily lies in i's gradient set.

    Raises GraphValidationError when j is given but not in i's gradient set.
    """
    graphs.require_valid_agent(i)
    deps = dependency_sets(graphs)
    fwd = {a: forward_reachability_set(graphs, a) for a in graphs.agents}
    cost_succ = {a: set(graphs.cost_out_neighbors(a)) for a in graphs.agents}

    def shares_cost_successor(a: int, b: int) -> bool:
        return any(cost_succ[m] & cost_succ[p] for m in fwd[a] for p in fwd[b])

    cond_a = any(not shares_cost_successor(i, k) for k in graphs.agents)
    direct_set_proper = len(deps.direct[i]) < graphs.n_agents

    cond_b = None
    strict = None
    if j is not None:
        graphs.require_valid_agent(j)
        if j not in deps.gradient[i]:
            raise GraphValidationError(
                f"agent {j} is not in the gradient dependence set of agent {i}"
            )
        outside = [k for k in graphs.agents if k not in deps.value[j]]
        cond_b = any(shares_cost_successor(i, k) for k in outside)
        strict = set(deps.value[j]) < set(deps.direct[i])

    return GraphicalConditionReport(
        agent=i,
        cond_a=cond_a,
        direct_set_proper=direct_set_proper,
        partner=j,
        cond_b=cond_b,
        value_set_strictly_contained=strict,
    )
