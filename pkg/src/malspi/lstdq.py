"""Least-squares temporal-difference estimation of quadratic Q-functions.

Policy evaluation works off-policy from one trajectory.  For a stacked
sample z_t = [x_set(t); u_set(t)] the feature row is phi_t = svec(z_t z_t'),
the on-policy next-step row psi_{t+1} uses x_set(t+1) with the evaluation
gain's action, and a constant noise row f = svec(sigma_w^2 [I; K][I; K]')
absorbs the average-cost offset.  The packed Q parameter solves the
error-in-variables system

    q = (Phi' (Phi - Psi_plus + F))^{-1} Phi' c_hat,

computed through a column-pivoted QR factorization, never an explicit
inverse.  With zero process noise the relation holds pathwise and the
recovery is exact up to conditioning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional

import numpy as np
import scipy.linalg

from .linalg import psd_project, smat, svec, svec_dim
from .system import (
    MultiAgentSystem,
    StructuredPolicy,
    TrajectoryBatch,
    extract_subsystem,
    u_coords,
    x_coords,
)

AgentSet = tuple[int, ...]

# Exact minimum singular values are reported only up to this operator size;
# larger factorizations fall back to the rank-revealing QR diagonal.
_EXACT_SIGMA_LIMIT = 1500

_RCOND_THRESHOLD = 1e-10


class UnderdeterminedError(ValueError):
    """Trajectory shorter than the feature dimension."""

    def __init__(self, t_length: int, required: int):
        super().__init__(
            f"trajectory length {t_length} is below the feature dimension; "
            f"at least {required} samples are required"
        )
        self.t_length = t_length
        self.required = required


class SingularOperatorError(RuntimeError):
    """Regression operator numerically singular."""

    def __init__(self, detail: str):
        super().__init__(
            f"LSTDQ operator is singular or ill-conditioned ({detail}); "
            "collect a longer trajectory or increase the exploration noise"
        )


@dataclass(frozen=True)
class SolveDiagnostics:
    """Conditioning record of one LSTDQ factorization."""

    feature_dim: int
    t_length: int
    rdiag_min: float
    rdiag_max: float
    sigma_min: Optional[float]
    threshold: float


@dataclass(frozen=True)
class QEstimate:
    """Packed and matrix forms of an estimated quadratic Q-function.

    ``zeta`` records the eigenvalue floor when the estimate has been
    projected; None marks a raw least-squares solution.
    """

    q: np.ndarray
    matrix: np.ndarray
    index_set: AgentSet
    diagnostics: Optional[SolveDiagnostics] = None
    zeta: Optional[float] = None

    def project(self, zeta: float) -> "QEstimate":
        """Eigenvalue-floored copy; idempotent for matching zeta."""
        projected = psd_project(self.matrix, zeta)
        return replace(self, q=svec(projected), matrix=projected, zeta=zeta)


@dataclass(frozen=True)
class RegressionBundle:
    """Feature matrices and costs of one restricted trajectory.

    ``phi`` and ``psi_plus`` are T x d; the noise row ``f_row`` is constant
    across time.  ``owner_costs`` keeps each cost owner's unaggregated
    stage-cost sequence so callers may solve per owner; ``c_hat`` is their
    sum in ascending owner order.
    """

    index_set: AgentSet
    cost_owners: AgentSet
    n_x: int
    n_u: int
    phi: np.ndarray
    psi_plus: np.ndarray
    f_row: np.ndarray
    c_hat: np.ndarray
    owner_costs: Mapping[int, np.ndarray]
    k_eval: np.ndarray
    sigma_w: float

    @property
    def m(self) -> int:
        return (self.n_x + self.n_u) * len(self.index_set)

    @property
    def d(self) -> int:
        return svec_dim(self.m)

    @property
    def t_length(self) -> int:
        return self.phi.shape[0]

    @property
    def f(self) -> np.ndarray:
        """Noise-correction features broadcast to T x d."""
        return np.broadcast_to(self.f_row, self.phi.shape)


def _svec_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise svec of outer products z_t z_t' without forming the T x m x m cube."""
    m = z.shape[1]
    rows, cols = np.triu_indices(m)
    weights = np.where(rows == cols, 1.0, math.sqrt(2.0))
    out = z[:, rows]
    out *= z[:, cols]
    out *= weights
    return out


def _owner_cost_sequence(
    system: MultiAgentSystem, batch: TrajectoryBatch, owner: int, t_length: int
) -> np.ndarray:
    cost_set = system.graphs.cost_in_neighbors(owner)
    if not cost_set:
        return np.zeros(t_length)
    xc = batch.x[:t_length, x_coords(cost_set, system.n_x)]
    uc = batch.u[:t_length, u_coords(cost_set, system.n_u)]
    s_blk = system.s_blocks[owner]
    r_blk = system.r_blocks[owner]
    return np.einsum("ti,ij,tj->t", xc, s_blk, xc) + np.einsum("ti,ij,tj->t", uc, r_blk, uc)


def build_regression(
    batch: TrajectoryBatch,
    index_set: Iterable[int],
    eval_policy: StructuredPolicy,
    cost_owner_set: Iterable[int],
    system: MultiAgentSystem,
    *,
    require_closed: bool = True,
    allow_underdetermined: bool = False,
) -> RegressionBundle:
    """Assemble the error-in-variables regression for one agent subset.

    The evaluation policy is restricted to the subset, which must be closed
    for exactness (override with ``require_closed=False``).  The aggregated
    cost sums the unaveraged stage costs of ``cost_owner_set``; each owner's
    cost in-neighbors must lie inside the subset.  Raises
    UnderdeterminedError when the trajectory is shorter than the feature
    dimension unless explicitly allowed.
    """
    sub = extract_subsystem(
        system,
        eval_policy,
        index_set,
        cost_owners=cost_owner_set,
        require_closed=require_closed,
    )
    agents = sub.agents
    t_length = batch.length
    m = sub.m
    d = svec_dim(m)
    if t_length < d and not allow_underdetermined:
        raise UnderdeterminedError(t_length, d)

    xs = batch.states(agents)
    us = batch.controls(agents)
    z_now = np.hstack([xs[:t_length], us])
    x_next = xs[1 : t_length + 1]
    z_next = np.hstack([x_next, x_next @ sub.k.T])
    g = np.vstack([np.eye(sub.nx), sub.k])
    f_row = svec(sub.sigma_w**2 * (g @ g.T))

    owners = tuple(sorted(set(int(a) for a in cost_owner_set)))
    owner_costs = {j: _owner_cost_sequence(system, batch, j, t_length) for j in owners}
    c_hat = np.zeros(t_length)
    for j in owners:
        c_hat = c_hat + owner_costs[j]

    return RegressionBundle(
        index_set=agents,
        cost_owners=owners,
        n_x=system.n_x,
        n_u=system.n_u,
        phi=_svec_rows(z_now),
        psi_plus=_svec_rows(z_next),
        f_row=f_row,
        c_hat=c_hat,
        owner_costs=owner_costs,
        k_eval=sub.k,
        sigma_w=sub.sigma_w,
    )


class LstdqOperator:
    """Factorized regression operator Phi' (Phi - Psi_plus + F).

    Factorizes once with column-pivoted QR and solves for any number of
    cost right-hand sides.  Raises SingularOperatorError at construction
    when the rank-revealing diagonal falls below the relative threshold.
    """

    def __init__(self, bundle: RegressionBundle, *, rcond: float = _RCOND_THRESHOLD):
        self.bundle = bundle
        operator = bundle.phi.T @ (bundle.phi - bundle.psi_plus + bundle.f_row[None, :])
        q_fac, r_fac, piv = scipy.linalg.qr(operator, mode="economic", pivoting=True)
        rdiag = np.abs(np.diag(r_fac))
        rd_max = float(rdiag.max()) if rdiag.size else 0.0
        rd_min = float(rdiag.min()) if rdiag.size else 0.0
        sigma_min = None
        if bundle.d <= _EXACT_SIGMA_LIMIT and rd_max > 0.0:
            sigma_min = float(scipy.linalg.svdvals(r_fac)[-1])
        self.diagnostics = SolveDiagnostics(
            feature_dim=bundle.d,
            t_length=bundle.t_length,
            rdiag_min=rd_min,
            rdiag_max=rd_max,
            sigma_min=sigma_min,
            threshold=rcond,
        )
        if rd_max == 0.0 or rd_min <= rcond * rd_max:
            raise SingularOperatorError(
                f"pivoted-QR diagonal range [{rd_min:.3g}, {rd_max:.3g}]"
            )
        self._q_fac = q_fac
        self._r_fac = r_fac
        self._piv = piv

    def solve_cost(self, cost: np.ndarray) -> np.ndarray:
        """Packed Q parameter for one aggregated cost sequence."""
        rhs = self.bundle.phi.T @ np.asarray(cost, dtype=float)
        y = scipy.linalg.solve_triangular(self._r_fac, self._q_fac.T @ rhs, lower=False)
        out = np.empty_like(y)
        out[self._piv] = y
        return out


def lstdq_solve(bundle: RegressionBundle, *, rcond: float = _RCOND_THRESHOLD) -> QEstimate:
    """Solve the regression for the bundle's aggregated cost.

    Returns the raw (unprojected) estimate with conditioning diagnostics;
    apply ``QEstimate.project`` for the eigenvalue-floored version.
    """
    op = LstdqOperator(bundle, rcond=rcond)
    q = op.solve_cost(bundle.c_hat)
    return QEstimate(
        q=q,
        matrix=smat(q),
        index_set=bundle.index_set,
        diagnostics=op.diagnostics,
    )
