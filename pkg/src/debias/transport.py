"""Exact discrete optimal transport at desk scale.

``solve_transport`` runs a transportation simplex (see ``_kernels``) on a
balanced problem with arbitrary nonnegative marginal weights; resampled
empirical distributions carry rational weights k_i/n, so the solver is not
restricted to uniform marginals.  ``brute_force_transport`` enumerates
permutation couplings as an independent oracle for small uniform problems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .observations import ContractError


class TransportError(ValueError):
    """Invalid transport problem or solver failure."""


@dataclass(frozen=True)
class TransportProblem:
    """Balanced transport instance: cost (m, n), supply (m,), demand (n,)."""

    cost: np.ndarray
    supply: np.ndarray
    demand: np.ndarray

    @staticmethod
    def build(cost, supply=None, demand=None) -> "TransportProblem":
        cost = np.atleast_2d(np.asarray(cost, dtype=float))
        m, n = cost.shape
        supply = np.full(m, 1.0 / m) if supply is None else np.asarray(supply, dtype=float)
        demand = np.full(n, 1.0 / n) if demand is None else np.asarray(demand, dtype=float)
        if supply.shape != (m,) or demand.shape != (n,):
            raise TransportError("marginal lengths must match the cost matrix")
        if np.any(supply < 0) or np.any(demand < 0):
            raise TransportError("marginal weights must be nonnegative")
        if abs(supply.sum() - 1.0) > 1e-10 or abs(demand.sum() - 1.0) > 1e-10:
            raise TransportError("supply and demand must each sum to 1 within 1e-10")
        if not np.all(np.isfinite(cost)) or np.any(cost < 0):
            raise TransportError("costs must be finite and nonnegative")
        return TransportProblem(cost, supply, demand)


@dataclass
class TransportPlan:
    """Optimal coupling, its objective value, and the dual potentials."""

    coupling: np.ndarray
    value: float
    dual_row: np.ndarray
    dual_col: np.ndarray

    def dual_value(self, problem: TransportProblem) -> float:
        return float(self.dual_row @ problem.supply + self.dual_col @ problem.demand)


def squared_distance_cost(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean costs between rows of x (m, d) and y (n, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("mnd,mnd->mn", diff, diff)


def solve_transport(problem: TransportProblem) -> TransportPlan:
    """Optimal transport plan by the transportation simplex.

    Zero-weight rows and columns are pruned before solving; their dual
    potentials are backfilled so feasibility ``u_i + v_j <= cost_ij`` holds
    everywhere.
    """
    cost, supply, demand = problem.cost, problem.supply, problem.demand
    m, n = cost.shape
    rows = np.flatnonzero(supply > 0)
    cols = np.flatnonzero(demand > 0)
    if rows.size == 0 or cols.size == 0:
        raise TransportError("a balanced problem cannot have empty marginals")

    sub_cost = np.ascontiguousarray(cost[np.ix_(rows, cols)])
    flow, u, v, status, _ = _kernels.transport_simplex(
        sub_cost, supply[rows].copy(), demand[cols].copy(), 1e-11
    )
    if status != 0:
        raise TransportError("transportation simplex hit its iteration cap")

    coupling = np.zeros((m, n))
    coupling[np.ix_(rows, cols)] = flow
    dual_row = np.full(m, -np.inf)
    dual_col = np.full(n, -np.inf)
    dual_row[rows] = u
    dual_col[cols] = v
    # pruned nodes get the tightest feasible potential
    for i in range(m):
        if not np.isfinite(dual_row[i]):
            dual_row[i] = np.min(cost[i, cols] - dual_col[cols])
    for j in range(n):
        if not np.isfinite(dual_col[j]):
            dual_col[j] = np.min(cost[rows, j] - dual_row[rows])
    value = float(np.sum(coupling * cost))
    return TransportPlan(coupling, value, dual_row, dual_col)


def transport_value(x, y, wx=None, wy=None) -> float:
    """Squared 2-Wasserstein distance between two weighted point clouds."""
    problem = TransportProblem.build(squared_distance_cost(x, y), wx, wy)
    return solve_transport(problem).value


def brute_force_transport(problem: TransportProblem) -> float:
    """Oracle for uniform square problems: minimum over all permutation couplings.

    Valid because the uniform n-by-n transportation polytope has permutation
    matrices (scaled by 1/n) as its vertices.
    """
    m, n = problem.cost.shape
    if m != n or n > 7:
        raise ContractError(f"brute force needs n = m <= 7, got {m}x{n}")
    if np.any(np.abs(problem.supply - 1.0 / n) > 1e-12) or np.any(np.abs(problem.demand - 1.0 / n) > 1e-12):
        raise ContractError("brute force needs uniform marginals")
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = sum(float(problem.cost[i, perm[i]]) for i in range(n)) / n
        if total < best:
            best = total
    return best
