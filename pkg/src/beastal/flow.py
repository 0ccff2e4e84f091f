"""Steady-state pressures of a resistor network.

Free-node pressures minimise total dissipation ``sum(dp**2 / R)`` with the
fixed (Dirichlet) nodes held at their boundary values. Stationarity is
Kirchhoff's current law at every free node, i.e. a reduced weighted-Laplacian
system that is symmetric positive definite whenever every free node has a
path to a fixed node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .graph import Topology


class SolverError(RuntimeError):
    """Raised when the reduced Laplacian is singular."""


class Mode(enum.Enum):
    MEASUREMENT = "measurement"
    UPDATE = "update"


@dataclass(frozen=True)
class BoundaryConditions:
    """Fixed node pressures for one solve.

    ``nodes`` and ``values`` are parallel arrays. Ground is always included
    at pressure 0 by the constructors below.
    """

    nodes: np.ndarray
    values: np.ndarray
    mode: Mode

    @classmethod
    def measurement(cls, topology: Topology, x) -> "BoundaryConditions":
        x = np.asarray(x, dtype=float)
        if x.shape != (topology.n_inputs,):
            raise ValueError(f"expected {topology.n_inputs} input pressures, got shape {x.shape}")
        nodes = np.append(topology.inputs, topology.ground)
        return cls(nodes, np.append(x, 0.0), Mode.MEASUREMENT)

    @classmethod
    def update(cls, topology: Topology, x_update, y_update) -> "BoundaryConditions":
        x_update = np.asarray(x_update, dtype=float)
        y_update = np.asarray(y_update, dtype=float)
        if x_update.shape != (topology.n_inputs,) or y_update.shape != (topology.n_outputs,):
            raise ValueError("update boundary does not match topology dimensions")
        nodes = np.concatenate([topology.inputs, topology.outputs, [topology.ground]])
        return cls(nodes, np.concatenate([x_update, y_update, [0.0]]), Mode.UPDATE)


def laplacian(topology: Topology, R: np.ndarray) -> np.ndarray:
    k = 1.0 / np.asarray(R, dtype=float)
    U = topology.incidence
    return U.T @ (k[:, None] * U)


def _isolated_free_nodes(topology: Topology, R, free: np.ndarray, fixed: np.ndarray) -> list[int]:
    # free nodes with no conducting path to any fixed node
    n = topology.n_nodes
    conducting = np.isfinite(1.0 / np.asarray(R)) & (np.asarray(R) > 0)
    adj = np.zeros((n, n))
    adj[topology.tails[conducting], topology.heads[conducting]] = 1.0
    _, labels = connected_components(adj, directed=False)
    anchored = set(labels[fixed])
    return [int(i) for i in free if labels[i] not in anchored]


def solve_pressures(topology: Topology, R, bc: BoundaryConditions) -> np.ndarray:
    """Node pressures minimising dissipation under ``bc``.

    Returns the full per-node pressure vector; fixed entries are exactly the
    boundary values. When every node is fixed no linear solve happens.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (topology.n_edges,):
        raise ValueError(f"expected {topology.n_edges} resistances, got shape {R.shape}")
    if bc.nodes.size == 0:
        raise ValueError("at least one node must be fixed")
    if np.any(R <= 0):
        raise ValueError("resistances must be strictly positive")

    p = np.zeros(topology.n_nodes)
    p[bc.nodes] = bc.values
    free = np.setdiff1d(np.arange(topology.n_nodes), bc.nodes)
    if free.size == 0:
        return p

    L = laplacian(topology, R)
    rhs = -L[np.ix_(free, bc.nodes)] @ bc.values
    try:
        factor = scipy.linalg.cho_factor(L[np.ix_(free, free)])
    except np.linalg.LinAlgError:
        bad = _isolated_free_nodes(topology, R, free, bc.nodes)
        raise SolverError(f"singular reduced Laplacian; nodes without a path to a fixed node: {bad}") from None
    p[free] = scipy.linalg.cho_solve(factor, rhs)
    return p


def measure_outputs(topology: Topology, R, x) -> np.ndarray:
    """Output pressures for input pressures ``x`` (Measurement modality).

    ``x`` may be a single vector or a 2-D batch of shape (n_samples, n_inputs).
    Single-layer networks use the closed form
    ``y_i = sum_j k_ij x_j / sum_l k_il`` (l over inputs and ground); networks
    with a hidden layer go through the Laplacian solve.
    """
    R = np.asarray(R, dtype=float)
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    X = np.atleast_2d(x)
    if X.shape[1] != topology.n_inputs:
        raise ValueError(f"expected {topology.n_inputs} inputs, got {X.shape[1]}")

    if not topology.has_hidden:
        k = 1.0 / R
        n_io = topology.n_inputs * topology.n_outputs
        K = k[:n_io].reshape(topology.n_outputs, topology.n_inputs)
        Y = (X @ K.T) / (K.sum(axis=1) + k[n_io:])
    else:
        Y = _measure_layered(topology, R, X)
    return Y if batched else Y[0]


def _measure_layered(topology: Topology, R, X: np.ndarray) -> np.ndarray:
    L = laplacian(topology, R)
    fixed = np.append(topology.inputs, topology.ground)
    free = np.setdiff1d(np.arange(topology.n_nodes), fixed)
    try:
        factor = scipy.linalg.cho_factor(L[np.ix_(free, free)])
    except np.linalg.LinAlgError:
        bad = _isolated_free_nodes(topology, R, free, fixed)
        raise SolverError(f"singular reduced Laplacian; nodes without a path to a fixed node: {bad}") from None
    # ground is at 0 so only the input columns contribute
    rhs = -L[np.ix_(free, topology.inputs)] @ X.T
    P = scipy.linalg.cho_solve(factor, rhs)
    out_pos = np.searchsorted(free, topology.outputs)
    return P[out_pos].T


def edge_pressure_drops(topology: Topology, p) -> np.ndarray:
    """Tail-minus-head pressure drop on every edge (equals ``U @ p``)."""
    p = np.asarray(p, dtype=float)
    return p[..., topology.tails] - p[..., topology.heads]


def power_dissipation(dp, R) -> float:
    dp = np.asarray(dp, dtype=float)
    R = np.asarray(R, dtype=float)
    if dp.shape != R.shape:
        raise ValueError("pressure drops and resistances differ in length")
    return float(np.sum(dp * dp / R))
