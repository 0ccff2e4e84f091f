"""Reference methods to compare BEASTAL against.

Exact online gradient descent on conductances, the one-shot analytic scheme,
cosine-similarity diagnostics and the hidden-layer comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import measure_outputs
from .graph import Topology, build_topology
from .rules import DEFAULT_R_MIN, Rule
from .tasks import RegressionTask, desired_output
from .trainer import TrainingTrace, make_config, train

R_CAP = 1e9
N_EVAL = 1000


def _require_single_layer(topology: Topology):
    if topology.has_hidden:
        raise ValueError("only single-layer topologies are supported here")


def conductance_sums(k, topology: Topology) -> np.ndarray:
    """Total conductance into each output node (inputs plus ground)."""
    n_io = topology.n_inputs * topology.n_outputs
    K = np.asarray(k)[:n_io].reshape(topology.n_outputs, topology.n_inputs)
    return K.sum(axis=1) + np.asarray(k)[n_io:]


def gd_gradient(k, x, y, yhat, topology: Topology) -> np.ndarray:
    """Exact per-edge gradient of ``c = mean((yhat - y(k))**2)`` w.r.t. conductances."""
    _require_single_layer(topology)
    k = np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    err = np.asarray(yhat, dtype=float) - y
    n_in, n_out = topology.n_inputs, topology.n_outputs
    S = conductance_sums(k, topology)
    g_io = (y[:, None] - x[None, :]) * (err / S)[:, None]
    g_gnd = y * err / S
    return (2.0 / n_out) * np.concatenate([g_io.ravel(), g_gnd])


@dataclass
class GDTrace:
    loss_norm: np.ndarray
    k: np.ndarray
    clamp_events: int

    @property
    def R(self) -> np.ndarray:
        return 1.0 / self.k


def gd_train(task: RegressionTask, topology: Topology, alpha: float, steps: int, seed: int,
             R0=None) -> GDTrace:
    """Online gradient descent acting directly on conductances.

    Inputs are drawn with the same generator sequence as :func:`train`, so
    equal seeds give paired runs. Conductances are floored at ``1 / R_CAP``.
    """
    _require_single_layer(topology)
    rng = np.random.default_rng(seed)
    k = 1.0 / (np.ones(topology.n_edges) if R0 is None else np.asarray(R0, dtype=float))
    k_min = 1.0 / R_CAP
    losses = np.empty(steps)
    clamps = 0
    for t in range(steps):
        x = rng.uniform(0.0, 1.0, topology.n_inputs)
        yhat = desired_output(task, x)
        y = measure_outputs(topology, 1.0 / k, x)
        losses[t] = np.mean((yhat - y) ** 2) / np.mean(yhat**2)
        k = k - alpha * gd_gradient(k, x, y, yhat, topology)
        low = k < k_min
        if low.any():
            clamps += int(low.sum())
            k = np.where(low, k_min, k)
    return GDTrace(losses, k, clamps)


def cosine_similarity(dk, grad_c) -> float:
    """``-(dk . grad) / (|dk| |grad|)``; NaN when either vector is zero."""
    dk = np.asarray(dk, dtype=float)
    grad_c = np.asarray(grad_c, dtype=float)
    if dk.shape != grad_c.shape:
        raise ValueError("vectors differ in length")
    n = np.linalg.norm(dk) * np.linalg.norm(grad_c)
    if n == 0:
        return float("nan")
    return float(-(dk @ grad_c) / n)


def cosine_trace(trace: TrainingTrace) -> np.ndarray:
    """Per-step similarity between BEASTAL's conductance change and the descent direction."""
    _require_single_layer(trace.topology)
    if trace.stride != 1:
        raise ValueError("cosine trace needs an undownsampled training trace")
    R_prev = np.vstack([trace.R0, trace.R[:-1]])
    C = np.empty(len(trace.t))
    for t in range(len(C)):
        k_prev = 1.0 / R_prev[t]
        g = gd_gradient(k_prev, trace.x[t], trace.y[t], trace.yhat[t], trace.topology)
        C[t] = cosine_similarity(1.0 / trace.R[t] - k_prev, g)
    return C


def analytic_optimal_resistances(task: RegressionTask, scale=None) -> np.ndarray:
    """A zero-loss resistance set: ``k_ij = s_i M_ij``, ``k_i,gnd = s_i (1 - sum_j M_ij)``.

    Zero conductances become resistances of ``R_CAP``.
    """
    M = task.M
    row = M.sum(axis=1)
    if np.any(row >= 1):
        raise ValueError("every row of M must sum to less than 1")
    s = np.ones(task.n_outputs) if scale is None else np.broadcast_to(np.asarray(scale, float), (task.n_outputs,))
    if np.any(s <= 0):
        raise ValueError("scales must be positive")
    k = np.concatenate([(s[:, None] * M).ravel(), s * (1.0 - row)])
    with np.errstate(divide="ignore"):
        R = 1.0 / k
    return np.minimum(R, R_CAP)


def evaluate_loss(task: RegressionTask, topology: Topology, R, n_samples: int = N_EVAL, seed: int = 0) -> float:
    """Mean per-sample normalized MSE over uniform random inputs."""
    X = np.random.default_rng(seed).uniform(0.0, 1.0, (n_samples, task.n_inputs))
    Yhat = desired_output(task, X)
    Y = measure_outputs(topology, R, X)
    return float(np.mean(np.mean((Yhat - Y) ** 2, axis=1) / np.mean(Yhat**2, axis=1)))


@dataclass(frozen=True)
class NoniterativeResult:
    p_update: np.ndarray
    R_realized: np.ndarray
    loss: float
    n_clamped: int


def noniterative_scheme(R_star, topology: Topology, task: RegressionTask, gamma: float = 1.0,
                        r_min: float = DEFAULT_R_MIN, n_samples: int = N_EVAL) -> NoniterativeResult:
    """One-shot attempt to impose ``R*`` through the boundary in a single update.

    The best node pressures are ``U+ R* / gamma``; the resulting resistances
    are the projection ``U U+ R*`` onto realisable drop patterns, floored at
    ``r_min``.
    """
    R_star = np.asarray(R_star, dtype=float)
    U, U_pinv = topology.incidence, topology.incidence_pinv
    p = (U_pinv @ R_star) / gamma
    p = p - p[topology.ground]
    R_proj = gamma * (U @ p)
    low = R_proj < r_min
    R_real = np.where(low, r_min, R_proj)
    return NoniterativeResult(p, R_real, evaluate_loss(task, topology, R_real, n_samples), int(low.sum()))


@dataclass(frozen=True)
class HiddenRow:
    task_id: str
    hidden: bool
    rule: str
    final_loss: float


def hidden_layer_comparison(tasks: dict[str, RegressionTask], rules=(Rule.LINEAR, Rule.CUBIC),
                            steps: int = 5000, seeds=(0, 1, 2), window: int = 400,
                            runner=map) -> list[HiddenRow]:
    """Final loss with and without a hidden layer, per task and rule.

    ``final_loss`` is the mean over ``seeds`` of each run's mean loss over the
    last ``window`` steps. ``runner`` lets callers swap in a parallel map.
    """
    jobs = [(tid, hidden, Rule.parse(rule), seed)
            for tid in tasks for hidden in (False, True) for rule in rules for seed in seeds]
    losses = list(runner(_hidden_job, [(tasks[tid], hidden, rule, seed, steps, window)
                                       for tid, hidden, rule, seed in jobs]))
    rows, n = [], len(seeds)
    for i in range(0, len(jobs), n):
        tid, hidden, rule, _ = jobs[i]
        rows.append(HiddenRow(tid, hidden, rule.value, float(np.mean(losses[i:i + n]))))
    return rows


def _hidden_job(args) -> float:
    task, hidden, rule, seed, steps, window = args
    topology = build_topology(task.n_inputs, task.n_outputs, hidden=hidden)
    return train(task, topology, make_config(rule, total_steps=steps, seed=seed)).final_loss(window)
