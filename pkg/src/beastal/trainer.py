"""The BEASTAL training loop.

One step: measure outputs with inputs and ground fixed, form the loss, map
the Adaline-style per-edge target drops to node pressures through the
incidence pseudo-inverse, impose those on inputs and outputs, and let every
edge evolve under its local rule.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .flow import BoundaryConditions, SolverError, edge_pressure_drops, measure_outputs, solve_pressures
from .graph import Topology
from .rules import DEFAULT_R_MIN, Rule, RuleParams, apply_rule, initial_resistances
from .tasks import (
    ClassificationTask,
    RegressionTask,
    accuracy,
    desired_output,
    tokenize_targets,
)

MAX_TRACE_RECORDS = 100_000
ALPHA_RANGE = (0.01, 1.5)
BETA_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class TrainerConfig:
    """Hyper-parameters of one training run.

    ``anneal=None`` turns annealing on for the cubic rule only.
    ``anneal_norm`` picks what is scaled to unit length in annealed mode:
    the edge vector ``v`` ("edge") or the node vector ``U+ v`` ("node").
    ``hidden_targets`` selects the edge-target generalisation used for
    networks with a hidden layer; ``None`` refuses to train them.
    """

    alpha0: float = 0.3
    beta: float = 1.0
    total_steps: int = 10_000
    rule: Rule = Rule.LINEAR
    anneal: bool | None = None
    gamma: float = 1.0
    seed: int = 0
    target_refresh_period: int = 30
    r_min: float = DEFAULT_R_MIN
    init: str = "ones"
    anneal_norm: str = "edge"
    hidden_targets: str | None = "mean-error"
    accuracy_period: int = 10

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule.parse(self.rule))
        if self.total_steps < 1:
            raise ValueError("total_steps must be at least 1")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.target_refresh_period < 1 or self.accuracy_period < 1:
            raise ValueError("periods must be at least 1")
        if self.anneal_norm not in ("edge", "node"):
            raise ValueError(f"anneal_norm must be 'edge' or 'node', got {self.anneal_norm!r}")
        if self.hidden_targets not in (None, "mean-error"):
            raise ValueError(f"unknown hidden_targets {self.hidden_targets!r}")
        RuleParams(self.gamma, self.r_min)  # validates r_min
        lo, hi = ALPHA_RANGE
        if not lo <= self.alpha0 <= hi:
            warnings.warn(f"alpha0={self.alpha0} outside the usual range [{lo}, {hi}]", stacklevel=3)
        if self.annealing and not BETA_RANGE[0] <= self.beta <= BETA_RANGE[1]:
            warnings.warn(f"beta={self.beta} outside the usual range {list(BETA_RANGE)}", stacklevel=3)

    @property
    def annealing(self) -> bool:
        return self.rule is Rule.CUBIC if self.anneal is None else bool(self.anneal)

    @property
    def rule_params(self) -> RuleParams:
        return RuleParams(self.gamma, self.r_min)

    def alpha_at(self, t: int) -> float:
        if not self.annealing:
            return self.alpha0
        return self.alpha0 * math.exp(-self.beta * t / self.total_steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rule"] = self.rule.value
        d["anneal_effective"] = self.annealing
        return d


# Hyper-parameters that train reliably on the two task families. The cubic
# preset is deliberately hot with a high resistance floor; see README.
_REGRESSION_PRESETS = {
    Rule.LINEAR: dict(alpha0=0.3),
    Rule.CUBIC: dict(alpha0=1.5, beta=2.0, r_min=0.1),
    Rule.FLOW: dict(alpha0=0.3),
    Rule.POWER: dict(alpha0=0.3),
    Rule.INSTANTANEOUS: dict(alpha0=0.3, r_min=0.1),
}
_CLASSIFICATION_PRESETS = {
    Rule.LINEAR: dict(alpha0=0.005),
    Rule.CUBIC: dict(alpha0=1.5, beta=2.0, r_min=0.1),
    Rule.FLOW: dict(alpha0=0.003),
    Rule.POWER: dict(alpha0=0.003),
    Rule.INSTANTANEOUS: dict(alpha0=0.03, r_min=0.1),
}


def preset(rule: "Rule | str", kind: str = "regression") -> dict:
    """Default hyper-parameter overrides for a rule and task kind."""
    rule = Rule.parse(rule)
    table = {"regression": _REGRESSION_PRESETS, "classification": _CLASSIFICATION_PRESETS}[kind]
    return {"rule": rule, **table[rule]}


def make_config(rule: "Rule | str", kind: str = "regression", **overrides) -> TrainerConfig:
    """Preset for ``rule`` with ``overrides`` applied on top; range warnings silenced."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return TrainerConfig(**{**preset(rule, kind), **overrides})


# --- single-step pieces -----------------------------------------------------


def loss_vector(yhat, y) -> np.ndarray:
    yhat = np.asarray(yhat, dtype=float)
    y = np.asarray(y, dtype=float)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch: {yhat.shape} vs {y.shape}")
    return yhat - y


def normalized_mse(yhat, y) -> float:
    """Mean squared loss divided by the mean squared desired output."""
    yhat = np.asarray(yhat, dtype=float)
    L = loss_vector(yhat, y)
    denom = np.mean(yhat**2)
    if denom == 0:
        raise ZeroDivisionError("normalized MSE undefined for an all-zero desired output")
    return float(np.mean(L**2) / denom)


def target_edge_drops(x, y, yhat, topology: Topology, p=None, hidden_targets: str | None = "mean-error") -> np.ndarray:
    """Per-edge Adaline target ``v``.

    Input->output edge: ``(y_i - x_j) * err_i``; output->ground edge:
    ``y_i * err_i`` where ``err = yhat - y``.

    With a hidden layer the full measured pressure vector ``p`` is needed.
    Each edge uses (pressure at its output-side end minus pressure at its
    input-side end) times an error: that of the output it feeds for
    hidden->output edges, the mean output error for input->hidden edges,
    and the output's own error for ground edges (where the sign is flipped so
    the formula agrees with the single-layer one).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if x.shape != (topology.n_inputs,) or y.shape != (topology.n_outputs,) or yhat.shape != y.shape:
        raise ValueError("x, y, yhat do not match the topology dimensions")
    err = yhat - y
    n_in, n_out = topology.n_inputs, topology.n_outputs

    if not topology.has_hidden:
        v_io = (y[:, None] - x[None, :]) * err[:, None]
        return np.concatenate([v_io.ravel(), y * err])

    if hidden_targets is None:
        raise ValueError("hidden-layer training is disabled (hidden_targets=None)")
    if p is None:
        raise ValueError("hidden-layer targets need the measured node pressures")
    p = np.asarray(p, dtype=float)
    n_hid = topology.n_hidden
    hid = p[topology.hidden]
    v_ih = (hid[:, None] - x[None, :]) * err.mean()
    v_ho = (y[:, None] - hid[None, :]) * err[:, None]
    v = np.concatenate([v_ih.ravel(), v_ho.ravel(), y * err])
    assert v.size == n_in * n_hid + n_hid * n_out + n_out == topology.n_edges
    return v


@dataclass(frozen=True)
class UpdateBoundary:
    x_update: np.ndarray
    y_update: np.ndarray
    node_pressures: np.ndarray  # ground-shifted w over all nodes


def update_boundary(v, U_pinv: np.ndarray, topology: Topology, alpha_t: float, gamma: float = 1.0,
                    anneal: bool = False, norm: str = "edge") -> UpdateBoundary:
    """Update-modality boundary pressures from the edge target ``v``.

    ``w = (alpha_t / gamma) * U+ v``, with ``v`` (or ``U+ v`` for
    ``norm="node"``) scaled to unit length in annealed mode. ``w`` is then
    shifted so the ground entry is exactly zero.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (topology.n_edges,):
        raise ValueError(f"expected {topology.n_edges} edge targets, got shape {v.shape}")
    w = U_pinv @ v
    if anneal:
        ref = np.linalg.norm(v) if norm == "edge" else np.linalg.norm(w - w[topology.ground])
        if ref == 0:
            w = np.zeros_like(w)
        else:
            w = w / ref
    w = (alpha_t / gamma) * w
    w = w - w[topology.ground]
    return UpdateBoundary(w[topology.inputs].copy(), w[topology.outputs].copy(), w)


@dataclass(frozen=True)
class StepResult:
    y: np.ndarray
    loss: np.ndarray
    loss_norm: float
    boundary: UpdateBoundary
    dp_update: np.ndarray
    R: np.ndarray
    n_clamped: int


class TrainingError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step


def training_step(topology: Topology, R, x, yhat, config: TrainerConfig, t: int) -> StepResult:
    """Run one full BEASTAL iteration; resistances change only in the final rule."""
    try:
        R = np.asarray(R, dtype=float)
        # (1) Measurement
        if topology.has_hidden:
            p = solve_pressures(topology, R, BoundaryConditions.measurement(topology, x))
            y = p[topology.outputs]
        else:
            p, y = None, measure_outputs(topology, R, x)
        # (2) loss
        L = loss_vector(yhat, y)
        loss_norm = normalized_mse(yhat, y)
        # (3)-(4) targets and boundary
        v = target_edge_drops(x, y, yhat, topology, p=p, hidden_targets=config.hidden_targets)
        bnd = update_boundary(v, topology.incidence_pinv, topology, config.alpha_at(t), config.gamma,
                              config.annealing, config.anneal_norm)
        # (5)-(6) Update modality
        if topology.has_hidden:
            bc = BoundaryConditions.update(topology, bnd.x_update, bnd.y_update)
            p_upd = solve_pressures(topology, R, bc)
        else:
            p_upd = bnd.node_pressures  # every node is fixed
        dp = edge_pressure_drops(topology, p_upd)
        # (7) local rule
        R_new, n_clamped = apply_rule(R, dp, config.rule, config.rule_params)
    except (SolverError, FloatingPointError, ZeroDivisionError, ValueError) as exc:
        raise TrainingError(t, exc) from exc
    return StepResult(y, L, loss_norm, bnd, dp, R_new, n_clamped)


# --- traces -----------------------------------------------------------------


def _fmt(v: float) -> str:
    return "%.17g" % v


@dataclass
class TrainingTrace:
    """Per-step history of a run.

    ``loss_norm`` and ``clamped`` always hold every step. The remaining
    arrays hold every ``stride``-th step (``t`` gives the step indices),
    where ``stride`` keeps the record count at or below 100000.
    """

    topology: Topology
    config: TrainerConfig
    R0: np.ndarray
    loss_norm: np.ndarray
    clamped: np.ndarray
    stride: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yhat: np.ndarray
    x_update: np.ndarray
    y_update: np.ndarray
    R: np.ndarray
    accuracy_steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    accuracy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    target_history: list = field(default_factory=list)

    @classmethod
    def allocate(cls, topology: Topology, config: TrainerConfig, R0: np.ndarray) -> "TrainingTrace":
        T = config.total_steps
        stride = max(1, math.ceil(T / MAX_TRACE_RECORDS))
        n = len(range(0, T, stride))
        z = lambda k: np.zeros((n, k))  # noqa: E731
        return cls(topology, config, R0.copy(), np.zeros(T), np.zeros(T, dtype=int), stride,
                   np.arange(0, T, stride), z(topology.n_inputs), z(topology.n_outputs),
                   z(topology.n_outputs), z(topology.n_inputs), z(topology.n_outputs),
                   z(topology.n_edges))

    def record(self, t: int, x, yhat, res: StepResult):
        self.loss_norm[t] = res.loss_norm
        self.clamped[t] = res.n_clamped
        if t % self.stride == 0:
            i = t // self.stride
            self.x[i] = x
            self.y[i] = res.y
            self.yhat[i] = yhat
            self.x_update[i] = res.boundary.x_update
            self.y_update[i] = res.boundary.y_update
            self.R[i] = res.R

    @property
    def final_R(self) -> np.ndarray:
        return self.R[-1]

    @property
    def clamp_events(self) -> int:
        return int(self.clamped.sum())

    def final_loss(self, window: int = 400) -> float:
        """Mean normalized loss over the last ``window`` steps."""
        return float(np.mean(self.loss_norm[-window:]))

    def columns(self) -> list[str]:
        tp = self.topology
        cols = ["t", "loss_norm"]
        cols += [f"x{j}" for j in range(tp.n_inputs)]
        cols += [f"y{i}" for i in range(tp.n_outputs)]
        cols += [f"yhat{i}" for i in range(tp.n_outputs)]
        cols += [f"x_upd{j}" for j in range(tp.n_inputs)]
        cols += [f"y_upd{i}" for i in range(tp.n_outputs)]
        cols += [f"R{e}" for e in range(tp.n_edges)]
        return cols

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for i, t in enumerate(self.t):
                row = [str(int(t)), _fmt(self.loss_norm[t])]
                for arr in (self.x, self.y, self.yhat, self.x_update, self.y_update, self.R):
                    row += [_fmt(v) for v in arr[i]]
                w.writerow(row)

    def summary(self, window: int = 400) -> dict:
        tail = self.loss_norm[-window:]
        d = {
            "steps": int(self.config.total_steps),
            "final_loss_norm": float(self.loss_norm[-1]),
            "final_window": int(min(window, len(self.loss_norm))),
            "final_window_mean": float(tail.mean()),
            "final_window_median": float(np.median(tail)),
            "final_window_min": float(tail.min()),
            "final_window_max": float(tail.max()),
            "clamp_events": self.clamp_events,
            "steps_with_clamp": int(np.count_nonzero(self.clamped)),
            "trace_stride": int(self.stride),
            "topology": self.topology.to_dict(),
            "config": self.config.to_dict(),
        }
        if self.accuracy.size:
            d["final_accuracy"] = float(self.accuracy[-1])
        return d

    def write_summary(self, path, window: int = 400) -> None:
        Path(path).write_text(json.dumps(self.summary(window), indent=2, sort_keys=True) + "\n")


# --- training loops ---------------------------------------------------------


def _initial_state(topology: Topology, config: TrainerConfig) -> tuple[np.random.Generator, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    return rng, initial_resistances(topology.n_edges, config.init, rng)


def train(task, topology: Topology, config: TrainerConfig) -> TrainingTrace:
    """Train online, one sample per step, and return the full trace.

    Regression draws each input component uniformly from [0, 1]. For
    classification the training samples are visited in a freshly shuffled
    order every epoch, and the species targets are re-tokenised from the
    current network every ``target_refresh_period`` steps.
    """
    if (task.n_inputs, task.n_outputs) != (topology.n_inputs, topology.n_outputs):
        raise ValueError(
            f"task is {task.n_inputs}-in/{task.n_outputs}-out but topology is "
            f"{topology.n_inputs}-in/{topology.n_outputs}-out"
        )
    if isinstance(task, RegressionTask):
        return _train_regression(task, topology, config)
    if isinstance(task, ClassificationTask):
        return _train_classification(task, topology, config)
    raise TypeError(f"unsupported task type {type(task).__name__}")


def _train_regression(task: RegressionTask, topology: Topology, config: TrainerConfig) -> TrainingTrace:
    rng, R = _initial_state(topology, config)
    trace = TrainingTrace.allocate(topology, config, R)
    for t in range(config.total_steps):
        x = rng.uniform(0.0, 1.0, topology.n_inputs)
        yhat = desired_output(task, x)
        res = training_step(topology, R, x, yhat, config, t)
        trace.record(t, x, yhat, res)
        R = res.R
    return trace


def _train_classification(task: ClassificationTask, topology: Topology, config: TrainerConfig) -> TrainingTrace:
    rng, R = _initial_state(topology, config)
    trace = TrainingTrace.allocate(topology, config, R)
    train_set = task.train
    order: list[int] = []
    targets = None
    acc_steps, acc = [], []
    for t in range(config.total_steps):
        if t % config.target_refresh_period == 0:
            targets = tokenize_targets(topology, R, task.target_set, step=t)
            trace.target_history.append(targets)
        if not order:
            order = list(rng.permutation(len(train_set)))
        i = order.pop()
        x = train_set.X[i]
        yhat = targets.vectors[train_set.labels[i]]
        res = training_step(topology, R, x, yhat, config, t)
        trace.record(t, x, yhat, res)
        R = res.R
        if (t + 1) % config.accuracy_period == 0 or t + 1 == config.total_steps:
            acc_steps.append(t + 1)
            acc.append(accuracy(topology, R, task.test, targets))
    trace.accuracy_steps = np.array(acc_steps, dtype=int)
    trace.accuracy = np.array(acc)
    return trace


def accuracy_at(trace: TrainingTrace, step: int) -> float:
    """Test accuracy recorded after ``step`` completed steps."""
    hits = np.flatnonzero(trace.accuracy_steps == step)
    if not hits.size:
        raise KeyError(f"no accuracy recorded at step {step}")
    return float(trace.accuracy[hits[0]])


def with_steps(config: TrainerConfig, steps: int) -> TrainerConfig:
    return replace(config, total_steps=steps)
