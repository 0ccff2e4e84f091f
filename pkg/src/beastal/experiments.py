"""Experiment drivers behind the command-line interface.

Each ``run_*`` function takes a fully merged configuration dict, writes its
outputs into ``out`` and returns a small result object for programmatic use.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    N_EVAL,
    analytic_optimal_resistances,
    cosine_trace,
    gd_train,
    hidden_layer_comparison,
    noniterative_scheme,
)
from .graph import build_topology
from .rules import Rule
from .svg import emit_svg_curve
from .tasks import ClassificationTask, RegressionTask, gen_regression_task, load_iris, split_dataset
from .trainer import TrainerConfig, make_config, train

DEFAULTS = {
    "train-regression": dict(rule="linear", steps=10_000, seed=0, hidden=False, gamma=1.0),
    "train-classification": dict(rules=["linear"], steps=2000, seeds=list(range(8)), n_train=30,
                                 stratified=False, target_source="all", refresh=30, gamma=1.0,
                                 iris_path=None, jobs=1),
    "sweep-grid": dict(inputs=7, outputs=7, rules=["linear", "cubic"], steps=5000,
                       seeds=list(range(8)), window=400, gamma=1.0, jobs=1),
    "baselines": dict(inputs=4, outputs=6, steps=5000, seed=0, alpha=0.3, gd_alpha=0.3,
                      seeds=list(range(8)), noniter_inputs=3, noniter_outputs=2, gamma=1.0, jobs=1),
    "hidden-compare": dict(dims=[[1, 5], [6, 7]], rules=["linear", "cubic"], steps=5000, seed=0,
                           seeds=[0, 1, 2], window=400, gamma=1.0, jobs=1),
}

# keys forwarded into TrainerConfig when present
_TRAINER_KEYS = {"alpha": "alpha0", "beta": "beta", "gamma": "gamma", "anneal": "anneal",
                 "r_min": "r_min", "init": "init", "anneal_norm": "anneal_norm"}


class UsageError(ValueError):
    """Bad or missing configuration; maps to exit code 2."""


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Rule):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_metadata(out: Path, command: str, config: dict, extra: dict | None = None) -> None:
    meta = {"command": command, "version": __version__, "config": config}
    if extra:
        meta.update(extra)
    write_json(out / "metadata.json", meta)


def parse_matrix(text: str, n_inputs: int | None, n_outputs: int | None) -> np.ndarray:
    """``"a,b;c,d"`` -> 2x2. A flat list is reshaped to (outputs, inputs) when both are known."""
    try:
        rows = [[float(v) for v in r.split(",") if v.strip()] for r in str(text).split(";") if r.strip()]
    except ValueError:
        raise UsageError(f"cannot parse --M {text!r}") from None
    flat = [v for r in rows for v in r]
    if n_inputs and n_outputs:
        if len(flat) != n_inputs * n_outputs:
            raise UsageError(f"--M has {len(flat)} entries, expected {n_outputs}x{n_inputs}")
        return np.array(flat).reshape(n_outputs, n_inputs)
    if len({len(r) for r in rows}) != 1:
        raise UsageError("--M rows differ in length")
    return np.array(rows)


def trainer_config(cfg: dict, rule, kind: str, seed: int, steps: int, **extra) -> TrainerConfig:
    overrides = {dst: cfg[src] for src, dst in _TRAINER_KEYS.items() if cfg.get(src) is not None}
    overrides.update(extra)
    return make_config(rule, kind, total_steps=steps, seed=seed, **overrides)


@contextmanager
def job_map(jobs: int):
    """``map`` or a process-pool map; results come back in submission order either way."""
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            yield lambda f, it: list(ex.map(f, it, chunksize=1))
    else:
        yield lambda f, it: list(map(f, it))


def _rules(cfg: dict) -> list[Rule]:
    names = cfg.get("rules") or [cfg.get("rule", "linear")]
    if names == "all" or names == ["all"]:
        return list(Rule)
    if isinstance(names, str):
        names = names.split(",")
    try:
        return [Rule.parse(n) for n in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --- train-regression ---------------------------------------------------------


@dataclass
class RegressionResult:
    task: RegressionTask
    final_loss: float
    summary: dict


def regression_task_from_config(cfg: dict) -> RegressionTask:
    n_in, n_out = cfg.get("inputs"), cfg.get("outputs")
    if cfg.get("M") is not None:
        M = cfg["M"] if not isinstance(cfg["M"], str) else parse_matrix(cfg["M"], n_in, n_out)
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if (n_in and M.shape[1] != n_in) or (n_out and M.shape[0] != n_out):
            raise UsageError(f"--M shape {M.shape} does not match {n_out} outputs x {n_in} inputs")
        return RegressionTask(M, cfg.get("amplification", 1.0))
    missing = [f"--{k}" for k in ("inputs", "outputs") if not cfg.get(k)]
    if missing:
        raise UsageError("missing required flags: " + ", ".join(missing))
    task_seed = cfg.get("task_seed", cfg["seed"])
    return gen_regression_task(int(n_in), int(n_out), int(task_seed))


def run_regression(cfg: dict, out: Path) -> RegressionResult:
    task = regression_task_from_config(cfg)
    topology = build_topology(task.n_inputs, task.n_outputs, hidden=bool(cfg.get("hidden")))
    tcfg = trainer_config(cfg, cfg["rule"], "regression", int(cfg["seed"]), int(cfg["steps"]))
    trace = train(task, topology, tcfg)
    trace.to_csv(out / "trace.csv")
    summary = trace.summary()
    summary["M"] = task.M.tolist()
    write_json(out / "summary.json", summary)
    loss = np.maximum(trace.loss_norm, np.finfo(float).tiny)
    emit_svg_curve([loss], ["normalized MSE"], out / "loss.svg", logy=True, ylabel="normalized MSE")
    write_metadata(out, "train-regression", cfg, {"seeds": [int(cfg["seed"])], "M": task.M.tolist(),
                                                 "trainer": tcfg.to_dict()})
    return RegressionResult(task, trace.final_loss(), summary)


# --- sweep-grid -------------------------------------------------------------


def cell_task_seed(n_in: int, n_out: int, seed: int) -> int:
    """Independent task seed for every (cell, run)."""
    return int(np.random.SeedSequence([seed, n_in, n_out]).generate_state(1)[0])


def _sweep_job(args):
    n_in, n_out, rule, seed, steps, window, cfg = args
    try:
        task = gen_regression_task(n_in, n_out, cell_task_seed(n_in, n_out, seed))
        tcfg = trainer_config(cfg, rule, "regression", seed, steps)
        return train(task, build_topology(n_in, n_out), tcfg).final_loss(window), None
    except Exception as exc:  # a failed cell is reported, the sweep goes on
        return float("nan"), f"{type(exc).__name__}: {exc}"


@dataclass
class SweepResult:
    rows: list  # (n_in, n_out, rule, mean, std, n_ok, status)

    def mean(self, n_in: int, n_out: int, rule) -> float:
        rule = Rule.parse(rule).value
        for r in self.rows:
            if r[0] == n_in and r[1] == n_out and r[2] == rule:
                return r[3]
        raise KeyError((n_in, n_out, rule))


def run_sweep(cfg: dict, out: Path | None = None) -> SweepResult:
    rules = _rules(cfg)
    seeds = [int(s) for s in cfg["seeds"]]
    steps, window = int(cfg["steps"]), int(cfg["window"])
    if steps < window:
        raise UsageError(f"--steps must be at least the averaging window ({window})")
    cells = [(i, o) for i in range(1, int(cfg["inputs"]) + 1) for o in range(1, int(cfg["outputs"]) + 1)]
    plain = {k: cfg.get(k) for k in _TRAINER_KEYS}
    jobs = [(i, o, r.value, s, steps, window, plain) for i, o in cells for r in rules for s in seeds]
    with job_map(int(cfg.get("jobs", 1))) as pmap:
        results = pmap(_sweep_job, jobs)

    rows, per_cell, n = [], [], len(seeds)
    for idx in range(0, len(jobs), n):
        i, o, r = jobs[idx][:3]
        chunk = results[idx:idx + n]
        vals = np.array([c[0] for c in chunk])
        errs = [c[1] for c in chunk if c[1]]
        ok = vals[np.isfinite(vals)]
        status = "ok" if not errs else f"failed {len(errs)}/{n}: {errs[0]}"
        mean = float(ok.mean()) if ok.size else float("nan")
        std = float(ok.std()) if ok.size else float("nan")
        rows.append((i, o, r, mean, std, int(ok.size), status))
        per_cell.append({"n_inputs": i, "n_outputs": o, "rule": r, "seeds": seeds,
                         "task_seeds": [cell_task_seed(i, o, s) for s in seeds],
                         "final_losses": vals.tolist()})
    if out is not None:
        write_csv(out / "grid.csv", ["n_inputs", "n_outputs", "rule", "mean_loss", "std_loss", "n_ok", "status"],
                  rows)
        write_metadata(out, "sweep-grid", cfg, {"seeds": seeds, "cells": per_cell})
    return SweepResult(rows)


# --- train-classification ---------------------------------------------------


def _classification_job(args):
    rule, seed, cfg, dataset = args
    train_set, test_set = split_dataset(dataset, int(cfg["n_train"]), seed, bool(cfg["stratified"]))
    task = ClassificationTask(dataset, train_set, test_set, cfg["target_source"])
    tcfg = trainer_config(cfg, rule, "classification", seed, int(cfg["steps"]),
                          target_refresh_period=int(cfg["refresh"]))
    trace = train(task, build_topology(4, 3), tcfg)
    return trace.accuracy_steps, trace.accuracy


@dataclass
class ClassificationResult:
    steps: np.ndarray
    accuracy: dict  # rule -> (n_seeds, n_points)

    def mean_at(self, rule, step: int) -> float:
        i = int(np.flatnonzero(self.steps == step)[0])
        return float(self.accuracy[Rule.parse(rule).value][:, i].mean())

    def final_mean(self, rule) -> float:
        return float(self.accuracy[Rule.parse(rule).value][:, -1].mean())


def run_classification(cfg: dict, out: Path | None = None, dataset=None) -> ClassificationResult:
    rules = _rules(cfg)
    seeds = [int(s) for s in cfg["seeds"]]
    if cfg["target_source"] not in ("all", "train"):
        raise UsageError("--target-source must be 'all' or 'train'")
    if dataset is None:
        dataset = load_iris(cfg.get("iris_path"))
    jobs = [(r.value, s, {k: cfg.get(k) for k in (*_TRAINER_KEYS, "n_train", "stratified",
                                                   "target_source", "steps", "refresh")}, dataset)
            for r in rules for s in seeds]
    with job_map(int(cfg.get("jobs", 1))) as pmap:
        results = pmap(_classification_job, jobs)

    steps = results[0][0]
    acc = {}
    for k, r in enumerate(rules):
        acc[r.value] = np.stack([results[k * len(seeds) + j][1] for j in range(len(seeds))])
    result = ClassificationResult(steps, acc)
    if out is None:
        return result

    long_rows = [(r, s, int(t), a) for r in acc for j, s in enumerate(seeds)
                 for t, a in zip(steps, acc[r][j])]
    write_csv(out / "accuracy.csv", ["rule", "seed", "step", "accuracy"], long_rows)
    summary_rows = [(r, float(a[:, -1].mean()), float(a[:, -1].std()), len(seeds)) for r, a in acc.items()]
    write_csv(out / "final_accuracy.csv", ["rule", "mean_accuracy", "std_accuracy", "n_seeds"], summary_rows)
    emit_svg_curve([a.mean(axis=0) for a in acc.values()], list(acc), out / "accuracy.svg", x=steps,
                   ylabel="test accuracy", markers_every=int(cfg["refresh"]))
    write_metadata(out, "train-classification", cfg, {"seeds": seeds, "n_train": int(cfg["n_train"])})
    return result


# --- baselines --------------------------------------------------------------


def _noniter_job(args):
    seed, n_in, n_out, steps, cfg = args
    task = gen_regression_task(n_in, n_out, seed)
    topology = build_topology(n_in, n_out)
    nonit = noniterative_scheme(analytic_optimal_resistances(task), topology, task, gamma=cfg["gamma"] or 1.0)
    lin = train(task, topology, trainer_config(cfg, "linear", "regression", seed, steps)).final_loss()
    cub = train(task, topology, trainer_config(cfg, "cubic", "regression", seed, steps)).final_loss()
    return nonit.loss, lin, cub


@dataclass
class BaselinesResult:
    R_beastal: np.ndarray
    R_gd: np.ndarray
    cosine: np.ndarray
    noniter: list  # (task id, loss_noniter, loss_linear, loss_cubic)


def run_baselines(cfg: dict, out: Path | None = None) -> BaselinesResult:
    n_in, n_out, steps, seed = int(cfg["inputs"]), int(cfg["outputs"]), int(cfg["steps"]), int(cfg["seed"])
    task = gen_regression_task(n_in, n_out, cfg.get("task_seed", seed))
    topology = build_topology(n_in, n_out)
    trace = train(task, topology, trainer_config(cfg, "linear", "regression", seed, steps))
    gd = gd_train(task, topology, float(cfg["gd_alpha"]), steps, seed)
    C = cosine_trace(trace)

    plain = {k: cfg.get(k) for k in _TRAINER_KEYS}
    # the linear/cubic columns use each rule's own preset
    plain.pop("alpha")
    seeds = [int(s) for s in cfg["seeds"]]
    jobs = [(s, int(cfg["noniter_inputs"]), int(cfg["noniter_outputs"]), steps, plain) for s in seeds]
    with job_map(int(cfg.get("jobs", 1))) as pmap:
        triples = pmap(_noniter_job, jobs)
    noniter = [(s, *t) for s, t in zip(seeds, triples)]
    result = BaselinesResult(trace.final_R, gd.R, C, noniter)
    if out is None:
        return result

    write_csv(out / "gd_compare.csv", ["edge", "R_beastal", "R_gd"],
              [(e, a, b) for e, (a, b) in enumerate(zip(trace.final_R, gd.R))])
    write_csv(out / "cosine.csv", ["t", "C"], list(enumerate(C)))
    write_csv(out / "noniter.csv", ["task_id", "loss_noniter", "loss_linear", "loss_cubic"], noniter)
    valid = C[np.isfinite(C)]
    q = valid[-len(valid) // 4:]
    write_json(out / "summary.json", {
        "cosine_fraction_positive": float(np.mean(valid > 0)),
        "cosine_last_quarter_mean": float(q.mean()),
        "gd_max_relative_deviation": float(np.max(np.abs(trace.final_R - gd.R) / np.maximum(trace.final_R, gd.R))),
        "gd_final_loss": float(gd.loss_norm[-400:].mean()),
        "beastal_final_loss": trace.final_loss(),
        "gd_clamp_events": gd.clamp_events,
    })
    emit_svg_curve([C], ["cosine similarity"], out / "cosine.svg", ylabel="C")
    write_metadata(out, "baselines", cfg, {"seeds": [seed, *seeds], "noniter_eval_samples": N_EVAL,
                                          "M": task.M.tolist()})
    return result


# --- hidden-compare ---------------------------------------------------------


def run_hidden_compare(cfg: dict, out: Path | None = None) -> list:
    rules = _rules(cfg)
    dims = cfg["dims"]
    if cfg.get("inputs") and cfg.get("outputs"):
        dims = [[int(cfg["inputs"]), int(cfg["outputs"])]]
    tasks = {f"{i}x{o}-t{s}": gen_regression_task(int(i), int(o), int(s))
             for i, o in dims for s in cfg["seeds"]}
    with job_map(int(cfg.get("jobs", 1))) as pmap:
        rows = hidden_layer_comparison(tasks, rules, int(cfg["steps"]), (int(cfg["seed"]),),
                                       int(cfg["window"]), runner=pmap)
    if out is not None:
        write_csv(out / "hidden.csv", ["task_id", "hidden", "rule", "final_loss"],
                  [(r.task_id, r.hidden, r.rule, r.final_loss) for r in rows])
        write_metadata(out, "hidden-compare", cfg, {"seeds": [int(cfg["seed"])],
                                                   "task_seeds": list(cfg["seeds"]),
                                                   "M": {k: t.M.tolist() for k, t in tasks.items()}})
    return rows


RUNNERS = {
    "train-regression": run_regression,
    "train-classification": run_classification,
    "sweep-grid": run_sweep,
    "baselines": run_baselines,
    "hidden-compare": run_hidden_compare,
}
