"""Local resistance evolution rules.

Each rule maps the Update-modality pressure drop on an edge (and that edge's
current resistance) to its next resistance. All rules are one forward-Euler
step with unit time step, followed by a positivity clamp.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_R_MIN = 1e-6


class Rule(str, enum.Enum):
    LINEAR = "linear"  # dR = gamma * dp
    CUBIC = "cubic"  # dR = gamma * dp**3
    FLOW = "flow"  # dR = gamma * Q,  Q = dp / R
    POWER = "power"  # dR = gamma * dp**2 / R
    INSTANTANEOUS = "instantaneous"  # R = gamma * dp

    @classmethod
    def parse(cls, name: "str | Rule") -> "Rule":
        if isinstance(name, Rule):
            return name
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown rule {name!r}; choose from {[r.value for r in cls]}") from None

    @property
    def additive(self) -> bool:
        return self is not Rule.INSTANTANEOUS


@dataclass(frozen=True)
class RuleParams:
    gamma: float = 1.0
    r_min: float = DEFAULT_R_MIN

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError(f"r_min must be positive, got {self.r_min}")


def rule_increment(R: np.ndarray, dp: np.ndarray, rule: Rule, gamma: float) -> np.ndarray:
    """Unclamped change of R for the additive rules."""
    if rule is Rule.LINEAR:
        return gamma * dp
    if rule is Rule.CUBIC:
        return gamma * dp**3
    if rule is Rule.FLOW:
        return gamma * dp / R
    if rule is Rule.POWER:
        return gamma * dp**2 / R
    raise ValueError(f"{rule.value} rule has no increment form")


def apply_rule(R, dp_update, rule: "Rule | str", params: RuleParams = RuleParams()) -> tuple[np.ndarray, int]:
    """Evolve resistances under the Update-modality pressure drops.

    Flow and power use the pre-update resistance. The result is clamped
    elementwise at ``params.r_min``.

    Returns
    -------
    R_new : ndarray
    n_clamped : int
        How many entries hit the floor on this application.
    """
    rule = Rule.parse(rule)
    R = np.asarray(R, dtype=float)
    dp = np.asarray(dp_update, dtype=float)
    if R.shape != dp.shape:
        raise ValueError(f"shape mismatch: R {R.shape} vs dp {dp.shape}")
    if not np.all(np.isfinite(dp)):
        raise FloatingPointError("non-finite Update pressure drop; upstream solve failed")

    if rule is Rule.INSTANTANEOUS:
        R_new = params.gamma * dp
    else:
        R_new = R + rule_increment(R, dp, rule, params.gamma)
    below = R_new < params.r_min
    if below.any():
        R_new = np.where(below, params.r_min, R_new)
    return R_new, int(below.sum())


def initial_resistances(n_edges: int, kind: str = "ones", rng: np.random.Generator | None = None) -> np.ndarray:
    """Starting resistances: all ones, or seeded uniform on [0.5, 1.5]."""
    if kind == "ones":
        return np.ones(n_edges)
    if kind == "uniform":
        if rng is None:
            raise ValueError("uniform initialisation needs an rng")
        return rng.uniform(0.5, 1.5, n_edges)
    raise ValueError(f"unknown initialisation {kind!r}")
