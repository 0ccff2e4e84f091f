"""Network topologies and incidence-matrix algebra.

Nodes are numbered inputs first, then hidden, then outputs, with the single
ground node last. Edges are directed tail -> head purely as a sign convention
for pressure drops (tail minus head); the flow itself is undirected.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SVD_RTOL = 1e-12


class NodeKind(enum.Enum):
    INPUT = "input"
    HIDDEN = "hidden"
    OUTPUT = "output"
    GROUND = "ground"


@dataclass(frozen=True)
class Topology:
    """A layered resistor network.

    Attributes
    ----------
    n_inputs, n_hidden, n_outputs : int
        Layer sizes. ``n_hidden == 0`` means a single bipartite layer.
    edges : tuple of (int, int)
        ``(tail, head)`` node indices, in the canonical order produced by
        :func:`build_topology`.
    """

    n_inputs: int
    n_hidden: int
    n_outputs: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_inputs < 1 or self.n_outputs < 1 or self.n_hidden < 0:
            raise ValueError(
                f"invalid dimensions: {self.n_inputs} inputs, "
                f"{self.n_hidden} hidden, {self.n_outputs} outputs"
            )
        n = self.n_nodes
        for tail, head in self.edges:
            if not (0 <= tail < n and 0 <= head < n) or tail == head:
                raise ValueError(f"edge ({tail}, {head}) invalid for {n} nodes")

    @property
    def n_nodes(self) -> int:
        return self.n_inputs + self.n_hidden + self.n_outputs + 1

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def has_hidden(self) -> bool:
        return self.n_hidden > 0

    @property
    def inputs(self) -> np.ndarray:
        return np.arange(self.n_inputs)

    @property
    def hidden(self) -> np.ndarray:
        return np.arange(self.n_inputs, self.n_inputs + self.n_hidden)

    @property
    def outputs(self) -> np.ndarray:
        start = self.n_inputs + self.n_hidden
        return np.arange(start, start + self.n_outputs)

    @property
    def ground(self) -> int:
        return self.n_nodes - 1

    def kind(self, node: int) -> NodeKind:
        if node < 0 or node >= self.n_nodes:
            raise IndexError(node)
        if node < self.n_inputs:
            return NodeKind.INPUT
        if node < self.n_inputs + self.n_hidden:
            return NodeKind.HIDDEN
        if node < self.n_nodes - 1:
            return NodeKind.OUTPUT
        return NodeKind.GROUND

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=int)

    @cached_property
    def incidence(self) -> np.ndarray:
        return incidence_matrix(self)

    @cached_property
    def incidence_pinv(self) -> np.ndarray:
        return pseudo_inverse(self.incidence)

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_hidden": self.n_hidden,
            "n_outputs": self.n_outputs,
            "edges": [list(e) for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(
            n_inputs=int(d["n_inputs"]),
            n_hidden=int(d["n_hidden"]),
            n_outputs=int(d["n_outputs"]),
            edges=tuple((int(a), int(b)) for a, b in d["edges"]),
        )

    @classmethod
    def from_json(cls, s: str) -> "Topology":
        return cls.from_dict(json.loads(s))


def build_topology(n_inputs: int, n_outputs: int, hidden: bool = False) -> Topology:
    """Build one of the two supported network families.

    Without a hidden layer every input feeds every output and every output
    drains to ground, giving ``(n_inputs + 1) * n_outputs`` edges. With a
    hidden layer of ``max(n_inputs, n_outputs)`` nodes the inputs feed the
    hidden layer, the hidden layer feeds the outputs, and the outputs still
    drain to ground.

    Edge blocks are emitted output-major (for hidden: target-major), so for
    2 inputs and 2 outputs the rows are in0->out0, in1->out0, in0->out1,
    in1->out1, out0->gnd, out1->gnd.
    """
    if n_inputs < 1 or n_outputs < 1:
        raise ValueError(f"need at least one input and one output, got {n_inputs}, {n_outputs}")
    n_hidden = max(n_inputs, n_outputs) if hidden else 0
    ins = range(n_inputs)
    hid = range(n_inputs, n_inputs + n_hidden)
    outs = range(n_inputs + n_hidden, n_inputs + n_hidden + n_outputs)
    gnd = n_inputs + n_hidden + n_outputs

    edges: list[tuple[int, int]] = []
    if hidden:
        edges += [(j, h) for h in hid for j in ins]
        edges += [(h, o) for o in outs for h in hid]
    else:
        edges += [(j, o) for o in outs for j in ins]
    edges += [(o, gnd) for o in outs]
    return Topology(n_inputs, n_hidden, n_outputs, tuple(edges))


def incidence_matrix(topology: Topology) -> np.ndarray:
    """Dense edges x nodes matrix with +1 at each tail and -1 at each head."""
    U = np.zeros((topology.n_edges, topology.n_nodes))
    rows = np.arange(topology.n_edges)
    U[rows, topology.tails] = 1.0
    U[rows, topology.heads] = -1.0
    return U


def pseudo_inverse(U: np.ndarray, rtol: float = SVD_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``rtol`` times the largest one are dropped, which
    removes the constant-pressure null space of an incidence matrix.
    """
    return np.linalg.pinv(U, rtol=rtol)
