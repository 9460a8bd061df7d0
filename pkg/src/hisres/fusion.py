"""Self-gating: a learned elementwise convex blend of two entity matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hisres.errors import DimensionError
from hisres.numerics import ops
from hisres.numerics.params import ParamGroup, uniform, zeros
from hisres.numerics.tensor import Tensor, no_grad


@dataclass
class SelfGate(ParamGroup):
    weight: Tensor
    bias: Tensor
    tag: str = field(default="recent", compare=False)

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, tag: str = "recent") -> "SelfGate":
        return cls(uniform((dim, dim), dim, rng), zeros((dim,)), tag)

    def gate(self, x: Tensor) -> Tensor:
        return ops.sigmoid(ops.linear(x, self.weight, self.bias))


def self_gate(primary: Tensor, secondary: Tensor, gate: SelfGate) -> Tensor:
    """``theta * A + (1 - theta) * B`` with ``theta = sigmoid(W A + b)``."""
    if primary.shape != secondary.shape:
        raise DimensionError(f"self_gate: {primary.shape} vs {secondary.shape}")
    theta = gate.gate(primary)
    return secondary + theta * (primary - secondary)


def export_gate_weights(gate: SelfGate, inputs: Tensor) -> np.ndarray:
    """Per-entity mean of the gate over the embedding dimension."""
    with no_grad():
        return gate.gate(inputs).data.mean(axis=1)


def write_gate_csv(path, means: np.ndarray) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "mean_gate"])
        for i, v in enumerate(means):
            w.writerow([i, repr(float(v))])
    return path
