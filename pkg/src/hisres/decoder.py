"""ConvTransE scoring and the joint entity/relation objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hisres.context import ForwardContext
from hisres.errors import ConfigError, DimensionError
from hisres.numerics import ops
from hisres.numerics.params import ParamGroup, uniform, zeros
from hisres.numerics.tensor import Tensor


@dataclass
class ConvTransE(ParamGroup):
    """conv(C channels over the stacked 2 x d pair) -> relu -> project to d -> relu."""

    kernels: Tensor     # (C, 2, k)
    conv_bias: Tensor   # (C,)
    project: Tensor     # (d, C * d)
    project_bias: Tensor

    @classmethod
    def init(cls, dim: int, channels: int, kernel: int, rng: np.random.Generator) -> "ConvTransE":
        if kernel % 2 == 0:
            raise ConfigError("decoder kernel width must be odd")
        return cls(uniform((channels, 2, kernel), 2 * kernel, rng), zeros((channels,)),
                   uniform((dim, channels * dim), channels * dim, rng), zeros((dim,)))

    def query(self, first: Tensor, second: Tensor, ctx: ForwardContext) -> Tensor:
        if first.shape != second.shape or first.ndim != 2:
            raise DimensionError(f"decoder inputs {first.shape} and {second.shape} must match")
        b, d = first.shape
        stacked = ops.concat([ops.reshape(first, (b, 1, d)), ops.reshape(second, (b, 1, d))], axis=1)
        feat = ops.relu(ops.conv1d(stacked, self.kernels, self.conv_bias))
        return ops.relu(ops.linear(ops.reshape(feat, (b, -1)), self.project, self.project_bias))


@dataclass
class DecoderParams(ParamGroup):
    entity: ConvTransE
    relation: ConvTransE

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, channels: int = 50, kernel: int = 3) -> "DecoderParams":
        return cls(ConvTransE.init(dim, channels, kernel, rng), ConvTransE.init(dim, channels, kernel, rng))


def score_entities(subjects: Tensor, relations: Tensor, candidates: Tensor, dec: ConvTransE,
                   ctx: ForwardContext) -> Tensor:
    """Raw logits (batch, |E|) of every candidate object."""
    return ops.matmul(dec.query(subjects, relations, ctx), ops.transpose(candidates))


def score_relations(subjects: Tensor, objects: Tensor, relation_matrix: Tensor, dec: ConvTransE,
                    ctx: ForwardContext) -> Tensor:
    """Raw logits (batch, 2|R|) of every relation linking subject to object."""
    return ops.matmul(dec.query(subjects, objects, ctx), ops.transpose(relation_matrix))


def joint_loss(entity_logits: Tensor, entity_targets, relation_logits: Tensor, relation_targets,
               alpha: float) -> Tensor:
    """``alpha * CE_entity + (1 - alpha) * CE_relation``."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    ent = ops.cross_entropy(entity_logits, entity_targets)
    if alpha == 1.0:
        return ent
    rel = ops.cross_entropy(relation_logits, relation_targets)
    return ops.add(ops.mul(ent, alpha), ops.mul(rel, 1.0 - alpha))
