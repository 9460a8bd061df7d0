"""Multi-granularity evolutionary encoder.

Intra-snapshot: each recent snapshot is aggregated on time-fused entity
embeddings, followed by recurrent entity and relation updates. Inter-snapshot:
the same aggregation (separate weights, no time encoding) over sliding
window graphs, followed by a recurrent entity update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from hisres.context import ForwardContext
from hisres.data import Snapshot
from hisres.graphs import WindowGraph
from hisres.numerics import ops
from hisres.numerics.params import ParamGroup, uniform, zeros
from hisres.numerics.tensor import Tensor


@dataclass
class GRUCell(ParamGroup):
    """h' = (1 - z) * h + z * tanh(W_h [x; r * h]),  z, r = sigmoid(W [x; h])."""

    w_z: Tensor
    b_z: Tensor
    w_r: Tensor
    b_r: Tensor
    w_h: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator) -> "GRUCell":
        return cls(uniform((dim, 2 * dim), dim, rng), zeros((dim,)),
                   uniform((dim, 2 * dim), dim, rng), zeros((dim,)),
                   uniform((dim, 2 * dim), dim, rng), zeros((dim,)))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        xh = ops.concat([x, h], axis=1)
        z = ops.sigmoid(ops.linear(xh, self.w_z, self.b_z))
        r = ops.sigmoid(ops.linear(xh, self.w_r, self.b_r))
        cand = ops.tanh(ops.linear(ops.concat([x, r * h], axis=1), self.w_h, self.b_h))
        return h + z * (cand - h)


@dataclass
class AggregationLayer(ParamGroup):
    w_neighbor: Tensor
    w_self: Tensor
    w_relation: Tensor

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator) -> "AggregationLayer":
        return cls(uniform((dim, dim), dim, rng), uniform((dim, dim), dim, rng), uniform((dim, dim), dim, rng))


@dataclass
class EvolutionParams(ParamGroup):
    entity_base: Tensor
    relation_base: Tensor
    time_weight: Tensor
    time_bias: Tensor
    time_fuse: Tensor
    intra_layers: list
    inter_layers: list
    intra_entity_cell: GRUCell
    intra_relation_cell: GRUCell
    inter_entity_cell: GRUCell

    @classmethod
    def init(cls, num_entities: int, num_relations: int, dim: int, layers: int,
             rng: np.random.Generator) -> "EvolutionParams":
        """``num_relations`` is the raw count; 2|R| relation rows are allocated."""
        return cls(
            entity_base=uniform((num_entities, dim), dim, rng),
            relation_base=uniform((2 * num_relations, dim), dim, rng),
            time_weight=uniform((dim,), dim, rng),
            time_bias=zeros((dim,)),
            time_fuse=uniform((dim, 2 * dim), 2 * dim, rng),
            intra_layers=[AggregationLayer.init(dim, rng) for _ in range(layers)],
            inter_layers=[AggregationLayer.init(dim, rng) for _ in range(layers)],
            intra_entity_cell=GRUCell.init(dim, rng),
            intra_relation_cell=GRUCell.init(dim, rng),
            inter_entity_cell=GRUCell.init(dim, rng),
        )


def time_vector(gap: float, weight: Tensor, bias: Tensor) -> Tensor:
    """cos(w_t * gap + b_t), a d-vector."""
    return ops.cosine(ops.add(ops.mul(weight, float(gap)), bias))


def time_encode(entities: Tensor, gap: float, weight: Tensor, bias: Tensor, fuse: Tensor) -> Tensor:
    """W_0 [E || cos(w_t * gap + b_t)] applied row-wise; ``gap = t - t_i``."""
    n = entities.shape[0]
    dt = time_vector(gap, weight, bias)
    dt_rows = ops.mul(ops.reshape(dt, (1, -1)), np.ones((n, 1)))
    return ops.linear(ops.concat([entities, dt_rows], axis=1), fuse)


def aggregate_snapshot(triples: np.ndarray, entities: Tensor, relations: Tensor,
                       layers: Sequence[AggregationLayer], ctx: ForwardContext,
                       degree_norm: bool = False) -> tuple[Tensor, Tensor]:
    """Composition aggregation with relation updating, one pass per layer.

    Each object sums ``W1 (s + r)`` over its in-edges and adds ``W2 o``; the
    relation matrix goes through ``rrelu(W_r R)`` after every layer.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    n = entities.shape[0]
    if len(triples):
        if triples[:, [0, 2]].max() >= n or triples[:, [0, 2]].min() < 0:
            raise IndexError("entity id out of range in aggregation")
        if triples[:, 1].max() >= relations.shape[0] or triples[:, 1].min() < 0:
            raise IndexError("relation id out of range in aggregation")
    s_idx, r_idx, o_idx = triples[:, 0], triples[:, 1], triples[:, 2]
    inv_deg = None
    if degree_norm and len(triples):
        deg = np.bincount(o_idx, minlength=n).astype(float)
        inv_deg = (1.0 / np.maximum(deg, 1.0))[:, None]
    h, rel = entities, relations
    for layer in layers:
        pre = ops.linear(h, layer.w_self)
        if len(triples):
            msg = ops.linear(ops.take_rows(h, s_idx) + ops.take_rows(rel, r_idx), layer.w_neighbor)
            agg = ops.segment_sum(msg, o_idx, n)
            if inv_deg is not None:
                agg = agg * inv_deg
            pre = pre + agg
        h = ops.rrelu(pre, training=ctx.training, rng=ctx.rng)
        h = ops.dropout(h, ctx.dropout, ctx.training, ctx.rng)
        rel = ops.rrelu(ops.linear(rel, layer.w_relation), training=ctx.training, rng=ctx.rng)
    return h, rel


def relation_entity_pool(triples: np.ndarray, entities: Tensor, num_relation_rows: int) -> tuple[Tensor, np.ndarray]:
    """Mean embedding of the distinct entities incident to each relation.

    Returns the pooled (2|R|, d) matrix and a boolean mask of relations present.
    """
    pairs = np.concatenate([triples[:, [1, 0]], triples[:, [1, 2]]])
    pairs = np.unique(pairs, axis=0)
    counts = np.bincount(pairs[:, 0], minlength=num_relation_rows).astype(float)
    present = counts > 0
    summed = ops.segment_sum(ops.take_rows(entities, pairs[:, 1]), pairs[:, 0], num_relation_rows)
    return summed * (1.0 / np.maximum(counts, 1.0))[:, None], present


def evolve_intra(history: Sequence[Snapshot], params: EvolutionParams, target_time: int,
                 num_relations: int, ctx: ForwardContext, degree_norm: bool = False,
                 use_time: bool = True, entity_base: Optional[Tensor] = None) -> tuple[Tensor, Tensor]:
    """Recurrent evolution over the recent snapshots (oldest first).

    The time gap of snapshot ``t_i`` is ``(target_time - 1) - t_i`` so the most
    recent snapshot has gap 0. Returns (E^g_t, R_t).
    """
    ent = params.entity_base if entity_base is None else entity_base
    rel = params.relation_base
    num_rows = rel.shape[0]
    for snap in history:
        with ctx.timed("intra_structuring"):
            triples = snap.augmented(num_relations)
        with ctx.timed("intra_aggregation"):
            if use_time:
                fused = time_encode(ent, (target_time - 1) - snap.time, params.time_weight,
                                    params.time_bias, params.time_fuse)
            else:
                fused = ent
            agg_e, agg_r = aggregate_snapshot(triples, fused, rel, params.intra_layers, ctx, degree_norm)
            ent = params.intra_entity_cell(agg_e, fused)
            if len(triples):
                pooled, present = relation_entity_pool(triples, fused, num_rows)
                updated = params.intra_relation_cell(agg_r, pooled)
                mask = present.astype(float)[:, None]
                rel = updated * mask + rel * (1.0 - mask)
    return ent, rel


def evolve_inter(windows: Sequence[WindowGraph], params: EvolutionParams, ctx: ForwardContext,
                 degree_norm: bool = False, entity_base: Optional[Tensor] = None) -> Tensor:
    """Recurrent evolution over window graphs; hidden state starts at the base embeddings."""
    state = params.entity_base if entity_base is None else entity_base
    for win in windows:
        with ctx.timed("inter_aggregation"):
            agg, _ = aggregate_snapshot(win.triples, state, params.relation_base, params.inter_layers,
                                        ctx, degree_norm)
            state = params.inter_entity_cell(agg, state)
    return state
