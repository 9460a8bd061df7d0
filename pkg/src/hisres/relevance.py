"""ConvGAT: attention-weighted aggregation over the global relevance graph.

For each edge (s, r, o) the score ``w4 . leaky_relu(W5 [s || r || o])`` is
softmax-normalised over the in-edges of ``o``; the message is
``theta * W6 psi(s + r)`` with ``psi`` a same-padded 1-D convolution along the
embedding dimension. Relation embeddings stay fixed across layers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from hisres.context import ForwardContext
from hisres.graphs import GlobalRelevanceGraph
from hisres.numerics import ops
from hisres.numerics.params import ParamGroup, uniform
from hisres.numerics.tensor import Tensor, no_grad


@dataclass
class ConvGatLayer(ParamGroup):
    w_score: Tensor     # (1, 3d)
    w_edge: Tensor      # (3d, 3d)
    w_message: Tensor   # (d, d)
    w_self: Tensor      # (d, d)
    psi: Tensor         # (1, 1, k)

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, kernel: int = 3) -> "ConvGatLayer":
        return cls(uniform((1, 3 * dim), 3 * dim, rng), uniform((3 * dim, 3 * dim), 3 * dim, rng),
                   uniform((dim, dim), dim, rng), uniform((dim, dim), dim, rng),
                   uniform((1, 1, kernel), kernel, rng))


class AttentionRecord(NamedTuple):
    object_id: int
    edges: list  # (subject, relation, weight)


def edge_attention(triples: np.ndarray, entities: Tensor, relations: Tensor, layer: ConvGatLayer) -> Tensor:
    s, r, o = triples[:, 0], triples[:, 1], triples[:, 2]
    feats = ops.concat([ops.take_rows(entities, s), ops.take_rows(relations, r), ops.take_rows(entities, o)], axis=1)
    scores = ops.linear(ops.leaky_relu(ops.linear(feats, layer.w_edge)), layer.w_score)
    return ops.segment_softmax(ops.reshape(scores, (-1,)), o, entities.shape[0])


def convgat_layer(triples: np.ndarray, entities: Tensor, relations: Tensor, layer: ConvGatLayer,
                  ctx: ForwardContext) -> tuple[Tensor, Tensor | None]:
    """One ConvGAT pass; returns the new entity matrix and the edge weights (or None)."""
    n = entities.shape[0]
    pre = ops.linear(entities, layer.w_self)
    theta = None
    if len(triples):
        s, r, o = triples[:, 0], triples[:, 1], triples[:, 2]
        theta = edge_attention(triples, entities, relations, layer)
        comp = ops.take_rows(entities, s) + ops.take_rows(relations, r)
        m, d = comp.shape
        fused = ops.reshape(ops.conv1d(ops.reshape(comp, (m, 1, d)), layer.psi), (m, d))
        msg = ops.linear(fused, layer.w_message) * ops.reshape(theta, (m, 1))
        pre = pre + ops.segment_sum(msg, o, n)
    return ops.rrelu(pre, training=ctx.training, rng=ctx.rng), theta


def encode_global(graph: GlobalRelevanceGraph | np.ndarray, entities: Tensor, relations: Tensor,
                  layers: Sequence[ConvGatLayer], ctx: ForwardContext) -> Tensor:
    """Stacked ConvGAT layers with dropout between them; returns E^H."""
    triples = graph.triples if isinstance(graph, GlobalRelevanceGraph) else np.asarray(graph).reshape(-1, 3)
    h = entities
    theta = None
    for i, layer in enumerate(layers):
        h, theta = convgat_layer(triples, h, relations, layer, ctx)
        if i < len(layers) - 1:
            h = ops.dropout(h, ctx.dropout, ctx.training, ctx.rng)
    if ctx.record_attention:
        ctx.attention.append((triples, None if theta is None else theta.data.copy()))
    return h


def attention_records(triples: np.ndarray, weights: np.ndarray) -> list[AttentionRecord]:
    records: dict[int, list] = {}
    for (s, r, o), w in zip(triples.tolist(), weights.tolist()):
        records.setdefault(o, []).append((s, r, w))
    return [AttentionRecord(o, sorted(edges)) for o, edges in sorted(records.items())]


def dump_attention(graph: GlobalRelevanceGraph, entities: Tensor, relations: Tensor,
                   layers: Sequence[ConvGatLayer]) -> list[AttentionRecord]:
    """Final-layer attention for every object in ``graph`` (eval mode)."""
    if len(graph) == 0:
        return []
    ctx = ForwardContext(training=False)
    with no_grad():
        h = entities
        for layer in layers[:-1]:
            h, _ = convgat_layer(graph.triples, h, relations, layer, ctx)
        theta = edge_attention(graph.triples, h, relations, layers[-1])
    return attention_records(graph.triples, theta.data)


def write_attention_csv(path, records: Sequence[AttentionRecord]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["object_id", "subject_id", "relation_id", "weight"])
        for rec in records:
            for s, r, weight in rec.edges:
                w.writerow([rec.object_id, s, r, repr(float(weight))])
    return path
