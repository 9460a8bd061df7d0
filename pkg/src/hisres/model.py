"""The full model: recent encoders, gates, ConvGAT and decoders wired together."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from hisres.config import RunConfig
from hisres.context import ForwardContext
from hisres.data import Snapshot, inverse_triples
from hisres.decoder import DecoderParams, joint_loss, score_entities, score_relations
from hisres.evo import EvolutionParams, evolve_inter, evolve_intra
from hisres.fusion import SelfGate, self_gate
from hisres.graphs import GlobalRelevanceGraph, RelevanceIndex, WindowGraph, query_pairs_of, window_graphs
from hisres.numerics import ops
from hisres.numerics.params import ParamGroup
from hisres.numerics.tensor import Tensor
from hisres.relevance import ConvGatLayer, encode_global

PHASES = ("raw", "inverse")


@dataclass
class HisRESParams(ParamGroup):
    evo: EvolutionParams
    gate_recent: SelfGate
    gate_global: SelfGate
    convgat: list
    decoder: DecoderParams

    @classmethod
    def init(cls, num_entities: int, num_relations: int, cfg: RunConfig,
             rng: np.random.Generator) -> "HisRESParams":
        # draw order is the field order below; checkpoints rely on it only through names
        evo = EvolutionParams.init(num_entities, num_relations, cfg.dim, cfg.layers, rng)
        gate_recent = SelfGate.init(cfg.dim, rng, "recent")
        gate_global = SelfGate.init(cfg.dim, rng, "global")
        convgat = [ConvGatLayer.init(cfg.dim, rng) for _ in range(cfg.layers)]
        decoder = DecoderParams.init(cfg.dim, rng, cfg.channels, cfg.kernel)
        return cls(evo, gate_recent, gate_global, convgat, decoder)


@dataclass
class Encoded:
    """Intermediate entity/relation matrices of one forward pass."""

    intra: Tensor
    inter: Optional[Tensor]
    recent: Tensor
    relations: Tensor
    global_: Optional[Tensor]
    final: Tensor
    graph: Optional[GlobalRelevanceGraph]


def phase_triples(snapshot: Snapshot, phase: str, num_relations: int) -> np.ndarray:
    if phase == "raw":
        return snapshot.triples
    if phase == "inverse":
        return inverse_triples(snapshot.triples, num_relations)
    raise ValueError(f"unknown phase {phase!r}")


class HisRES:
    def __init__(self, num_entities: int, num_relations: int, config: RunConfig,
                 rng: Optional[np.random.Generator] = None):
        self.config = config.validate()
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.params = HisRESParams.init(num_entities, num_relations, config, self.rng)
        self._windows: dict[tuple[int, ...], tuple[list, list[WindowGraph]]] = {}

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.params.named_parameters())

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None

    def context(self, training: bool, **kwargs) -> ForwardContext:
        return ForwardContext(training=training, rng=self.rng,
                              dropout=self.config.dropout if training else 0.0, **kwargs)

    def history(self, timeline: Sequence[Snapshot], time: int) -> list[Snapshot]:
        return list(timeline[max(0, time - self.config.history_len):time])

    def windows(self, history: Sequence[Snapshot], time: int) -> list[WindowGraph]:
        # the cached entry holds the snapshots themselves so their ids cannot be reused
        key = tuple(id(s) for s in history)
        if key not in self._windows:
            self._windows[key] = (list(history),
                                  window_graphs(history, self.config.omega, self.num_relations, strict=False))
        return self._windows[key][1]

    def encode(self, timeline: Sequence[Snapshot], time: int, queries: np.ndarray,
               index: Optional[RelevanceIndex], ctx: ForwardContext,
               entity_base: Optional[Tensor] = None) -> Encoded:
        cfg, p = self.config, self.params
        with ctx.timed("intra_structuring"):
            history = self.history(timeline, time)
        intra, relations = evolve_intra(history, p.evo, time, self.num_relations, ctx, cfg.degree_norm,
                                        cfg.use_time, entity_base)
        inter = None
        recent = intra
        if cfg.use_inter and history:
            with ctx.timed("inter_structuring"):
                wins = self.windows(history, time)
            inter = evolve_inter(wins, p.evo, ctx, cfg.degree_norm, entity_base)
            with ctx.timed("self_gating_recent"):
                recent = ops.dropout(self_gate(intra, inter, p.gate_recent), ctx.dropout, ctx.training, ctx.rng)
        final = recent
        glob = None
        graph = None
        if cfg.use_global and index is not None:
            with ctx.timed("global_structuring"):
                graph = index.build(query_pairs_of(queries), time)
            with ctx.timed("convgat"):
                glob = encode_global(graph, recent, relations, p.convgat, ctx)
            with ctx.timed("self_gating_global"):
                final = ops.dropout(self_gate(glob, recent, p.gate_global), ctx.dropout, ctx.training, ctx.rng)
        return Encoded(intra, inter, recent, relations, glob, final, graph)

    def score(self, enc: Encoded, queries: np.ndarray, ctx: ForwardContext) -> tuple[Tensor, Tensor]:
        """Entity logits (B, |E|) and relation logits (B, 2|R|) for query triples."""
        dec = self.params.decoder
        with ctx.timed("decoder"):
            subj = ops.take_rows(enc.final, queries[:, 0])
            ent_logits = score_entities(subj, ops.take_rows(enc.relations, queries[:, 1]), enc.final,
                                        dec.entity, ctx)
            rel_logits = score_relations(subj, ops.take_rows(enc.final, queries[:, 2]), enc.relations,
                                         dec.relation, ctx)
        return ent_logits, rel_logits

    def loss(self, timeline: Sequence[Snapshot], time: int, queries: np.ndarray,
             index: Optional[RelevanceIndex], ctx: ForwardContext,
             entity_base: Optional[Tensor] = None) -> Tensor:
        enc = self.encode(timeline, time, queries, index, ctx, entity_base)
        ent_logits, rel_logits = self.score(enc, queries, ctx)
        return joint_loss(ent_logits, queries[:, 2], rel_logits, queries[:, 1], self.config.alpha)
