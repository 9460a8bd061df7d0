"""Training loop, evaluation protocol and checkpoint glue."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from hisres.checkpoint import Checkpoint
from hisres.config import RunConfig
from hisres.context import Timer
from hisres.data import DatasetBundle, Snapshot
from hisres.errors import CheckpointError, DataError
from hisres.evaluation import FrequencyBaseline, MetricsReport, compute_metrics, filtered_ranks, perturb_embeddings
from hisres.graphs import RelevanceIndex
from hisres.model import PHASES, HisRES, phase_triples
from hisres.numerics.optim import OptimizerState, adam_step
from hisres.numerics.tensor import Tensor, no_grad

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: HisRES
    optimizer: OptimizerState
    losses: list = field(default_factory=list)
    epoch: int = 0

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(self.model.config, {k: v.data.copy() for k, v in self.model.parameters().items()},
                          self.optimizer, self.epoch, self.model.rng.bit_generator.state,
                          self.model.num_entities, self.model.num_relations, list(self.losses))


def build_index(bundle: DatasetBundle) -> RelevanceIndex:
    return RelevanceIndex(bundle.num_relations).extend(bundle.timeline())


def model_from_checkpoint(ckpt: Checkpoint) -> HisRES:
    model = HisRES(ckpt.num_entities, ckpt.num_relations, ckpt.config)
    params = model.parameters()
    if set(params) != set(ckpt.params):
        missing = sorted(set(params) ^ set(ckpt.params))[:5]
        raise CheckpointError(f"checkpoint parameters do not match the model: {missing}")
    for name, p in params.items():
        if p.data.shape != ckpt.params[name].shape:
            raise CheckpointError(f"shape mismatch for {name}")
        p.data[...] = ckpt.params[name]
    model.rng.bit_generator.state = ckpt.rng_state
    return model


def train_step(model: HisRES, timeline, snapshot: Snapshot, phase: str, index: Optional[RelevanceIndex],
               opt: OptimizerState, timer: Optional[Timer] = None) -> float:
    queries = phase_triples(snapshot, phase, model.num_relations)
    ctx = model.context(training=True, timer=timer, phase="training")
    loss = model.loss(timeline, snapshot.time, queries, index, ctx)
    model.zero_grad()
    loss.backward()
    params = model.parameters()
    adam_step({k: p.data for k, p in params.items()},
              {k: p.grad for k, p in params.items() if p.grad is not None}, opt)
    return loss.item()


def train(config: RunConfig, bundle: DatasetBundle, resume: Optional[Checkpoint] = None,
          epochs: Optional[int] = None, on_epoch: Optional[Callable[[int, float], None]] = None,
          timer: Optional[Timer] = None) -> TrainResult:
    """Chronological passes over the training snapshots, raw then inverse phase per timestamp.

    ``resume`` continues from a checkpoint (parameters, optimizer, RNG, epoch);
    ``epochs`` overrides the total epoch count.
    """
    config.validate()
    if not bundle.train:
        raise DataError("training split is empty")
    if resume is not None:
        model = model_from_checkpoint(resume)
        opt = resume.optimizer
        losses = list(resume.losses)
        start = resume.epoch
    else:
        model = HisRES(bundle.num_entities, bundle.num_relations, config)
        opt = OptimizerState(lr=config.lr)
        losses = []
        start = 0
    total = config.epochs if epochs is None else epochs
    timeline = bundle.timeline()
    index = build_index(bundle) if config.use_global else None
    result = TrainResult(model, opt, losses, start)
    for epoch in range(start, total):
        step_losses = []
        for snap in bundle.train:
            if len(snap) == 0:
                continue
            for phase in PHASES:
                step_losses.append(train_step(model, timeline, snap, phase, index, opt, timer))
        epoch_loss = float(np.mean(step_losses))
        losses.append(epoch_loss)
        result.epoch = epoch + 1
        log.info("epoch %d loss %.6f", epoch, epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
    return result


def evaluate(model: HisRES, bundle: DatasetBundle, split: str = "test", noise_std: float = 0.0,
             noise_seed: int = 0, timer: Optional[Timer] = None) -> MetricsReport:
    """Frozen-model pass over ``split`` with ground-truth history accumulation."""
    snaps = bundle.split(split)
    if not snaps:
        raise DataError(f"split {split!r} is empty")
    timeline = bundle.timeline()
    index = build_index(bundle) if model.config.use_global else None
    base = None
    if noise_std > 0:
        base = Tensor(perturb_embeddings(model.params.evo.entity_base.data, noise_std, noise_seed))
    ranks, per_t = [], {}
    with no_grad():
        for snap in snaps:
            if len(snap) == 0:
                continue
            step = []
            for phase in PHASES:
                queries = phase_triples(snap, phase, model.num_relations)
                ctx = model.context(training=False, timer=timer, phase="inference")
                enc = model.encode(timeline, snap.time, queries, index, ctx, base)
                logits, _ = model.score(enc, queries, ctx)
                step.extend(filtered_ranks(logits.data, queries).tolist())
            per_t[snap.time] = step
            ranks.extend(step)
    return compute_metrics(ranks, split, per_t)


def evaluate_baseline(bundle: DatasetBundle, split: str = "test") -> MetricsReport:
    """Historical-frequency baseline under the same filtered protocol."""
    snaps = bundle.split(split)
    if not snaps:
        raise DataError(f"split {split!r} is empty")
    first = snaps[0].time
    base = FrequencyBaseline(bundle.num_entities)
    timeline = bundle.timeline()
    for snap in timeline[:first]:
        base.observe(snap.augmented(bundle.num_relations))
    ranks, per_t = [], {}
    for snap in snaps:
        step = []
        if len(snap):
            for phase in PHASES:
                queries = phase_triples(snap, phase, bundle.num_relations)
                step.extend(filtered_ranks(base.batch_scores(queries), queries).tolist())
            per_t[snap.time] = step
            ranks.extend(step)
        base.observe(snap.augmented(bundle.num_relations))
    return compute_metrics(ranks, split, per_t)
