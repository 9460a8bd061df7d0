"""Time-aware filtered ranking metrics, a frequency baseline and noise injection."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from hisres.errors import ConfigError

METRICS_SCHEMA = {
    "type": "object",
    "required": ["split", "mrr", "hits1", "hits3", "hits10", "num_queries", "per_timestamp"],
    "properties": {
        "split": {"type": "string"},
        "mrr": {"type": "number", "minimum": 0, "maximum": 1},
        "hits1": {"type": "number", "minimum": 0, "maximum": 1},
        "hits3": {"type": "number", "minimum": 0, "maximum": 1},
        "hits10": {"type": "number", "minimum": 0, "maximum": 1},
        "num_queries": {"type": "integer", "minimum": 1},
        "per_timestamp": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["time", "mrr", "hits1", "hits3", "hits10", "num_queries"],
                "properties": {
                    "time": {"type": "integer"},
                    "mrr": {"type": "number"},
                    "hits1": {"type": "number"},
                    "hits3": {"type": "number"},
                    "hits10": {"type": "number"},
                    "num_queries": {"type": "integer"},
                },
            },
        },
    },
}


def filtered_rank(scores: np.ndarray, target: int, other_true: Iterable[int] = ()) -> int:
    """1 + number of unfiltered candidates scoring strictly above the target."""
    scores = np.asarray(scores, dtype=float)
    if not 0 <= target < scores.shape[0]:
        raise IndexError(f"target {target} out of range")
    better = scores > scores[target]
    others = np.fromiter((int(e) for e in other_true), dtype=np.int64)
    if others.size:
        better[others] = False
    return int(better.sum()) + 1


def filtered_ranks(logits: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Ranks for a batch of (s, r, o) queries, filtering the other answers of each (s, r) in the batch.

    The batch is all facts of one timestamp and one direction, which makes the
    filter time-aware.
    """
    logits = np.asarray(logits)
    queries = np.asarray(queries, dtype=np.int64)
    answers: dict[tuple[int, int], list[int]] = defaultdict(list)
    for s, r, o in queries.tolist():
        answers[(s, r)].append(o)
    rows = np.arange(len(queries))
    target = logits[rows, queries[:, 2]]
    better = logits > target[:, None]
    for i, (s, r, _) in enumerate(queries.tolist()):
        better[i, answers[(s, r)]] = False
    return better.sum(axis=1) + 1


@dataclass
class MetricsReport:
    split: str
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    num_queries: int
    per_timestamp: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text


def _summary(ranks: np.ndarray) -> dict:
    ranks = np.asarray(ranks, dtype=float)
    return {
        "mrr": float(np.mean(1.0 / ranks)),
        "hits1": float(np.mean(ranks <= 1)),
        "hits3": float(np.mean(ranks <= 3)),
        "hits10": float(np.mean(ranks <= 10)),
        "num_queries": int(ranks.size),
    }


def compute_metrics(ranks: Sequence[int], split: str = "test",
                    per_timestamp: Optional[dict[int, Sequence[int]]] = None) -> MetricsReport:
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ValueError("cannot compute metrics from an empty rank list")
    if ranks.min() < 1:
        raise ValueError("ranks must be >= 1")
    breakdown = []
    for t, rs in sorted((per_timestamp or {}).items()):
        if len(rs):
            breakdown.append({"time": int(t), **_summary(rs)})
    return MetricsReport(split=split, per_timestamp=breakdown, **_summary(ranks))


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, METRICS_SCHEMA)


class FrequencyBaseline:
    """Scores each object by how often (s, r, o) occurred before the query time."""

    def __init__(self, num_entities: int):
        self.num_entities = num_entities
        self.counts: dict[tuple[int, int], Counter] = defaultdict(Counter)

    def observe(self, triples: np.ndarray) -> None:
        for s, r, o in np.asarray(triples).reshape(-1, 3).tolist():
            self.counts[(s, r)][o] += 1

    def scores(self, subject: int, relation: int) -> np.ndarray:
        out = np.zeros(self.num_entities)
        for o, c in self.counts.get((subject, relation), {}).items():
            out[o] = c
        return out

    def batch_scores(self, queries: np.ndarray) -> np.ndarray:
        return np.stack([self.scores(s, r) for s, r, _ in np.asarray(queries).tolist()]) \
            if len(queries) else np.zeros((0, self.num_entities))


def frequency_baseline(history: np.ndarray, query: tuple[int, int], num_entities: int,
                       time: Optional[int] = None) -> np.ndarray:
    """Counts of (s, r, o, .) in ``history`` (n, 4) strictly before ``time``."""
    history = np.asarray(history).reshape(-1, 4)
    if time is not None:
        history = history[history[:, 3] < time]
    base = FrequencyBaseline(num_entities)
    base.observe(history[:, :3])
    return base.scores(*query)


def perturb_embeddings(entities: np.ndarray, noise_std: float, seed: int) -> np.ndarray:
    """Add seeded N(0, noise_std^2) noise; ``noise_std == 0`` returns an exact copy."""
    if noise_std < 0:
        raise ConfigError("noise_std must be non-negative")
    entities = np.asarray(entities, dtype=np.float64)
    if noise_std == 0:
        return entities.copy()
    rng = np.random.default_rng(seed)
    return entities + rng.normal(0.0, noise_std, size=entities.shape)
