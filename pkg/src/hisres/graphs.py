"""Graph views consumed by the encoders.

* window graphs: deduplicated unions of every ``omega`` consecutive snapshots
  (stride 1) over the recent history;
* the global relevance graph: every historical fact whose (subject, relation)
  matches a current query pair, timestamps dropped.

Triples here are (n, 3) int arrays of ``s, r, o`` that already include inverse
edges when the caller wants them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from hisres.data import Snapshot
from hisres.errors import ConfigError

_EMPTY = np.zeros((0, 3), dtype=np.int64)


def unique_triples(triples: np.ndarray) -> np.ndarray:
    if len(triples) == 0:
        return _EMPTY
    return np.unique(np.asarray(triples, dtype=np.int64).reshape(-1, 3), axis=0)


@dataclass
class WindowGraph:
    start: int
    end: int
    triples: np.ndarray

    @property
    def span(self) -> int:
        return self.end - self.start + 1


@dataclass
class GlobalRelevanceGraph:
    time: int
    query_pairs: np.ndarray
    triples: np.ndarray

    def __len__(self) -> int:
        return len(self.triples)


def window_count(history_len: int, omega: int) -> int:
    return history_len - omega + 1


def window_graphs(snapshots: Sequence[Snapshot], omega: int, num_relations: int | None = None,
                  strict: bool = True) -> list[WindowGraph]:
    """Sliding windows of ``omega`` snapshots, stride 1, oldest first.

    With ``num_relations`` the member snapshots contribute their inverse-augmented
    triples. When ``strict`` is false and fewer than ``omega`` snapshots are
    available (start of the timeline), a single window over all of them is built.
    """
    l = len(snapshots)
    if omega < 1:
        raise ConfigError("omega must be >= 1")
    if omega > l:
        if strict or l == 0:
            raise ConfigError(f"omega={omega} exceeds history length {l}")
        omega = l
    out = []
    for i in range(l - omega + 1):
        members = snapshots[i:i + omega]
        parts = [m.augmented(num_relations) if num_relations is not None else m.triples for m in members]
        out.append(WindowGraph(members[0].time, members[-1].time, unique_triples(np.concatenate(parts))))
    return out


def _pair_set(query_pairs) -> set[tuple[int, int]]:
    return {(int(s), int(r)) for s, r in np.asarray(query_pairs, dtype=np.int64).reshape(-1, 2)}


def build_global_graph_naive(history: Iterable[Snapshot], query_pairs, time: int,
                             num_relations: int | None = None) -> GlobalRelevanceGraph:
    """Reference implementation: scan every historical fact."""
    wanted = _pair_set(query_pairs)
    keep = []
    for snap in history:
        if snap.time >= time:
            continue
        triples = snap.augmented(num_relations) if num_relations is not None else snap.triples
        for s, r, o in triples:
            if (int(s), int(r)) in wanted:
                keep.append((s, r, o))
    return GlobalRelevanceGraph(time, np.asarray(sorted(wanted), dtype=np.int64).reshape(-1, 2),
                                unique_triples(np.asarray(keep, dtype=np.int64)))


class RelevanceIndex:
    """Append-only ``(s, r) -> {o: first time seen}`` index over added snapshots.

    Since the global graph is deduplicated on (s, r, o), a fact belongs to the
    graph at reference time t exactly when its first occurrence is before t, so
    one index over the whole timeline serves every reference time.
    """

    def __init__(self, num_relations: int | None = None):
        self.num_relations = num_relations
        self._index: dict[tuple[int, int], dict[int, int]] = {}
        self.latest = -1

    def add_snapshot(self, snap: Snapshot) -> None:
        if snap.time < self.latest:
            raise ValueError("snapshots must be added in chronological order")
        self.latest = snap.time
        triples = snap.augmented(self.num_relations) if self.num_relations is not None else snap.triples
        t = snap.time
        for s, r, o in triples.tolist():
            objs = self._index.setdefault((s, r), {})
            if o not in objs:
                objs[o] = t

    def extend(self, snapshots: Iterable[Snapshot]) -> "RelevanceIndex":
        for s in snapshots:
            self.add_snapshot(s)
        return self

    def build(self, query_pairs, time: int) -> GlobalRelevanceGraph:
        wanted = sorted(_pair_set(query_pairs))
        rows = []
        for s, r in wanted:
            objs = self._index.get((s, r))
            if not objs:
                continue
            for o, first in objs.items():
                if first < time:
                    rows.append((s, r, o))
        triples = np.asarray(sorted(rows), dtype=np.int64).reshape(-1, 3) if rows else _EMPTY
        return GlobalRelevanceGraph(time, np.asarray(wanted, dtype=np.int64).reshape(-1, 2), triples)


def build_global_graph(history: Sequence[Snapshot], query_pairs, time: int,
                       num_relations: int | None = None) -> GlobalRelevanceGraph:
    return RelevanceIndex(num_relations).extend(s for s in history if s.time < time).build(query_pairs, time)


def in_neighbors(triples: np.ndarray, obj: int) -> list[tuple[int, int]]:
    """All (s, r) with (s, r, obj) in the graph, sorted."""
    triples = np.asarray(triples).reshape(-1, 3)
    hits = triples[triples[:, 2] == obj]
    return sorted({(int(s), int(r)) for s, r, _ in hits})


def query_pairs_of(triples: np.ndarray) -> np.ndarray:
    """Distinct (s, r) pairs of a batch of query triples."""
    if len(triples) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.asarray(triples)[:, :2], axis=0)
