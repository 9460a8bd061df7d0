"""Quadruple datasets: parsing, inverse augmentation, snapshots and splits.

A dataset directory holds ``train.txt``, ``valid.txt`` and ``test.txt`` (tab
separated ``s r o t`` integers, raw time units) plus ``stat.txt`` with
``|E| |R|``. Times are divided by the dataset granularity to get contiguous
0-based timestamp indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, TextIO

import numpy as np

from hisres.errors import DataError, ParseError

SPLITS = ("train", "valid", "test")


class Quadruple(NamedTuple):
    subject: int
    relation: int
    object: int
    time: int


def _as_array(facts) -> np.ndarray:
    arr = np.asarray(facts, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 4), dtype=np.int64)
    return arr.reshape(-1, 4)


def parse_quadruples(stream: Iterable[str], granularity: int = 1) -> np.ndarray:
    """Read ``s r o t`` lines into an (n, 4) int array of normalized quadruples.

    Blank lines are skipped, columns past the fourth ignored. Duplicates are
    kept; deduplication happens when snapshots are built.
    """
    if granularity < 1:
        raise DataError("granularity must be a positive integer")
    rows = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) < 4:
            parts = line.split()
        if len(parts) < 4:
            raise ParseError(f"expected 4 tab-separated integers, got {line!r}", lineno)
        try:
            s, r, o, t = (int(p) for p in parts[:4])
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
        if min(s, r, o, t) < 0:
            raise DataError(f"line {lineno}: negative id in {line!r}")
        if t % granularity:
            raise ParseError(f"time {t} is not a multiple of granularity {granularity}", lineno)
        rows.append((s, r, o, t // granularity))
    return _as_array(rows)


def to_quadruples(facts: np.ndarray) -> list[Quadruple]:
    return [Quadruple(*map(int, row)) for row in facts]


def add_inverses(facts: np.ndarray, num_relations: int) -> np.ndarray:
    """Append ``(o, r + |R|, s, t)`` for every ``(s, r, o, t)``."""
    facts = _as_array(facts)
    if facts.size and facts[:, 1].max() >= num_relations:
        raise DataError("relation id exceeds the raw relation count")
    inv = facts[:, [2, 1, 0, 3]].copy()
    inv[:, 1] += num_relations
    return np.concatenate([facts, inv], axis=0)


def inverse_triples(triples: np.ndarray, num_relations: int) -> np.ndarray:
    inv = triples[:, [2, 1, 0]].copy()
    inv[:, 1] += num_relations
    return inv


@dataclass
class Snapshot:
    """All (deduplicated) raw facts at one timestamp, as an (n, 3) s/r/o array."""

    time: int
    triples: np.ndarray
    _augmented: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def facts(self) -> list[Quadruple]:
        return [Quadruple(int(s), int(r), int(o), self.time) for s, r, o in self.triples]

    def augmented(self, num_relations: int) -> np.ndarray:
        """Raw triples followed by their inverses (cached)."""
        if self._augmented is None:
            self._augmented = np.concatenate([self.triples, inverse_triples(self.triples, num_relations)])
        return self._augmented


def _unique_rows(triples: np.ndarray) -> np.ndarray:
    if len(triples) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    return np.unique(triples, axis=0)


def build_snapshots(facts: np.ndarray, start: Optional[int] = None, end: Optional[int] = None) -> list[Snapshot]:
    """One snapshot per timestamp in ``[start, end]``, empty ones included."""
    facts = _as_array(facts)
    if start is None:
        start = int(facts[:, 3].min()) if len(facts) else 0
    if end is None:
        end = int(facts[:, 3].max()) if len(facts) else start - 1
    order = np.argsort(facts[:, 3], kind="stable")
    facts = facts[order]
    times = facts[:, 3]
    snapshots = []
    for t in range(start, end + 1):
        lo, hi = np.searchsorted(times, t, "left"), np.searchsorted(times, t, "right")
        snapshots.append(Snapshot(t, _unique_rows(facts[lo:hi, :3])))
    return snapshots


def snapshots_to_quadruples(snapshots: Iterable[Snapshot]) -> np.ndarray:
    rows = [np.column_stack([s.triples, np.full(len(s), s.time)]) for s in snapshots if len(s)]
    return _as_array(np.concatenate(rows)) if rows else _as_array([])


@dataclass
class DatasetBundle:
    num_entities: int
    num_relations: int
    train: list[Snapshot]
    valid: list[Snapshot]
    test: list[Snapshot]
    granularity: int = 1
    name: str = "dataset"
    _timeline: Optional[list[Snapshot]] = field(default=None, repr=False, compare=False)

    def split(self, name: str) -> list[Snapshot]:
        if name not in SPLITS:
            raise DataError(f"unknown split {name!r}")
        return getattr(self, name)

    def split_facts(self, name: str) -> np.ndarray:
        return snapshots_to_quadruples(self.split(name))

    @property
    def num_timestamps(self) -> int:
        return len(self.timeline())

    def timeline(self) -> list[Snapshot]:
        """All snapshots indexed by time, gaps between splits filled with empty ones."""
        if self._timeline is None:
            by_time = {s.time: s for name in SPLITS for s in self.split(name)}
            last = max(by_time) if by_time else -1
            self._timeline = [by_time.get(t, Snapshot(t, _unique_rows(np.zeros((0, 3), np.int64))))
                              for t in range(last + 1)]
        return self._timeline

    def validate(self) -> None:
        prev_max = -1
        for name in SPLITS:
            snaps = self.split(name)
            if not snaps:
                continue
            if snaps[0].time <= prev_max:
                raise DataError(f"split {name} is not chronologically after the previous split")
            prev_max = snaps[-1].time
            for s in snaps:
                if len(s) == 0:
                    continue
                if s.triples[:, [0, 2]].max() >= self.num_entities:
                    raise DataError(f"entity id out of range at t={s.time}")
                if s.triples[:, 1].max() >= self.num_relations:
                    raise DataError(f"relation id out of range at t={s.time}")

    def all_facts(self) -> np.ndarray:
        return snapshots_to_quadruples(self.timeline())


def _read_split(path: Path, granularity: int) -> np.ndarray:
    if not path.exists():
        return _as_array([])
    with path.open(encoding="utf-8") as fh:
        return parse_quadruples(fh, granularity)


def infer_granularity(paths: Iterable[Path]) -> int:
    """GCD of all raw timestamps, so daily data stored in hours maps to 1 per day."""
    times = set()
    for p in paths:
        if p.exists():
            with p.open(encoding="utf-8") as fh:
                for line in fh:
                    parts = line.split()
                    if len(parts) >= 4:
                        times.add(int(parts[3]))
    g = reduce(math.gcd, times, 0)
    return g or 1


def read_stat(path: Path) -> tuple[int, int]:
    try:
        parts = path.read_text(encoding="utf-8").split()
        return int(parts[0]), int(parts[1])
    except (OSError, IndexError, ValueError) as exc:
        raise DataError(f"cannot read {path}: expected '|E| |R|'") from exc


def load_dataset(directory, granularity: int | str = 1) -> DatasetBundle:
    """Load a dataset directory; ``granularity="auto"`` uses the GCD of raw times."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"dataset directory {directory} not found")
    files = {name: directory / f"{name}.txt" for name in SPLITS}
    if not files["train"].exists():
        raise DataError(f"{files['train']} missing")
    if granularity == "auto":
        granularity = infer_granularity(files.values())
    granularity = int(granularity)
    facts = {name: _read_split(p, granularity) for name, p in files.items()}
    stat = directory / "stat.txt"
    if stat.exists():
        num_e, num_r = read_stat(stat)
    else:
        every = np.concatenate(list(facts.values()))
        num_e = int(max(every[:, 0].max(), every[:, 2].max())) + 1
        num_r = int(every[:, 1].max()) + 1
    splits = {}
    for name in SPLITS:
        f = facts[name]
        splits[name] = build_snapshots(f) if len(f) else []
    bundle = DatasetBundle(num_e, num_r, splits["train"], splits["valid"], splits["test"],
                           granularity=granularity, name=directory.name)
    bundle.validate()
    return bundle


def write_split(snapshots: Iterable[Snapshot], fh: TextIO, granularity: int = 1) -> None:
    for s in snapshots:
        for a, r, b in s.triples:
            fh.write(f"{a}\t{r}\t{b}\t{s.time * granularity}\n")


def write_dataset(bundle: DatasetBundle, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in SPLITS:
        with (directory / f"{name}.txt").open("w", encoding="utf-8", newline="\n") as fh:
            write_split(bundle.split(name), fh, bundle.granularity)
    (directory / "stat.txt").write_text(f"{bundle.num_entities}\t{bundle.num_relations}\n", encoding="utf-8")
    return directory


def read_names(path) -> dict[int, str]:
    """``name\\tid`` lookup files, used only for readable dumps."""
    path = Path(path)
    names: dict[int, str] = {}
    if not path.exists():
        return names
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.rsplit("\t", 1)
        if len(parts) == 2 and parts[1].strip().isdigit():
            names[int(parts[1])] = parts[0]
    return names
