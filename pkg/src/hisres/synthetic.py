"""Toy temporal knowledge graphs with known structure.

Patterns:

* ``periodic`` - a fixed set of facts, each recurring every ``period`` steps
  from its own phase;
* ``chain`` - ``(a, r0, b)`` at t is followed by ``(b, r1, c)`` at t+1, where
  ``c`` is a fixed partner of ``a`` (or random with ``random_tail``), and, with
  ``closure``, by ``(a, r2, c)`` at t+2 (a two-hop path across adjacent
  snapshots);
* ``recurrent`` - (subject, relation) slots whose object is redrawn every
  ``regime`` steps and recurs every ``period`` steps inside a regime, so the
  answer is only visible far back in history.

Noise facts (uniformly random triples) are added at ``noise`` times the number
of pattern facts per timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from hisres.data import DatasetBundle, build_snapshots, write_dataset
from hisres.errors import ConfigError

PATTERNS = ("periodic", "chain", "recurrent")


@dataclass
class GeneratorSpec:
    num_entities: int = 10
    num_relations: int = 4
    num_timestamps: int = 20
    pattern: str = "periodic"
    period: int = 2
    noise: float = 0.0
    seed: int = 0
    facts_per_step: int = 4
    facts: Optional[list] = None
    closure: bool = False
    random_tail: bool = False
    regime: int = 24
    split: tuple = (0.8, 0.1, 0.1)

    def validate(self) -> "GeneratorSpec":
        if self.pattern not in PATTERNS:
            raise ConfigError(f"pattern must be one of {PATTERNS}")
        if self.num_entities < 3 or self.num_relations < 1 or self.num_timestamps < 3:
            raise ConfigError("need at least 3 entities, 1 relation and 3 timestamps")
        if not 1 <= self.period < self.num_timestamps:
            raise ConfigError("period must satisfy 1 <= period < num_timestamps")
        if self.noise < 0:
            raise ConfigError("noise fraction must be non-negative")
        if self.pattern == "chain" and self.num_relations < (3 if self.closure else 2):
            raise ConfigError("chain pattern needs relations r0, r1 (and r2 with closure)")
        if self.facts is not None:
            for s, r, o in self.facts:
                if not (0 <= s < self.num_entities and 0 <= o < self.num_entities and 0 <= r < self.num_relations):
                    raise ConfigError(f"fact {(s, r, o)} out of range")
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) <= 0:
            raise ConfigError("split fractions must be positive and sum to 1")
        return self


@dataclass
class GeneratedDataset:
    bundle: DatasetBundle
    pattern_facts: np.ndarray      # (n, 4) facts produced by the pattern
    noise_facts: np.ndarray        # (m, 4)
    spec: GeneratorSpec = field(repr=False, default=None)

    def write(self, directory) -> Path:
        directory = write_dataset(self.bundle, directory)
        with (directory / "queries.txt").open("w", encoding="utf-8", newline="\n") as fh:
            for s, r, o, t in self.pattern_facts.tolist():
                fh.write(f"{s}\t{r}\t{o}\t{t}\n")
        return directory


def _periodic_facts(spec: GeneratorSpec, rng: np.random.Generator) -> list[tuple[int, int, int, int]]:
    if spec.facts is not None:
        base = [(int(s), int(r), int(o), i % spec.period) for i, (s, r, o) in enumerate(spec.facts)]
    else:
        base = []
        for phase in range(spec.period):
            used_sr, used_ro, used_so = set(), set(), set()
            tries = 0
            while sum(1 for f in base if f[3] == phase) < spec.facts_per_step:
                tries += 1
                if tries > 10000:
                    raise ConfigError("cannot place that many unambiguous periodic facts")
                s, o = rng.choice(spec.num_entities, size=2, replace=False).tolist()
                r = int(rng.integers(spec.num_relations))
                if (s, r) in used_sr or (r, o) in used_ro or (s, o) in used_so:
                    continue
                used_sr.add((s, r)); used_ro.add((r, o)); used_so.add((s, o))
                base.append((s, r, o, phase))
    out = []
    for s, r, o, phase in base:
        for t in range(phase, spec.num_timestamps, spec.period):
            out.append((s, r, o, t))
    return out


def _chain_facts(spec: GeneratorSpec, rng: np.random.Generator) -> list[tuple[int, int, int, int]]:
    n = spec.num_entities
    # a cyclic derangement, so partner[a] != a
    order = rng.permutation(n)
    partner = np.empty(n, dtype=np.int64)
    partner[order] = np.roll(order, -1)
    out = []
    for t in range(spec.num_timestamps):
        for _ in range(spec.facts_per_step):
            if spec.random_tail:
                a, b = rng.choice(n, size=2, replace=False).tolist()
                c = int(rng.choice([e for e in range(n) if e not in (a, b)]))
            else:
                a = int(rng.integers(n))
                c = int(partner[a])
                b = int(rng.choice([e for e in range(n) if e not in (a, c)]))
            out.append((a, 0, b, t))
            if t + 1 < spec.num_timestamps:
                out.append((b, 1, c, t + 1))
            if spec.closure and t + 2 < spec.num_timestamps:
                out.append((a, 2, c, t + 2))
    return out


def _recurrent_facts(spec: GeneratorSpec, rng: np.random.Generator) -> list[tuple[int, int, int, int]]:
    n = spec.num_entities
    slots = set()
    while len(slots) < spec.facts_per_step:
        slots.add((int(rng.integers(n)), int(rng.integers(spec.num_relations))))
    out = []
    for s, r in sorted(slots):
        phase = int(rng.integers(spec.period))
        shift = int(rng.integers(spec.regime))
        obj = None
        for t in range(phase, spec.num_timestamps, spec.period):
            regime_id = (t + shift) // spec.regime
            if obj is None or regime_id != obj[1]:
                o = int(rng.integers(n - 1))
                obj = (o + (o >= s), regime_id)
            out.append((s, r, obj[0], t))
    return out


def generate(spec: GeneratorSpec) -> GeneratedDataset:
    """Deterministic dataset for ``spec``; pattern facts are the recorded ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    maker = {"periodic": _periodic_facts, "chain": _chain_facts, "recurrent": _recurrent_facts}[spec.pattern]
    pattern = np.asarray(maker(spec, rng), dtype=np.int64).reshape(-1, 4)
    noise_rows = []
    if spec.noise > 0:
        per_step = np.bincount(pattern[:, 3], minlength=spec.num_timestamps)
        for t in range(spec.num_timestamps):
            for _ in range(int(round(spec.noise * per_step[t]))):
                s, o = rng.choice(spec.num_entities, size=2, replace=False).tolist()
                noise_rows.append((s, int(rng.integers(spec.num_relations)), o, t))
    noise = np.asarray(noise_rows, dtype=np.int64).reshape(-1, 4)
    facts = np.concatenate([pattern, noise]) if len(noise) else pattern

    T = spec.num_timestamps
    n_train = max(1, int(round(spec.split[0] * T)))
    n_valid = max(1, int(round(spec.split[1] * T)))
    bounds = [(0, n_train - 1), (n_train, n_train + n_valid - 1), (n_train + n_valid, T - 1)]
    splits = []
    for lo, hi in bounds:
        sel = facts[(facts[:, 3] >= lo) & (facts[:, 3] <= hi)]
        splits.append(build_snapshots(sel, lo, hi) if hi >= lo else [])
    bundle = DatasetBundle(spec.num_entities, spec.num_relations, *splits, granularity=1,
                           name=f"synthetic-{spec.pattern}")
    bundle.validate()
    return GeneratedDataset(bundle, pattern, noise, spec)
