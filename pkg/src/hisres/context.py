"""Per-forward settings: train/eval mode, the shared RNG and timing hooks."""

from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np


class Timer:
    """Accumulates wall-clock seconds per (module, phase)."""

    def __init__(self):
        self.totals: dict[tuple[str, str], float] = defaultdict(float)

    @contextmanager
    def section(self, module: str, phase: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[(module, phase)] += time.perf_counter() - start

    def rows(self) -> list[tuple[str, str, float]]:
        return [(m, p, s) for (m, p), s in self.totals.items()]


@dataclass
class ForwardContext:
    training: bool = False
    rng: Optional[np.random.Generator] = None
    dropout: float = 0.0
    timer: Optional[Timer] = None
    phase: str = "inference"
    record_attention: bool = False
    attention: list = field(default_factory=list)

    @contextmanager
    def timed(self, module: str) -> Iterator[None]:
        if self.timer is None:
            yield
        else:
            with self.timer.section(module, self.phase):
                yield
