"""Parameter containers and initialisation."""

from __future__ import annotations

import dataclasses
from typing import Iterator

import numpy as np

from hisres.numerics.tensor import Tensor


def uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> Tensor:
    """Parameter drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class ParamGroup:
    """Mixin for dataclasses whose fields are tensors, nested groups or lists of them."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            name = f"{prefix}{f.name}"
            yield from _walk(value, name)


def _walk(value, name: str) -> Iterator[tuple[str, Tensor]]:
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, ParamGroup):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")
