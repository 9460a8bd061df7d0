"""Run configuration: defaults, key=value files and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from hisres.errors import ConfigError


@dataclass
class RunConfig:
    dataset_dir: Optional[str] = None
    dim: int = 200
    epochs: int = 30
    history_len: int = 9
    omega: int = 2
    layers: int = 2
    lr: float = 0.001
    alpha: float = 0.7
    dropout: float = 0.2
    seed: int = 0
    noise_std: float = 0.0
    checkpoint: Optional[str] = None
    metrics_out: Optional[str] = None
    degree_norm: bool = False
    granularity: str = "1"
    channels: int = 50
    kernel: int = 3
    use_inter: bool = True
    use_global: bool = True
    use_time: bool = True

    def validate(self) -> "RunConfig":
        if self.dim <= 0:
            raise ConfigError("dim must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.history_len < 1:
            raise ConfigError("history_len must be >= 1")
        if not 1 <= self.omega <= self.history_len:
            raise ConfigError(f"omega must satisfy 1 <= omega <= history_len, got omega={self.omega}, "
                              f"history_len={self.history_len}")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError("kernel must be a positive odd width")
        if self.granularity != "auto":
            try:
                if int(self.granularity) < 1:
                    raise ValueError
            except ValueError:
                raise ConfigError("granularity must be a positive integer or 'auto'") from None
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(known[name], raw)
        return cls(**kwargs)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _coerce(f: dataclasses.Field, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if "bool" in kind:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in kind and "Optional" not in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {f.name}") from None
    return raw


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        values[key] = value
    return values
