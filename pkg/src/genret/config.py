"""Experiment configuration: defaults, key=value config files, seed splitting.

Precedence is CLI flags > config file > defaults.  All randomness flows
from one root seed, split per subsystem with a stable hash so that adding
a consumer never shifts another consumer's stream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict[str, object] = {
    "id_scheme": "naive",
    "semantic_branching": 10,
    "semantic_leaf_size": 100,
    "teacher": "dense",
    "bm25_k1": 0.9,
    "bm25_b": 0.4,
    "dense_dim": 256,
    "segment_len": 48,
    "overlap": 8,
    "n_variants": 1,
    "pq_max_len": 16,
    "dropout_p": 0.0,
    "k_segment": 1,
    "k_pseudo": 5,
    "fanout": 10,
    "filter_fragments": True,
    "mode": "multi",
    "emb_dim": 64,
    "hidden_dim": 128,
    "max_positions": 64,
    "learning_rate": 1.0,
    "momentum": 0.9,
    "clip_norm": 5.0,
    "steps": 2000,
    "batch_size": 32,
    "dm_index_fraction": 0.5,
    "beam": 10,
    "seed": 0,
    "threads": 1,
}


@dataclass(frozen=True)
class ExperimentConfig:
    id_scheme: str = "naive"
    semantic_branching: int = 10
    semantic_leaf_size: int = 100
    teacher: str = "dense"
    bm25_k1: float = 0.9
    bm25_b: float = 0.4
    dense_dim: int = 256
    segment_len: int = 48
    overlap: int = 8
    n_variants: int = 1
    pq_max_len: int = 16
    dropout_p: float = 0.0
    k_segment: int = 1
    k_pseudo: int = 5
    fanout: int = 10
    filter_fragments: bool = True
    mode: str = "multi"
    emb_dim: int = 64
    hidden_dim: int = 128
    max_positions: int = 64
    learning_rate: float = 1.0
    momentum: float = 0.9
    clip_norm: float = 5.0
    steps: int = 2000
    batch_size: int = 32
    dm_index_fraction: float = 0.5
    beam: int = 10
    seed: int = 0
    threads: int = 1

    def as_dict(self) -> dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def parse_config_text(text: str) -> dict[str, object]:
    """Flat `key = value` lines; values are JSON scalars or bare strings."""
    values: dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"config line {line_no}: empty key")
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError:
            values[key] = value
    return values


def read_config_file(path) -> dict[str, object]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def resolve_config(file_values: dict[str, object] | None, overrides: dict[str, object]) -> ExperimentConfig:
    """Merge defaults, config-file values and CLI overrides (None = unset)."""
    merged = dict(DEFAULTS)
    for key, value in (file_values or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    coerced = {}
    for key, default in DEFAULTS.items():
        value = merged[key]
        try:
            if isinstance(default, bool):
                coerced[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                coerced[key] = int(value)
            elif isinstance(default, float):
                coerced[key] = float(value)
            else:
                coerced[key] = str(value)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} has invalid value {value!r}") from None
    return ExperimentConfig(**coerced)


def subsystem_seed(root_seed: int, label: str) -> int:
    """Stable 63-bit seed for a named consumer of the root seed."""
    digest = hashlib.blake2b(f"{root_seed}\x00{label}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def write_manifest(directory, command: str, config: ExperimentConfig, extra: dict | None = None) -> None:
    """Every artifact directory records its full resolved config and seed."""
    payload = {
        "command": command,
        "config": config.as_dict(),
        "seed": config.seed,
    }
    if extra:
        payload.update(extra)
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    (path / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
