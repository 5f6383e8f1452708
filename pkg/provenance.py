"""
Seed streams and run provenance

Handles random generator construction, deterministic stream splitting and
the config hash stamped into every output file, so that any result can be
replayed bit for bit from (config, seed).
"""

import hashlib
import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from errors import FileFormatError

if TYPE_CHECKING:
    from schemas import ExperimentConfig

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

# Stream keys, one per experiment kind
STREAM_ENVIRONMENT = 1
STREAM_STARTS = 2
STREAM_QUENCHED = 3
STREAM_ANNEALED = 4
STREAM_TREES = 5
STREAM_RDE = 6
STREAM_MSTAR = 7
STREAM_ORACLE = 8
STREAM_COLLISIONS = 9

# Fields that change how a run executes but never what it writes
_HASH_EXCLUDED = {"out_dir", "jobs"}


@dataclass(frozen=True)
class SeedRecord:
    """Root seed plus the spawn key of the stream an object was drawn from"""

    entropy: int
    key: tuple[int, ...] = ()

    def to_token(self) -> str:
        """Single whitespace-free token, e.g. '42' or '42:1.0.3'"""
        if not self.key:
            return str(self.entropy)
        return f"{self.entropy}:{'.'.join(str(k) for k in self.key)}"

    @classmethod
    def from_token(cls, token: str) -> "SeedRecord | None":
        if token == "none":
            return None
        try:
            entropy, _, key = token.partition(":")
            parts = tuple(int(k) for k in key.split(".")) if key else ()
            return cls(int(entropy), parts)
        except ValueError:
            raise FileFormatError(f"Malformed seed token '{token}'")


def seed_record(seed: SeedLike) -> SeedRecord | None:
    """
    Describe where a generator came from

    Args:
        seed: Whatever was handed to a sampling operation

    Returns:
        SeedRecord for ints and SeedSequences, None for caller-owned generators
    """
    if isinstance(seed, np.random.Generator):
        return None
    if isinstance(seed, np.random.SeedSequence):
        return SeedRecord(int(seed.entropy), tuple(int(k) for k in seed.spawn_key))
    return SeedRecord(int(seed))


def task_stream(seed: int, *key: int) -> np.random.SeedSequence:
    """
    Independent stream for one task

    Streams are keyed by task indices rather than spawned in execution order,
    so the number of worker processes never changes any draw.
    """
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Build a PCG64 generator from an int, a SeedSequence or pass a Generator through"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def config_hash(config: "ExperimentConfig") -> str:
    """
    SHA-256 of the canonical JSON form of a config

    Args:
        config: Validated experiment config

    Returns:
        str: Hex digest, identical for configs that produce identical outputs
    """
    payload = config.model_dump(mode="json", exclude=_HASH_EXCLUDED)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def provenance_header(digest: str, seed: int) -> str:
    """Comment line that opens every output file"""
    return f"# config_hash={digest} seed={seed}"
