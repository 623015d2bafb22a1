"""Environment-driven service configuration."""

import os
from dataclasses import dataclass
from typing import Mapping

ENV_PREFIX = "EMBEDSVC_"
HASH_BACKEND = "hashed-ngram"


@dataclass(frozen=True)
class ServiceConfig:
    """Runtime settings, one per EMBEDSVC_* variable.

    ``model`` names a transformer checkpoint, or the special value
    ``hashed-ngram`` for the dependency-free default backend. ``dim``
    applies to the hashed backend only; transformer models fix their own
    hidden size.
    """

    model: str = HASH_BACKEND
    dim: int = 768
    pooling: str = "cls"
    max_batch: int = 256
    max_chars: int = 4096
    max_tokens: int = 64
    host: str = "127.0.0.1"
    port: int = 9000

    def __post_init__(self):
        if self.pooling not in ("cls", "mean"):
            raise ValueError(f"pooling must be 'cls' or 'mean', got {self.pooling!r}")
        if self.dim < 16:
            raise ValueError("dim must be at least 16")
        for name in ("max_batch", "max_chars", "max_tokens", "port"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def from_env(environ: Mapping[str, str] = os.environ) -> ServiceConfig:
    def read(name, cast, default):
        raw = environ.get(ENV_PREFIX + name)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError as exc:
            raise ValueError(f"bad {ENV_PREFIX}{name}={raw!r}: {exc}") from exc

    return ServiceConfig(
        model=read("MODEL", str, HASH_BACKEND),
        dim=read("DIM", int, 768),
        pooling=read("POOLING", str, "cls"),
        max_batch=read("MAX_BATCH", int, 256),
        max_chars=read("MAX_CHARS", int, 4096),
        max_tokens=read("MAX_TOKENS", int, 64),
        host=read("HOST", str, "127.0.0.1"),
        port=read("PORT", int, 9000),
    )
