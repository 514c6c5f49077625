"""Service configuration, sourced from MODELSVC_* environment variables."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping


class ConfigError(ValueError):
    """Bad or contradictory service configuration."""


ENV = {
    "stub_graph": "MODELSVC_STUB_GRAPH",
    "relations": "MODELSVC_RELATIONS",
    "classifier_checkpoint": "MODELSVC_CLASSIFIER_CHECKPOINT",
    "generator_checkpoint": "MODELSVC_GENERATOR_CHECKPOINT",
    "bind": "MODELSVC_BIND",
    "max_beam": "MODELSVC_MAX_BEAM",
}


@dataclass(frozen=True)
class ServiceConfig:
    """What serves each model endpoint.

    Exactly one of {stub graph, checkpoint} must be active per endpoint; the
    stub graph, when given, serves both /classify and /generate, so it cannot
    be combined with either checkpoint.
    """

    stub_graph: Path | None = None
    relations: Path | None = None
    classifier_checkpoint: Path | None = None
    generator_checkpoint: Path | None = None
    bind: str = "127.0.0.1:8901"
    max_beam: int = 50

    def __post_init__(self) -> None:
        if self.stub_graph and self.classifier_checkpoint:
            raise ConfigError("classify endpoint has both a stub graph and a checkpoint")
        if self.stub_graph and self.generator_checkpoint:
            raise ConfigError("generate endpoint has both a stub graph and a checkpoint")
        if not self.stub_graph and not self.classifier_checkpoint:
            raise ConfigError("classify endpoint has neither a stub graph nor a checkpoint")
        if not self.stub_graph and not self.generator_checkpoint:
            raise ConfigError("generate endpoint has neither a stub graph nor a checkpoint")
        if self.max_beam < 1:
            raise ConfigError(f"max beam must be >= 1, got {self.max_beam}")
        host, sep, port = self.bind.rpartition(":")
        if not sep or not host or not port.isdigit() or not (0 < int(port) < 65536):
            raise ConfigError(f"bind must be host:port, got {self.bind!r}")

    @property
    def host(self) -> str:
        return self.bind.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.bind.rpartition(":")[2])

    @property
    def stub_mode(self) -> bool:
        return self.stub_graph is not None

    @classmethod
    def from_env(cls, env: Mapping[str, str] = os.environ) -> "ServiceConfig":
        def path_of(key: str) -> Path | None:
            raw = env.get(ENV[key], "").strip()
            return Path(raw) if raw else None

        kwargs: dict = {
            "stub_graph": path_of("stub_graph"),
            "relations": path_of("relations"),
            "classifier_checkpoint": path_of("classifier_checkpoint"),
            "generator_checkpoint": path_of("generator_checkpoint"),
        }
        if env.get(ENV["bind"], "").strip():
            kwargs["bind"] = env[ENV["bind"]].strip()
        raw_beam = env.get(ENV["max_beam"], "").strip()
        if raw_beam:
            try:
                kwargs["max_beam"] = int(raw_beam)
            except ValueError as exc:
                raise ConfigError(f"{ENV['max_beam']} must be an integer, got {raw_beam!r}") from exc
        return cls(**kwargs)
