"""Declarative key-value configuration file.

Format: one ``key = value`` per line, ``#`` comments, UTF-8. Unknown keys are
rejected so typos cannot silently change a run.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from . import rag
from .errors import DataError
from .ingest import RULE_SETS


class InvalidConfigFile(DataError):
    pass


@dataclass
class WorkbenchConfig:
    gateway_url: str = ""
    gateway_token_env: str = ""
    model: str = ""
    model_baseline: str = ""
    model_fine_tuned: str = ""
    embedder: str = "fallback"  # "fallback" or an embeddings endpoint URL
    embedder_model: str = "hash-3gram-256-v1"
    embedder_dim: int = 256
    template_version: str = rag.TEMPLATE_VERSION
    rule_set: str = "default-v1"
    temperature: float = 0.0
    max_tokens: int = 512
    max_in_flight: int = 4

    def gateway_token(self) -> str:
        return os.environ.get(self.gateway_token_env, "") if self.gateway_token_env else ""

    def validate(self) -> None:
        if self.template_version != rag.TEMPLATE_VERSION:
            raise InvalidConfigFile(
                f"unknown template_version {self.template_version!r}; "
                f"this build ships {rag.TEMPLATE_VERSION!r}"
            )
        if self.rule_set not in RULE_SETS:
            raise InvalidConfigFile(f"unknown rule_set {self.rule_set!r}")
        if self.embedder != "fallback" and not self.embedder.startswith(("http://", "https://")):
            raise InvalidConfigFile("embedder must be 'fallback' or an http(s) URL")


_INT_FIELDS = {"embedder_dim", "max_tokens", "max_in_flight"}
_FLOAT_FIELDS = {"temperature"}


def load_config(path: str | Path) -> WorkbenchConfig:
    known = {f.name for f in fields(WorkbenchConfig)}
    values: dict[str, object] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InvalidConfigFile(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise InvalidConfigFile(f"{path}:{line_no}: unknown key {key!r}")
        try:
            if key in _INT_FIELDS:
                values[key] = int(value)
            elif key in _FLOAT_FIELDS:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError as exc:
            raise InvalidConfigFile(f"{path}:{line_no}: {exc}") from exc
    config = WorkbenchConfig(**values)
    config.validate()
    return config
