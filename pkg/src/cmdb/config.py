"""Layered configuration: flags > environment > config file > defaults.

The config file is TOML with flat keys (documented in the README); the
same keys can come from CM_* environment variables or be forced
programmatically (the CLI passes parsed flags as overrides).
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

_ENV_KEYS = {
    "db_path": "CM_DB_PATH",
    "workdir": "CM_WORKDIR",
    "provider": "CM_PROVIDER",
    "provider_url": "CM_PROVIDER_URL",
    "api_key": "CM_API_KEY",
    "gatekeeper_model": "CM_GATEKEEPER_MODEL",
    "analyst_model": "CM_ANALYST_MODEL",
    "listen_addr": "CM_LISTEN_ADDR",
    "api_token": "CM_API_TOKEN",
}

_INT_KEYS = {"limit_chars", "correction_budget", "workers", "upload_limit_mb"}
_FLOAT_KEYS = {"doc_timeout_s"}


@dataclass
class PipelineConfig:
    limit_chars: int = 8000
    correction_budget: int = 3
    workers: int = 4
    doc_timeout_s: float = 300.0
    db_path: str = "cmdb.sqlite"
    workdir: str = ""  # default: "<db_path dir>/cmdb_work"
    provider: str = ""  # "mock:<script.json>" or "" for http
    provider_url: str = ""
    api_key: str = ""
    gatekeeper_model: str = ""
    analyst_model: str = ""
    listen_addr: str = "127.0.0.1:8080"
    api_token: str = ""
    upload_limit_mb: int = 50

    def resolved_workdir(self) -> Path:
        if self.workdir:
            return Path(self.workdir)
        base = Path(self.db_path).resolve().parent if self.db_path != ":memory:" \
            else Path.cwd()
        return base / "cmdb_work"

    def serialized_dir(self) -> Path:
        return self.resolved_workdir() / "serialized"

    def uploads_dir(self) -> Path:
        return self.resolved_workdir() / "uploads"

    def provider_env(self) -> dict[str, str]:
        env: dict[str, str] = {}
        if self.provider:
            env["CM_PROVIDER"] = self.provider
        if self.provider_url:
            env["CM_PROVIDER_URL"] = self.provider_url
        if self.api_key:
            env["CM_API_KEY"] = self.api_key
        if self.gatekeeper_model:
            env["CM_GATEKEEPER_MODEL"] = self.gatekeeper_model
        if self.analyst_model:
            env["CM_ANALYST_MODEL"] = self.analyst_model
        return env


def load_config(
    config_path: str | Path | None = None,
    env: dict[str, str] | None = None,
    overrides: dict[str, Any] | None = None,
) -> PipelineConfig:
    """Merge defaults <- config file <- environment <- overrides."""
    env = dict(os.environ) if env is None else env
    merged: dict[str, Any] = {}

    if config_path:
        with open(config_path, "rb") as fh:
            data = _toml.load(fh)
        known = {f.name for f in fields(PipelineConfig)}
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r} in {config_path}")
            merged[key] = value

    for key, env_key in _ENV_KEYS.items():
        if env.get(env_key):
            merged[key] = env[env_key]

    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    for key in list(merged):
        if key in _INT_KEYS:
            merged[key] = int(merged[key])
        elif key in _FLOAT_KEYS:
            merged[key] = float(merged[key])

    return PipelineConfig(**merged)
