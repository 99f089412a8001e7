"""Service configuration: flat key=value file, overridable via environment.

Precedence: built-in defaults < config file < PS_* environment variables.
Keys: host, port, data_dir, recompute_interval, console_dir.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidArgument

ENV_PREFIX = "PS_"


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8800
    data_dir: str = "./data"
    recompute_interval: float = 30.0
    console_dir: str = ""  # empty disables the static console mount


def _parse_kv(text: str, origin: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidArgument(f"{origin}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip().lower()] = value.strip()
    return out


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> GatewayConfig:
    """Resolve effective configuration from a file (optional) and environment."""
    cfg = GatewayConfig()
    values: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InvalidArgument(f"config file {p} does not exist", field="config")
        values.update(_parse_kv(p.read_text(encoding="utf-8"), str(p)))
    env = os.environ if env is None else env
    known = ("host", "port", "data_dir", "recompute_interval", "console_dir")
    for field_name in known:
        env_key = ENV_PREFIX + field_name.upper()
        if env_key in env:
            values[field_name] = env[env_key]
    unknown = set(values) - set(known)
    if unknown:
        raise InvalidArgument(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "host" in values:
        cfg.host = values["host"]
    if "data_dir" in values:
        cfg.data_dir = values["data_dir"]
    if "console_dir" in values:
        cfg.console_dir = values["console_dir"]
    try:
        if "port" in values:
            cfg.port = int(values["port"])
        if "recompute_interval" in values:
            cfg.recompute_interval = float(values["recompute_interval"])
    except ValueError as exc:
        raise InvalidArgument(f"bad config value: {exc}") from None
    if not (0 < cfg.port < 65536):
        raise InvalidArgument(f"port {cfg.port} out of range", field="port")
    if cfg.recompute_interval <= 0:
        raise InvalidArgument("recompute_interval must be positive", field="recompute_interval")
    return cfg
