"""Presentation layer: HTTP API, operator CLI, and service configuration."""

from .config import GatewayConfig, load_config
from .http import create_app

__all__ = ["GatewayConfig", "load_config", "create_app"]
