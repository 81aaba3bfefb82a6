"""Reference model-gateway server for the semcom protocol (v1)."""

from semcom_gateway.app import create_app
from semcom_gateway.config import GatewayConfig, load_config

__version__ = "0.1.0"

__all__ = ["GatewayConfig", "create_app", "load_config"]
