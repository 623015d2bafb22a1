"""Embedding microservice speaking the /embed wire contract."""

from .app import create_app
from .config import ServiceConfig, from_env

__all__ = ["create_app", "ServiceConfig", "from_env"]
__version__ = "0.1.0"
