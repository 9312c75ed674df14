from .app import create_app
from .runtime import ServiceRuntime

__all__ = ["create_app", "ServiceRuntime"]
