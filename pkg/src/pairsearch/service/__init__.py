from .app import create_app
from .state import ServiceConfig, ServiceState

__all__ = ["create_app", "ServiceConfig", "ServiceState"]
