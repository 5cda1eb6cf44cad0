from .base import ModelAdapters, ServiceStartupError

__all__ = ["ModelAdapters", "ServiceStartupError"]
