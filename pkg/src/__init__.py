"""Reflectance Pipeline: facial texture to renderable reflectance maps"""

__version__ = "0.1.0"
