"""Attribute-based authorisation for IoT resources on an embedded, gas-metered ledger."""

from . import ama, amf, pma  # noqa: F401  (registers contract kinds)
from .system import System

__all__ = ["System"]
