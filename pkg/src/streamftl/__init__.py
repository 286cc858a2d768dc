"""Deterministic flash-storage simulator: a page-mapping FTL with the
conventional arrival-order write path and an optional per-object
pre-allocation command, plus workload generators and WAF metrics."""

from .flash_media import Geometry
from .ftl import FLASHALLOC, VANILLA, Device
from .metrics import CostModel, Counters

__all__ = ["Geometry", "Device", "VANILLA", "FLASHALLOC", "CostModel", "Counters"]

__version__ = "0.1.0"
