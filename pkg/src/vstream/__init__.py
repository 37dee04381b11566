"""Partially persistent, write-optimized versioned index with a block-transfer cost model."""

from .engine import Engine, EngineConfig, InvariantViolation, QueryMode
from .iomodel import BlockDevice, IoReport
from .oracle import OracleLog
from .query import QueryResult, point_query, range_query
from .varray import TOMBSTONE, Element, VersionedArray, build, merge

__all__ = [
    "BlockDevice",
    "Element",
    "Engine",
    "EngineConfig",
    "InvariantViolation",
    "IoReport",
    "OracleLog",
    "QueryMode",
    "QueryResult",
    "TOMBSTONE",
    "VersionedArray",
    "build",
    "merge",
    "point_query",
    "range_query",
]
