"""Content-addressed storage with M, GM and M++ naming, plus collision calculators."""

from castore.errors import CasError, ContentTooLarge, IntegrityError, ObjectNotFound, SchemeMismatch
from castore.naming import (
    AccessNodeContext,
    ContentAddress,
    GmComponents,
    NamingScheme,
    compute_gm,
    compute_m,
    compute_mpp,
    parse_gm,
)
from castore.store import ClusterConfig, ObjectKind, Store

__all__ = [
    "AccessNodeContext",
    "CasError",
    "ClusterConfig",
    "ContentAddress",
    "ContentTooLarge",
    "GmComponents",
    "IntegrityError",
    "NamingScheme",
    "ObjectKind",
    "ObjectNotFound",
    "SchemeMismatch",
    "Store",
    "compute_gm",
    "compute_m",
    "compute_mpp",
    "parse_gm",
]

__version__ = "0.1.0"
