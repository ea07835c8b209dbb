"""Retrieval-augmented CVSS v3 severity assessment."""

from ._sva import (
    SvaError,
    assess,
    build_store,
    combined_similarity,
    cosine_similarity,
    estimate_tokens,
    evaluate,
    fallback_embed,
    ingest_dataset,
    parse_severity,
    severity_from_score,
    stratified_split,
    sweep,
)

__all__ = [
    "SvaError",
    "assess",
    "build_store",
    "combined_similarity",
    "cosine_similarity",
    "estimate_tokens",
    "evaluate",
    "fallback_embed",
    "ingest_dataset",
    "parse_severity",
    "severity_from_score",
    "stratified_split",
    "sweep",
]
