"""MIND-format table conversion into JSON-lines interchange files."""

from mind_ingest.ingest import (
    build_embeddings,
    build_topic_catalog,
    parse_behaviors,
    parse_news,
    read_word_vectors,
)

__all__ = [
    "build_embeddings",
    "build_topic_catalog",
    "parse_behaviors",
    "parse_news",
    "read_word_vectors",
]
