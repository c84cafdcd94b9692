"""Precompute per-token transformer embeddings for news titles into NEMB stores."""

from .exporter import ExportError, ExportManifest, export, read_news_titles, write_store

__all__ = ["ExportError", "ExportManifest", "export", "read_news_titles", "write_store"]
