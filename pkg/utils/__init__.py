"""Utility package: structured logging, seeded streams and artifact IO."""
