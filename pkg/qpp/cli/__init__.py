"""CLI package for qpp."""
