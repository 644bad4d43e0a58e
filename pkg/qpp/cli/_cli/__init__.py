"""Subcommands package for qpp CLI."""
