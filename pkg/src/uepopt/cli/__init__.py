"""Command-line interface for uepopt."""
