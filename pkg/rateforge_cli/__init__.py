"""Command-line surface: ``python -m rateforge_cli``."""
