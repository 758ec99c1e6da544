"""CLI package exports."""

__all__: list[str] = []
