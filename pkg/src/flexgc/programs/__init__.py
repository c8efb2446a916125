"""Bundled example programs."""

from importlib import resources
from pathlib import Path


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled ``<name>.prog``."""
    return Path(str(resources.files(__package__).joinpath(f"{name}.prog")))
