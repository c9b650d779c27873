"""Command-line harness, file formats and composite studies."""

from .cli import main
from .io import read_field, write_field

__all__ = ["main", "read_field", "write_field"]
