import subprocess
from functools import lru_cache
from importlib import metadata
from pathlib import Path

__version__ = "0.1.0"


@lru_cache(maxsize=1)
def version_string():
    """Package version plus the short git commit when run from a checkout."""
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = __version__
    try:
        sha = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        return base
    return f"{base}+g{sha}" if sha else base
