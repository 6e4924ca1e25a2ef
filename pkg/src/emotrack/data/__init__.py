from pathlib import Path

_HERE = Path(__file__).resolve().parent


def data_path(name: str) -> Path:
    """Absolute path of a bundled fixture file."""
    path = _HERE / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return path
