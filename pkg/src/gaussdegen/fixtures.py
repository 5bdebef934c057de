"""Access to the example files shipped with the package."""
from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_path(name: str) -> Path:
    path = Path(str(resources.files("gaussdegen") / "data" / name))
    if not path.exists():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return path


def read_text(name: str) -> str:
    return data_path(name).read_text(encoding="utf-8")


def list_data() -> list[str]:
    return sorted(p.name for p in Path(str(resources.files("gaussdegen") / "data")).iterdir())
