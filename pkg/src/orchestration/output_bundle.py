"""
CSV tables and the JSON manifest of one experiment run.
"""

import csv
import math
import platform
from enum import Enum
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import orjson
from loguru import logger

VERSIONED_PACKAGES = ("numpy", "scipy", "joblib", "pydantic", "orjson")


def format_cell(value: Any) -> str:
    """Text of one CSV cell; floats use 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def package_versions() -> Dict[str, str]:
    """Interpreter and numerical stack versions."""
    from src import __version__

    versions = {"python": platform.python_version(), "honest-forest-lab": __version__}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class OutputBundle:
    """
    Writes the files of one run into a directory.

    Features:
    - RFC 4180 CSV, UTF-8, LF line endings, header row always present
    - Byte-stable numbers for identical inputs
    - Manifest with config echo, seed, versions and stage wall times
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        """
        Write one table.

        Args:
            name: File name inside the bundle directory
            header: Column names
            rows: Table rows

        Returns:
            Path of the written file
        """
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(value) for value in row])

        self.written.append(path)
        logger.info(f"Wrote {path} ({len(rows)} rows)")
        return path

    def write_json(self, name: str, document: Any) -> Path:
        """Write one JSON document."""
        path = self.out_dir / name
        path.write_bytes(orjson.dumps(
            document,
            option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY,
        ))
        self.written.append(path)
        logger.info(f"Wrote {path}")
        return path

    def write_manifest(
        self,
        config: Dict[str, Any],
        seed: int,
        wall_times: Dict[str, float],
        summaries: Dict[str, Any],
        errors: Optional[Dict[str, str]] = None,
        stages: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """Write manifest.json listing every other file of the bundle."""
        document = {
            "config": config,
            "seed": seed,
            "versions": package_versions(),
            "wall_times": wall_times,
            "stages": stages or {},
            "outputs": [path.name for path in self.written],
            "summaries": summaries,
            "errors": errors or {},
            "status": "failed" if errors else "ok",
        }
        return self.write_json("manifest.json", document)
