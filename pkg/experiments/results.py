"""
CSV result tables.

A table file starts with `# key: value` metadata lines (experiment, config
hash, config echo, seed, batch size, library versions), followed by a header
row and the data rows. Floats are written with repr so they parse back
exactly; nothing time-dependent is written, so identical runs produce
identical files.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import scipy

from models.schemas import ExperimentConfig
from experiments.config_file import flatten_config
from utils.errors import DomainError

PACKAGE_VERSION = "1.0.0"

Cell = Union[int, float, str]


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class ResultTable:
    """Rectangular table of results plus ordered metadata."""

    columns: List[str]
    rows: List[List[Cell]] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    def add_row(self, *values: Cell) -> None:
        if len(values) != len(self.columns):
            raise DomainError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> List[Cell]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        for key, value in self.metadata.items():
            buffer.write(f"# {key}: {value}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format(value) for value in row])
        return buffer.getvalue()

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path


def config_digest(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def run_metadata(config: ExperimentConfig, batch_size: int) -> Dict[str, str]:
    """Metadata block shared by every table of a run."""
    metadata = {
        "experiment": config.experiment.value,
        "config_sha256": config_digest(config),
        "seed": "none" if config.trajectory.seed is None else str(config.trajectory.seed),
        "batch_size": str(batch_size),
        "version": PACKAGE_VERSION,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    for key, value in flatten_config(config):
        metadata[f"config.{key}"] = value
    return metadata


def read_table(path: Union[str, Path]) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Metadata, header and raw string rows of a table file."""
    metadata: Dict[str, str] = {}
    body: List[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            metadata[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise DomainError(f"{path}: no header row")
    return metadata, rows[0], rows[1:]


def float_rows(rows: Sequence[Sequence[str]]) -> List[List[float]]:
    return [[float(value) for value in row] for row in rows]
