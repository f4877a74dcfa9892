"""Writers for run outputs: CSV tables, JSON reports, profile files and field snapshots."""

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.config.settings import settings
from app.core.field import ComplexField, SpectralGrid
from app.core.profile import SolitonProfile
from app.models.run_manifest import RunManifest


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if value is None:
        return ""
    return str(value)


def jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def config_hash(config: Mapping[str, Any]) -> str:
    """sha256 of the canonical (sorted, compact) JSON of a config."""
    canonical = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_csv(path: Path, rows: Sequence[Mapping[str, Any]], columns: Optional[List[str]] = None) -> Path:
    """Header row plus %.17g floats; missing cells are empty."""
    path = Path(path)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(key for key in row if key not in columns)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(key)) for key in columns])
    return path


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    with open(path, "w") as handle:
        json.dump(jsonable(data), handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def write_profile(directory: Path, profile: SolitonProfile, stem: str = "profile") -> Tuple[Path, Path]:
    """Two-column (x, phi) text plus {omega, y0, a_inf, mass} metadata."""
    directory = Path(directory)
    table = directory / f"{stem}.txt"
    with open(table, "w") as handle:
        handle.write("# x phi\n")
        for x, phi in zip(profile.x, profile.phi):
            handle.write(f"{format_value(x)} {format_value(phi)}\n")
    meta = write_json(directory / f"{stem}.json", profile.metadata())
    return table, meta


def write_snapshot(path: Path, u: ComplexField, t: float) -> Path:
    """CSV (x, re, im) after a '# {json}' header line."""
    path = Path(path)
    header = json.dumps({"n": u.grid.n, "L": u.grid.length, "t": float(t)}, sort_keys=True)
    with open(path, "w", newline="") as handle:
        handle.write(f"# {header}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["x", "re", "im"])
        for x, value in zip(u.grid.x, u.values):
            writer.writerow([format_value(x), format_value(value.real), format_value(value.imag)])
    return path


def read_snapshot(path: Path) -> Tuple[ComplexField, float]:
    """Inverse of write_snapshot."""
    with open(path) as handle:
        first = handle.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path} has no snapshot header")
        header = json.loads(first[2:])
        reader = csv.reader(handle)
        next(reader)
        values = np.array([complex(float(re), float(im)) for _, re, im in reader])
    grid = SpectralGrid(int(header["n"]), float(header["L"]))
    return ComplexField(grid, values), float(header["t"])


def write_manifest(directory: Path, manifest: RunManifest) -> Path:
    data = manifest.model_dump(by_alias=False)
    return write_json(Path(directory) / "manifest.json", data)


def prepare_output_dir(directory: Optional[str], command: str) -> Path:
    path = Path(directory) if directory else Path(settings.OUTPUT_DIR) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def relative_names(paths: Iterable[Path], root: Path) -> List[str]:
    return [str(Path(p).relative_to(root)) if Path(p).is_relative_to(root) else str(p) for p in paths]
