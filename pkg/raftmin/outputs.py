"""Deterministic run outputs: breakdown text, CSV tables and the manifest."""
import csv
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence, Union

from raftmin.exceptions import ConfigError
from raftmin.schemas import EnergyBreakdown, RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST = "manifest.json"


def fmt(value: Any) -> str:
    """Round-trip text for numbers; plain str for everything else."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_key_values(path: PathLike, items: Mapping[str, Any]) -> None:
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {fmt(value)}\n")


def breakdown_items(breakdown: EnergyBreakdown) -> Dict[str, Any]:
    items: Dict[str, Any] = {"total": breakdown.total}
    items.update(breakdown.terms())
    items["finite"] = breakdown.finite
    if breakdown.diagnostic:
        items["diagnostic"] = breakdown.diagnostic
    return items


def write_breakdown(path: PathLike, breakdown: EnergyBreakdown, extra: Mapping[str, Any] = None) -> None:
    items = breakdown_items(breakdown)
    items.update(extra or {})
    write_key_values(path, items)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_manifest(out_dir: PathLike, config: RunConfig) -> Path:
    """Fully resolved config with sorted keys and no timestamps."""
    path = Path(out_dir) / MANIFEST
    payload = config.model_dump(mode="json", by_alias=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def load_config_file(path: PathLike) -> Dict[str, Any]:
    """Read a TOML or JSON run configuration into a plain dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}")
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Cannot parse config {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a table of settings")
    logger.info(f"Loaded config from {path}")
    return data
