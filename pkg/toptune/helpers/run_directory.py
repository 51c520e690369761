from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import yaml
from slugify import slugify as _slugify

from toptune.config.base import MANIFEST_FILE
from toptune.config.package import PACKAGE_NAME, PACKAGE_VERSION
from toptune.errors import ConfigError
from toptune.helpers.logs import Log


def slugify(name: str) -> str:
    slug = _slugify(name, lowercase=False, regex_pattern=r"[^A-Za-z0-9_.-]+")
    if not slug:
        raise ConfigError(f"'{name}' is not usable as a run name")
    return slug


def create_run_directory(root: Union[str, Path], name: str, command: str,
                         config: Optional[Dict[str, object]] = None,
                         inputs: Optional[Iterable[Union[str, Path]]] = None) -> Path:
    """
    Creates `root/name` and writes its manifest. An existing directory is
    reused and its manifest replaced.
    """
    run_dir = Path(root) / slugify(name)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": PACKAGE_NAME,
        "version": PACKAGE_VERSION,
        "command": command,
        "config": dict(sorted((config or {}).items())),
        "inputs": [str(path) for path in inputs or []],
        "outputs": [],
    }
    write_manifest(run_dir, manifest)
    Log.created(str(run_dir))
    return run_dir


def read_manifest(run_dir: Union[str, Path]) -> Dict[str, object]:
    path = Path(run_dir) / MANIFEST_FILE
    if not path.is_file():
        raise ConfigError(f"No manifest in {run_dir}")
    return yaml.safe_load(path.read_text(encoding="utf-8")) or {}


def write_manifest(run_dir: Union[str, Path], manifest: Dict[str, object]) -> Path:
    path = Path(run_dir) / MANIFEST_FILE
    path.write_text(yaml.safe_dump(manifest, sort_keys=False, default_flow_style=False), encoding="utf-8")
    return path


def record_output(run_dir: Union[str, Path], output: Union[str, Path]) -> None:
    """Adds `output` (relative to the run directory when inside it) to the manifest."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    output = Path(output)
    try:
        entry = str(output.relative_to(run_dir))
    except ValueError:
        entry = str(output)
    outputs = manifest.setdefault("outputs", [])
    if entry not in outputs:
        outputs.append(entry)
    write_manifest(run_dir, manifest)
