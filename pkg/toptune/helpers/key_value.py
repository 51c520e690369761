from pathlib import Path
from typing import Dict, Iterable, Optional, Union

from toptune.errors import ConfigError

TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}


def parse_key_values(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parses `key=value` lines. Blank lines and lines starting with `#` are
    skipped; a repeated key keeps the last value.
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{number}: empty key")
        values[key] = value.strip()
    return values


def load_key_values(path: Union[str, Path], overrides: Optional[Iterable[str]] = None) -> Dict[str, str]:
    """Loads a key/value file (if given) and applies `key=value` overrides on top."""
    values: Dict[str, str] = {}
    if path:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        values.update(parse_key_values(path.read_text(encoding="utf-8"), str(path)))
    for item in overrides or []:
        values.update(parse_key_values(item, "--set"))
    return values


def dump_key_values(values: Dict[str, object]) -> str:
    lines = []
    for key, value in values.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def as_bool(value: str, key: str = "") -> bool:
    lowered = str(value).strip().lower()
    if lowered in TRUE_VALUES:
        return True
    if lowered in FALSE_VALUES:
        return False
    raise ConfigError(f"Expected a boolean for '{key}', got {value!r}")


def as_int(value: str, key: str = "") -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise ConfigError(f"Expected an integer for '{key}', got {value!r}") from None


def as_float(value: str, key: str = "") -> float:
    try:
        return float(str(value).strip())
    except ValueError:
        raise ConfigError(f"Expected a number for '{key}', got {value!r}") from None


def section(values: Dict[str, str], prefix: str) -> Dict[str, str]:
    """Returns the keys under `prefix.` with the prefix removed."""
    dotted = prefix + "."
    return {key[len(dotted):]: value for key, value in values.items() if key.startswith(dotted)}
