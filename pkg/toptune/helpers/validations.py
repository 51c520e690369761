from pathlib import Path
from typing import Union

from toptune.helpers.logs import Log


def folder_exists(folder_path: Union[str, Path]) -> bool:
    """Return True if the folder exists; report it otherwise."""
    if Path(folder_path).is_dir():
        return True
    Log.error(f"Folder not found: {folder_path}")
    return False


def file_exists(file_path: Union[str, Path]) -> bool:
    """Return True if the file exists; report it otherwise."""
    if Path(file_path).is_file():
        return True
    Log.error(f"File not found: {file_path}")
    return False
