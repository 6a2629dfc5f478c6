"""Path utilities for PathEdit."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from pathlib import Path

from ..core.errors import StoreError


def get_data_dir() -> Path:
    """Get the directory holding the packaged data files."""
    return Path(__file__).parent.parent / 'data'


def get_data_file_path(name: str) -> Path:
    """Get the path to a packaged data file such as ``distributions.json``."""
    return get_data_dir() / name


def ensure_output_dir(path: Path) -> Path:
    """Create an output directory if needed.

    Raises:
        StoreError: If the directory cannot be created
    """
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StoreError(f"Cannot create output directory {path}: {e}") from e
    return path
