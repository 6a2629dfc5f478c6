"""Utility functions package for PathEdit."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from .paths import (
    get_data_dir,
    get_data_file_path,
    ensure_output_dir
)

__all__ = [
    'get_data_dir',
    'get_data_file_path',
    'ensure_output_dir'
]
