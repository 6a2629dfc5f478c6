"""User interface package for PathEdit."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from .display import (
    get_pass_color,
    display_error,
    display_metric_report,
    display_run_table,
    display_suite_reports,
    display_written
)

__all__ = [
    'get_pass_color',
    'display_error',
    'display_metric_report',
    'display_run_table',
    'display_suite_reports',
    'display_written'
]
