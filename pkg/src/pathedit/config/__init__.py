"""Configuration package for PathEdit."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from .settings import (
    DEFAULT_HORIZON,
    DEFAULT_N_STEPS,
    DEFAULT_REG_FORM,
    EXIT_CODES,
    PASS_COLOR_THRESHOLDS
)

__all__ = [
    'DEFAULT_HORIZON',
    'DEFAULT_N_STEPS',
    'DEFAULT_REG_FORM',
    'EXIT_CODES',
    'PASS_COLOR_THRESHOLDS'
]
