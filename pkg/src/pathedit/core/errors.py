"""Exception hierarchy for PathEdit.

Every exception carries the process exit code the command-line harness uses
when it reaches the top level uncaught.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.


class PathEditError(Exception):
    """Base class for all PathEdit errors."""

    exit_code = 1


class ConfigError(PathEditError, ValueError):
    """Invalid configuration, unknown distribution or malformed input."""

    exit_code = 2


class DomainError(ConfigError):
    """A time or parameter outside its admissible range."""


class ShapeError(ConfigError):
    """Latents or parameters whose dimensions do not match."""


class LayoutError(ShapeError):
    """A grid-only operation was given a vector-layout latent."""


class NumericError(PathEditError, ArithmeticError):
    """Non-finite values or a broken numerical invariant."""

    exit_code = 3


class DegenerateTimestepError(NumericError):
    """Evaluation at a timestep where the schedule is clamped."""


class UnreliableEstimateError(NumericError):
    """A Monte-Carlo estimate whose effective sample size is too small."""


class VerificationError(PathEditError):
    """A verification suite did not pass."""

    exit_code = 4


class StoreError(PathEditError, OSError):
    """Reading or writing run artifacts failed."""

    exit_code = 5
