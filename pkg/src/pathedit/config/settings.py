"""Default values for the PathEdit harness."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from typing import Dict, List, Tuple

# Noise schedule
SCHEDULE_KINDS = ("cosine", "scaled_linear")
DEFAULT_SCHEDULE_KIND = "cosine"
DEFAULT_HORIZON = 1000
DEFAULT_ALPHA_FLOOR = 1e-6
SCALED_LINEAR_BETA_RANGE: Tuple[float, float] = (1e-4, 2e-2)
FD_DERIVATIVE_FRACTION = 1e-4  # step = T * fraction

# Timestep grid
GRID_SPACINGS = ("uniform_t", "uniform_sqrt_alpha")
DEFAULT_N_STEPS = 12
MIN_GRID_STEPS = 2
MAX_GRID_STEPS = 64
DEFAULT_T_MAX_FRACTION = 0.98
DEFAULT_SPACING = "uniform_t"

# Path regularization (12 steps, first 6 regularized, full strength)
REG_FORMS = ("full_eq10", "simplified", "bypass")
DEFAULT_REG_FORM = "simplified"
DEFAULT_STRENGTH = 1.0
DEFAULT_ACTIVE_STEPS = 6
DEFAULT_TAYLOR_DELTA = 0.5

# Guidance
DEFAULT_GUIDANCE_SCALE = 1.5

# Benchmark
DEFAULT_N_INSTANCES = 200
DEFAULT_SRC_DISTRIBUTION = "source"
DEFAULT_TAR_DISTRIBUTION = "target"
DEFAULT_DYNAMIC_RANGE = 1.0
DEFAULT_SWEEP_ACTIVE_STEPS: List[int] = [0, 2, 4, 6, 8]
DEFAULT_SWEEP_STRENGTHS: List[float] = [1.0]

# Verification
DEFAULT_GRADCHECK_STATES = 100
DEFAULT_GRADCHECK_TOLERANCE = 1e-5
DEFAULT_FD_STEP = 1e-6
DEFAULT_MC_TRIPLES = 50
DEFAULT_MC_SAMPLES = 1_000_000
MIN_MC_SAMPLES = 1_000
MIN_EFFECTIVE_SAMPLES = 10.0
MC_COVERAGE_SIGMAS = 3.0
MC_COVERAGE_REQUIRED = 0.96  # 48 of 50
ADAPTER_TOLERANCE = 1e-12

# SSIM
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Exit codes used by the command-line harness
EXIT_CODES: Dict[str, int] = {
    "ok": 0,
    "config": 2,
    "numeric": 3,
    "verification": 4,
    "io": 5,
}

# Colour thresholds for pass ratios in console tables
PASS_COLOR_THRESHOLDS = [
    (1.0, "GREEN"),
    (0.96, "LIGHTGREEN_EX"),
    (0.9, "YELLOW"),
    (0.0, "RED")
]
