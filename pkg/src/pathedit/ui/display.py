"""Console rendering for PathEdit runs."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from colorama import Fore, Style, init

from ..config.settings import PASS_COLOR_THRESHOLDS
from ..core.metrics import MetricReport
from ..core.store import RunResult
from ..core.verify import SuiteReport

# Initialize colorama
init(autoreset=True)

TABLE_COLUMNS = ("mse", "psnr_db", "ssim", "path_length", "target_nll", "reconstruction_mse")


def get_pass_color(ratio: float) -> str:
    """
    Get the colour for a pass ratio in [0, 1].

    Args:
        ratio: Fraction of checks that passed

    Returns:
        Colorama colour code for the ratio
    """
    for threshold, color in PASS_COLOR_THRESHOLDS:
        if ratio >= threshold:
            return getattr(Fore, color)
    return Fore.RED


def _format(value: Optional[float]) -> str:
    if value is None:
        return "-"
    if math.isinf(value):
        return "inf"
    return f"{value:.4g}"


def display_error(message: str) -> None:
    print(f"{Fore.RED}Error: {message}{Style.RESET_ALL}")


def display_metric_report(report: MetricReport, title: str = "Edit metrics") -> None:
    """
    Display the metrics of a single edit.

    Args:
        report: Metrics to show
        title: Heading printed above them
    """
    print(f"\n{Fore.CYAN}=== {title} ==={Style.RESET_ALL}")
    psnr = "inf (identical)" if math.isinf(report.psnr_db) else f"{report.psnr_db:.2f} dB"
    print(f"MSE to source:    {report.mse:.6g}")
    print(f"PSNR:             {psnr}")
    if report.ssim is not None:
        print(f"SSIM:             {report.ssim:.4f}")
    print(f"Path length:      {report.path_length:.6g}")
    print(f"Target NLL:       {report.target_nll:.6g}")


def display_run_table(rows: Sequence[Tuple[str, RunResult]], title: str) -> None:
    """
    Display mean metrics of several runs side by side.

    Args:
        rows: (label, result) pairs in display order
        title: Heading printed above the table
    """
    print(f"\n{Fore.CYAN}=== {title} ==={Style.RESET_ALL}")
    header = f"{'run':<24}" + "".join(f"{c:>20}" for c in TABLE_COLUMNS)
    print(f"{Style.BRIGHT}{header}{Style.RESET_ALL}")
    for label, result in rows:
        stats = result.aggregates
        cells = "".join(f"{_format(stats[c]['mean']):>20}" for c in TABLE_COLUMNS)
        print(f"{label:<24}{cells}")


def display_suite_reports(reports: List[SuiteReport]) -> None:
    """
    Display verification outcomes, one line per suite.

    Args:
        reports: Suite results in the order they ran
    """
    print(f"\n{Fore.CYAN}=== Verification ==={Style.RESET_ALL}")
    for report in reports:
        ratio = 1.0 - report.n_failed / report.n_checked if report.n_checked else 1.0
        status = f"{Fore.GREEN}PASS" if report.passed else f"{Fore.RED}FAIL"
        print(f"{status}{Style.RESET_ALL} {report.name:<14} "
              f"{get_pass_color(ratio)}{report.summary}{Style.RESET_ALL}")
    passed = sum(r.passed for r in reports)
    print(f"\n{get_pass_color(passed / len(reports) if reports else 1.0)}"
          f"{passed}/{len(reports)} suites passed{Style.RESET_ALL}")


def display_written(paths: Dict[str, Any]) -> None:
    for label, path in paths.items():
        print(f"{Fore.WHITE}{label}: {path}{Style.RESET_ALL}")
