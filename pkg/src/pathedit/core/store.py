"""Reading and writing run artifacts: traces, run results and timing sidecars.

Results and traces contain no timestamps so reruns with the same config are
byte-identical; wall-clock times go to a separate ``.timing.json`` file.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..utils.paths import ensure_output_dir
from .editor import Trajectory
from .errors import PathEditError, StoreError
from .metrics import MetricReport

logger = logging.getLogger(__name__)

AGGREGATED_FIELDS = ("mse", "psnr_db", "ssim", "path_length", "target_nll", "reconstruction_mse")


@dataclass(frozen=True)
class InstanceResult:
    """Metrics of one benchmark instance under one method."""

    instance_id: int
    seed: int
    report: MetricReport
    reconstruction_mse: Optional[float] = None

    def value(self, name: str) -> Optional[float]:
        if name == "reconstruction_mse":
            return self.reconstruction_mse
        value = getattr(self.report, name)
        if value is None or math.isinf(value):
            return None
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "seed": self.seed,
            "metrics": self.report.to_dict(),
            "reconstruction_mse": self.reconstruction_mse,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "InstanceResult":
        return cls(
            instance_id=int(data["instance_id"]),
            seed=int(data["seed"]),
            report=MetricReport.from_dict(data["metrics"]),
            reconstruction_mse=data.get("reconstruction_mse"),
        )


def aggregate(instances: Sequence[InstanceResult]) -> Dict[str, Dict[str, Any]]:
    """Mean and standard deviation of each metric over the instances that have it.

    Infinite PSNR values are left out of the PSNR statistics.
    """
    stats: Dict[str, Dict[str, Any]] = {}
    for name in AGGREGATED_FIELDS:
        values = [v for v in (r.value(name) for r in instances) if v is not None]
        if values:
            array = np.asarray(values, dtype=float)
            stats[name] = {"mean": float(np.mean(array)), "std": float(np.std(array)), "count": len(values)}
        else:
            stats[name] = {"mean": None, "std": None, "count": 0}
    return stats


@dataclass
class RunResult:
    """Per-instance metrics of one method plus their aggregates.

    Instances are kept sorted by id so the file does not depend on the order
    in which workers finished.
    """

    name: str
    config: Dict[str, Any]
    instances: List[InstanceResult]
    timings: Dict[int, float] = field(default_factory=dict)

    FORMAT_VERSION = 1

    def __post_init__(self) -> None:
        self.instances = sorted(self.instances, key=lambda r: r.instance_id)

    @property
    def aggregates(self) -> Dict[str, Dict[str, Any]]:
        return aggregate(self.instances)

    def mean(self, name: str) -> Optional[float]:
        return self.aggregates[name]["mean"]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.FORMAT_VERSION,
            "name": self.name,
            "config": self.config,
            "instances": [r.to_dict() for r in self.instances],
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunResult":
        """Rebuild a result and check its stored aggregates.

        Raises:
            StoreError: On a version mismatch, malformed data or aggregates
                that do not match the instances
        """
        if data.get("version") != cls.FORMAT_VERSION:
            raise StoreError(f"Incompatible result format version: {data.get('version')}")
        try:
            result = cls(
                name=data["name"],
                config=data["config"],
                instances=[InstanceResult.from_dict(r) for r in data["instances"]],
            )
        except (KeyError, TypeError, ValueError, ArithmeticError) as e:
            raise StoreError(f"Malformed result file: {e}") from e
        if result.aggregates != data.get("aggregates"):
            raise StoreError(f"Stored aggregates of '{result.name}' do not match its instances")
        return result


class RunStore:
    """Writes and reads the artifacts of runs under one output directory."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = Path(out_dir)

    def _ensure_dir(self, path: Path) -> None:
        ensure_output_dir(path.parent)

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        self._ensure_dir(path)
        try:
            with path.open("w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            raise StoreError(f"Cannot write {path}: {e}") from e
        logger.debug("Wrote %s", path)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.path(name)
        self._ensure_dir(path)
        try:
            path.write_bytes(data)
        except OSError as e:
            raise StoreError(f"Cannot write {path}: {e}") from e
        logger.debug("Wrote %s", path)
        return path

    def _read_text(self, path: Path) -> str:
        try:
            with Path(path).open("r", encoding="utf-8") as f:
                return f.read()
        except OSError as e:
            raise StoreError(f"Cannot read {path}: {e}") from e

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_trace(self, name: str, trajectory: Trajectory) -> Path:
        """Write a trajectory as JSON lines: a header, then one line per step."""
        lines = [json.dumps(record, sort_keys=True) for record in trajectory.to_records()]
        return self.write_text(name, "\n".join(lines) + "\n")

    def read_trace(self, path: Path) -> Trajectory:
        """Read a trace back and check its step invariants.

        Raises:
            StoreError: If the file cannot be read or parsed
        """
        try:
            records = [json.loads(line) for line in self._read_text(path).splitlines() if line.strip()]
        except json.JSONDecodeError as e:
            raise StoreError(f"Trace {path} is not valid JSON lines: {e}") from e
        return Trajectory.from_records(records)

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        return self.write_text(name, json.dumps(data, sort_keys=True, indent=2) + "\n")

    def read_json(self, path: Path) -> Dict[str, Any]:
        try:
            return json.loads(self._read_text(path))
        except json.JSONDecodeError as e:
            raise StoreError(f"{path} is not valid JSON: {e}") from e

    def write_result(self, name: str, result: RunResult) -> Path:
        """Write ``<name>.json`` and its ``<name>.timing.json`` sidecar."""
        path = self.write_json(f"{name}.json", result.to_dict())
        if result.timings:
            timings = {str(k): v for k, v in sorted(result.timings.items())}
            self.write_json(f"{name}.timing.json", {"name": result.name, "seconds": timings})
        return path

    def read_result(self, path: Path) -> RunResult:
        try:
            return RunResult.from_dict(self.read_json(path))
        except PathEditError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise StoreError(f"Malformed result file {path}: {e}") from e
