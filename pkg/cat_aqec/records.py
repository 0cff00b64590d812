"""
Run Records
===========

Output artifacts of a run: per-cycle CSV, MBQEC ensemble CSV, sweep CSV,
Husimi grids, pulse-sequence text and the JSON run summary. Every file is
written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

CYCLE_COLUMNS = ("cycle", "time_us", "fidelity", "purity", "parity")
MBQEC_COLUMNS = ("epoch", "time_us", "mean_fidelity", "stderr", "corrections")
SWEEP_COLUMNS = ("tw_us", "t_eff_us", "kappa_eff_per_us", "fit_residual")


def _num(x: float) -> str:
    return f"{float(x) + 0.0:.12g}"


def atomic_write_text(path: Path, text: str) -> None:
    """Write text to path via a temp file in the same directory and a rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(temp_path, path)
    except BaseException:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise
    logger.debug("wrote %s", path)


def _csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _num(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def write_cycle_csv(path: Path, reports: Sequence[Any]) -> None:
    """cycle,time_us,fidelity,purity,parity; decoded rows are summary-only."""
    rows = (
        (r.cycle, float(r.time_us), float(r.fidelity), float(r.purity), float(r.parity))
        for r in reports
        if r.stage != "decoded"
    )
    atomic_write_text(path, _csv(CYCLE_COLUMNS, rows))


def write_mbqec_csv(path: Path, result: Any) -> None:
    mean, stderr = result.mean_fidelity, result.stderr
    corrections = result.corrections.sum(axis=0)
    rows = (
        (i + 1, float(t), float(m), float(s), int(c))
        for i, (t, m, s, c) in enumerate(zip(result.times_us, mean, stderr, corrections))
    )
    atomic_write_text(path, _csv(MBQEC_COLUMNS, rows))


def write_sweep_csv(path: Path, rows: Sequence[tuple[float, float, float, float]]) -> None:
    atomic_write_text(path, _csv(SWEEP_COLUMNS, ((float(v) for v in row) for row in rows)))


def write_grid_csv(path: Path, header: str, values: np.ndarray) -> None:
    """Header line with the grid bounds, then one row per Im(gamma)."""
    lines = [header]
    lines.extend(",".join(_num(v) for v in row) for row in np.asarray(values))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_grid_csv(path: Path) -> tuple[dict[str, float], np.ndarray]:
    lines = path.read_text().splitlines()
    header = {}
    for item in lines[0].lstrip("# ").split(","):
        key, _, value = item.partition("=")
        header[key] = float(value)
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if line])
    return header, values


def _jsonable(value: Any) -> Any:
    """Non-finite floats become strings so the summary stays strict JSON."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class RunSummary:
    """Headline metrics of one scenario with the full resolved config."""

    scenario: str
    config: dict[str, Any]
    metrics: dict[str, Any] = field(default_factory=dict)
    converged: Optional[bool] = None
    convergence: dict[str, Any] = field(default_factory=dict)
    wall_seconds: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def publishable(self) -> bool:
        """False only when a convergence check ran and failed."""
        return self.converged is not False

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["publishable"] = self.publishable
        return _jsonable(data)


def write_summary(path: Path, summary: RunSummary) -> None:
    atomic_write_text(path, json.dumps(summary.to_dict(), indent=2) + "\n")


def load_summary(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text())
