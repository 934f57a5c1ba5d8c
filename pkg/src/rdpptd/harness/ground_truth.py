"""Ground-truth task records: CSV ingestion and a seeded synthetic generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from rdpptd.errors import ConfigError

HEADER = ("task_id", "timestamp", "lat", "lon", "true_value")

# synthetic defaults: one reading per hour starting 2024-01-01, inside a city box
SYNTH_START = 1_704_067_200
SYNTH_STEP = 3600
SYNTH_LAT_BOX = (39.8, 40.1)
SYNTH_LON_BOX = (116.2, 116.6)


@dataclass(frozen=True)
class GroundTruthRecord:
    task_id: str
    timestamp: float  # POSIX seconds
    lat: float
    lon: float
    true_value: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon {self.lon} outside [-180, 180]")
        if not (math.isfinite(self.true_value) and math.isfinite(self.timestamp)):
            raise ValueError("timestamp and true_value must be finite")


def parse_timestamp(text: str) -> float:
    """POSIX seconds, or ISO-8601 (naive times are taken as UTC)."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def parse_records(lines: Iterable[str], source: str = "<input>") -> list[GroundTruthRecord]:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise ConfigError(f"{source}: empty ground-truth file")
    if tuple(h.strip() for h in header) != HEADER:
        raise ConfigError(f"{source}: line 1: header must be {','.join(HEADER)}")
    out = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise ConfigError(f"{source}: line {line}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            out.append(
                GroundTruthRecord(
                    row[0].strip(),
                    parse_timestamp(row[1]),
                    float(row[2]),
                    float(row[3]),
                    float(row[4]),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{source}: line {line}: {exc}") from None
    if not out:
        raise ConfigError(f"{source}: no records")
    return out


def load_ground_truth(path: str | Path) -> list[GroundTruthRecord]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return parse_records(fh, str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read ground truth {path}: {exc}") from None


def synthetic_ground_truth(
    count: int,
    value_range: tuple[float, float],
    rng: np.random.Generator,
    lat_box: tuple[float, float] = SYNTH_LAT_BOX,
    lon_box: tuple[float, float] = SYNTH_LON_BOX,
) -> list[GroundTruthRecord]:
    """Hourly records with true values drawn uniformly from ``value_range``."""
    if count < 1:
        raise ConfigError("synthetic ground truth needs count >= 1")
    lo, hi = value_range
    if lo > hi:
        raise ConfigError("value_range lower bound exceeds upper bound")
    values = rng.uniform(lo, hi, count)
    lats = rng.uniform(*lat_box, count)
    lons = rng.uniform(*lon_box, count)
    return [
        GroundTruthRecord(
            f"t{i:06d}",
            float(SYNTH_START + i * SYNTH_STEP),
            float(lats[i]),
            float(lons[i]),
            float(values[i]),
        )
        for i in range(count)
    ]
