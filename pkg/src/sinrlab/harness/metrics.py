"""Metrics rows and CSV emission."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields
from pathlib import Path

COLUMNS = ("scenario_id", "protocol", "n", "N", "rounds_used", "round_budget", "messages_sent",
           "max_payload_bits", "properties_passed", "wall_time", "config_hash")
# wall_time is the only column that legitimately changes between identical runs.
NONDETERMINISTIC = ("wall_time",)


@dataclass(frozen=True)
class MetricsRow:
    scenario_id: str
    protocol: str
    n: int
    N: int
    rounds_used: int
    round_budget: int
    messages_sent: int
    max_payload_bits: int
    properties_passed: int
    wall_time: float
    config_hash: str

    def deterministic(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS if c not in NONDETERMINISTIC)


assert tuple(f.name for f in fields(MetricsRow)) == COLUMNS


def to_csv(rows, include_header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if include_header:
        w.writerow(COLUMNS)
    for row in rows:
        d = asdict(row)
        d["wall_time"] = f"{row.wall_time:.6f}"
        w.writerow([d[c] for c in COLUMNS])
    return buf.getvalue()


def append_csv(path, rows) -> Path:
    """Append rows, writing the header only when the file is new."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a") as fh:
        fh.write(to_csv(rows, include_header=new))
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))
