"""Result rows, long-format CSV output and the run manifest."""
import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("experiment", "replica", "seed", "M", "N", "stat_name", "stat_value", "flags")

# Aggregate rows use this replica index; their seed column holds the master seed.
SUMMARY_REPLICA = -1


@dataclass
class ResultRecord:
    experiment: str
    replica: int
    seed: int
    M: int
    N: int
    stats: dict = field(default_factory=dict)
    flags: int = 0

    def __post_init__(self):
        if self.flags < 0:
            raise ValueError("flags must be non-negative")
        for name, value in self.stats.items():
            if not math.isfinite(value):
                raise ValueError(f"statistic {name!r} is not finite: {value}")


def format_value(value):
    if isinstance(value, (bool, int)) and not isinstance(value, float):
        return str(int(value))
    return format(float(value), ".17g")


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def render_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in records:
        for name, value in rec.stats.items():
            writer.writerow((rec.experiment, rec.replica, rec.seed, rec.M, rec.N,
                             name, format_value(value), rec.flags))
    return buf.getvalue()


def write_results(records, directory, experiments=()):
    """Write one CSV per experiment id, rows ordered by (M, N, replica).

    ``experiments`` names ids that get a (possibly header-only) file even
    when no record carries them. Returns the written paths in name order.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    groups = {name: [] for name in experiments}
    for rec in records:
        groups.setdefault(rec.experiment, []).append(rec)
    paths = []
    for name in sorted(groups):
        rows = sorted(groups[name], key=lambda r: (r.M, r.N, r.replica))
        paths.append(_atomic_write(directory / f"{name}.csv", render_csv(rows)))
    return paths


def read_results(path):
    """Parse a results CSV back into row dicts with typed values."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected header in {path}: {reader.fieldnames}")
        rows = []
        for row in reader:
            for key in ("replica", "seed", "M", "N", "flags"):
                row[key] = int(row[key])
            row["stat_value"] = float(row["stat_value"])
            rows.append(row)
    return rows


def write_manifest(manifest, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    return _atomic_write(directory / "manifest.json", text)


def read_manifest(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
