"""Atomic text/CSV/JSON writers and the file-backed trajectory sink."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

from anideg.diagnostics import CSV_COLUMNS, DiagnosticsRecord
from anideg.errors import MissingArtifact
from anideg.grid import write_snapshot
from anideg.stepper import Trajectory

DIAGNOSTICS_FILE = "diagnostics.csv"
CHECKS_FILE = "checks.csv"
MANIFEST_FILE = "manifest.json"
SNAPSHOT_DIR = "snapshots"


def write_text_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv_atomic(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    write_text_atomic(path, buf.getvalue())


def write_json_atomic(path, obj):
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_diagnostics(path, records):
    write_csv_atomic(path, CSV_COLUMNS, [r.csv_row() for r in records])


def read_diagnostics(path):
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"{path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise MissingArtifact(f"{path} is not a diagnostics file")
    return [DiagnosticsRecord.from_csv_row(r) for r in rows[1:]]


def snapshot_name(step):
    return f"snap_{step:08d}.adch"


class FileTrajectory(Trajectory):
    """Keeps everything in memory and also writes each snapshot to disk."""

    def __init__(self, directory, grid=None, write_snapshots=True):
        super().__init__(grid)
        self.directory = Path(directory)
        self.write_snapshots = write_snapshots
        self.snapshot_files = []
        if write_snapshots:
            (self.directory / SNAPSHOT_DIR).mkdir(parents=True, exist_ok=True)

    def snapshot(self, state):
        super().snapshot(state)
        if self.write_snapshots:
            rel = Path(SNAPSHOT_DIR) / snapshot_name(state.step_count)
            write_snapshot(self.directory / rel, state.grid, state.t, state.phi)
            self.snapshot_files.append(str(rel))
