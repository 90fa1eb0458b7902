"""Ingestion of profilometer height matrices and report persistence.

One plain-text matrix file per sampling location (whitespace- or
comma-delimited rows, heights in micrometres), optionally accompanied by
a ``manifest.json`` naming the files, the stage label, and the pixel
pitch.  Stages with fewer than 2 locations are rejected because the
tests need replicate curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# the source instrument's between-pixel distances, used when a manifest
# does not override them
DEFAULT_DX_UM = 0.359
DEFAULT_DY_UM = 0.369

# a scan losing more than this fraction of pixels is treated as corrupt
MAX_DROPPED_FRACTION = 0.01

MATRIX_SUFFIXES = (".csv", ".txt", ".dat")


class SurfaceDataError(Exception):
    """Raised for unreadable, malformed, or insufficient stage data."""


@dataclass
class HeightMatrix:
    """2-D grid of pixel heights with physical pixel pitch.

    ``z`` keeps the rectangular shape; pixels dropped by cleaning are
    NaN and ``dropped_count`` records how many.
    """

    z: np.ndarray  # (rows, cols), micrometres
    dx: float = DEFAULT_DX_UM
    dy: float = DEFAULT_DY_UM
    location_id: str = ""
    stage_id: str = ""
    dropped_count: int = 0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
            raise SurfaceDataError("height matrix must be a non-empty 2-D grid")
        if self.dx <= 0 or self.dy <= 0:
            raise SurfaceDataError("pixel pitch must be positive")
        self.z = z

    @property
    def rows(self):
        return self.z.shape[0]

    @property
    def cols(self):
        return self.z.shape[1]

    def finite_mask(self):
        return np.isfinite(self.z)

    def finite_heights(self):
        return self.z[self.finite_mask()]

    def coordinates(self):
        """Physical (X, Y) coordinate grids in micrometres."""
        x = np.arange(self.cols) * self.dx
        y = np.arange(self.rows) * self.dy
        return np.meshgrid(x, y)

    def point_cloud(self):
        """Finite pixels as an (n, 3) array of (X, Y, z)."""
        xx, yy = self.coordinates()
        mask = self.finite_mask()
        return np.column_stack([xx[mask], yy[mask], self.z[mask]])


@dataclass
class StageRecord:
    stage_id: str
    stage_label: str
    locations: list = field(default_factory=list)
    timestamp: str | None = None

    def __post_init__(self):
        if len(self.locations) < 2:
            raise SurfaceDataError(
                f"insufficient locations: stage {self.stage_label!r} has "
                f"{len(self.locations)}, need at least 2"
            )
        for m in self.locations:
            m.stage_id = self.stage_id


def _read_matrix_file(path):
    try:
        z = np.genfromtxt(path, delimiter=None if _is_whitespace(path) else ",")
    except (ValueError, OSError) as exc:
        raise SurfaceDataError(f"malformed matrix file {path}: {exc}") from exc
    if z.ndim == 1:
        z = z.reshape(1, -1)
    if z.ndim != 2 or z.size == 0:
        raise SurfaceDataError(f"malformed matrix file {path}: not rectangular")
    return z


def _is_whitespace(path):
    with open(path) as fh:
        for line in fh:
            if line.strip():
                return "," not in line
    return True


def _clean(z, path):
    finite = np.isfinite(z)
    dropped = int(z.size - np.count_nonzero(finite))
    if dropped > MAX_DROPPED_FRACTION * z.size:
        raise SurfaceDataError(
            f"{path}: {dropped} of {z.size} pixels are non-finite "
            f"(> {MAX_DROPPED_FRACTION:.0%}); scan looks corrupt"
        )
    out = z.copy()
    out[~finite] = np.nan
    return out, dropped


def load_stage(path, stage_label=None):
    """Load one stage of location matrices from a directory or manifest.

    Parameters
    ----------
    path : str or Path
        A directory of matrix files, or a JSON manifest with keys
        ``stage_label``, ``files``, and optionally ``dx_um`` / ``dy_um``.
    stage_label : str, optional
        Overrides the directory name / manifest label.

    Returns
    -------
    StageRecord
        Locations ordered by location_id so ingestion order never matters.
    """
    path = Path(path)
    if not path.exists():
        raise SurfaceDataError(f"no such path: {path}")

    dx, dy = DEFAULT_DX_UM, DEFAULT_DY_UM
    if path.is_dir() and (path / "manifest.json").exists():
        manifest_path = path / "manifest.json"
    elif path.is_file() and path.suffix == ".json":
        manifest_path = path
    else:
        manifest_path = None

    if manifest_path is not None:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        label = stage_label or manifest.get("stage_label") or manifest_path.parent.name
        dx = float(manifest.get("dx_um", dx))
        dy = float(manifest.get("dy_um", dy))
        base = manifest_path.parent
        files = [base / f for f in manifest.get("files", [])]
    else:
        if not path.is_dir():
            raise SurfaceDataError(f"{path} is neither a directory nor a manifest")
        label = stage_label or path.name
        files = [p for p in path.iterdir()
                 if p.is_file() and p.suffix.lower() in MATRIX_SUFFIXES]

    files = sorted(files, key=lambda p: p.stem)
    locations = []
    for f in files:
        if not f.exists():
            raise SurfaceDataError(f"manifest names a missing file: {f}")
        z, dropped = _clean(_read_matrix_file(f), f)
        locations.append(HeightMatrix(z=z, dx=dx, dy=dy, location_id=f.stem,
                                      stage_id=label, dropped_count=dropped))
    return StageRecord(stage_id=label, stage_label=label, locations=locations)


def save_report(record, path):
    """Persist a DecisionRecord as bit-stable JSON."""
    path = Path(path)
    try:
        with open(path, "w") as fh:
            json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise SurfaceDataError(f"cannot write report to {path}: {exc}") from exc


def load_report(path):
    """Read back a report written by save_report."""
    from .decision import DecisionRecord

    path = Path(path)
    if not path.exists():
        raise SurfaceDataError(f"no such report: {path}")
    with open(path) as fh:
        return DecisionRecord.from_dict(json.load(fh))
