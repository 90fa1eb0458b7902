"""Surface baseline removal: sphere fit and subtraction.

Raw profilometer heights ride on the nominal spherical surface of the
polished ball.  Each scan covers a small cap, so a sphere is fitted per
location and the baseline height under every pixel is subtracted,
leaving roughness-scale residuals.  A flat bypass subtracts a
least-squares plane instead, for flat-surface data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .surface_io import HeightMatrix, StageRecord


class CalibrationError(Exception):
    """Raised for degenerate geometry or invalid baseline subtraction."""


@dataclass
class SphereFit:
    center: tuple  # (Xc, Yc, zc), micrometres
    radius: float
    rms_residual: float

    def __post_init__(self):
        if self.radius <= 0:
            raise CalibrationError("fitted radius must be positive")
        if self.rms_residual < 0:
            raise CalibrationError("rms residual cannot be negative")


def fit_sphere(points):
    """Least-squares sphere through a point cloud.

    Solves the linearized system x^2+y^2+z^2 = 2x*Xc + 2y*Yc + 2z*zc +
    (r^2 - |c|^2) by normal-equation least squares; closed form, no
    iteration.  The reported residual is geometric: rms of
    |dist(point, center) - r|.

    Parameters
    ----------
    points : (n, 3) array_like
        (X, Y, z) coordinates in micrometres; n >= 4, non-coplanar.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
        raise CalibrationError("need at least 4 (X, Y, z) points")
    a = np.column_stack([2.0 * pts, np.ones(len(pts))])
    b = (pts * pts).sum(axis=1)
    sol, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if rank < 4 or sv[-1] < 1e-12 * sv[0]:
        raise CalibrationError(
            "degenerate point configuration (coplanar or collinear)")
    center = sol[:3]
    r2 = sol[3] + center @ center
    if r2 <= 0:
        raise CalibrationError("degenerate fit: non-positive squared radius")
    radius = float(np.sqrt(r2))
    dist = np.linalg.norm(pts - center, axis=1)
    rms = float(np.sqrt(np.mean((dist - radius) ** 2)))
    return SphereFit(center=tuple(center), radius=radius, rms_residual=rms)


def _sphere_baseline(matrix, fit, sign):
    xx, yy = matrix.coordinates()
    xc, yc, zc = fit.center
    radicand = fit.radius**2 - (xx - xc) ** 2 - (yy - yc) ** 2
    bad = radicand < 0
    if np.any(bad):
        w, v = np.argwhere(bad)[0]
        raise CalibrationError(
            f"pixel (row {w}, col {v}) lies outside the fitted sphere cap "
            f"(radicand {radicand[w, v]:.6g})")
    return zc + sign * np.sqrt(radicand)


def subtract_baseline(matrix, fit):
    """Remove the fitted spherical baseline from a height matrix.

    The hemisphere branch (sign of the square root) is chosen
    automatically as the one minimizing the RMS of raw - baseline, since
    scans may be referenced from either side of the sphere.
    """
    finite = matrix.finite_mask()
    best = None
    for sign in (+1.0, -1.0):
        baseline = _sphere_baseline(matrix, fit, sign)
        rms = float(np.sqrt(np.mean((matrix.z[finite] - baseline[finite]) ** 2)))
        if best is None or rms < best[0]:
            best = (rms, baseline)
    return replace(matrix, z=matrix.z - best[1])


def fit_plane(points):
    """Least-squares plane z = a + b*X + c*Y; returns (a, b, c)."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 3:
        raise CalibrationError("need at least 3 points for a plane")
    a = np.column_stack([np.ones(len(pts)), pts[:, 0], pts[:, 1]])
    sol, _, rank, _ = np.linalg.lstsq(a, pts[:, 2], rcond=None)
    if rank < 3:
        raise CalibrationError("degenerate point configuration for plane fit")
    return tuple(sol)


def subtract_plane(matrix):
    """Remove a least-squares plane; flat-surface bypass of the sphere fit."""
    a0, bx, cy = fit_plane(matrix.point_cloud())
    xx, yy = matrix.coordinates()
    return replace(matrix, z=matrix.z - (a0 + bx * xx + cy * yy))


def calibrate_location(matrix, flat=False):
    if flat:
        return subtract_plane(matrix)
    fit = fit_sphere(matrix.point_cloud())
    return subtract_baseline(matrix, fit)


def calibrate_stage(record, flat=False):
    """Per-location baseline removal for a whole stage.

    Each scan covers an independent cap, so the sphere is fitted per
    location rather than once per stage.
    """
    if not record.locations:
        raise CalibrationError("empty stage")
    calibrated = [calibrate_location(m, flat=flat) for m in record.locations]
    return StageRecord(stage_id=record.stage_id, stage_label=record.stage_label,
                       locations=calibrated, timestamp=record.timestamp)
