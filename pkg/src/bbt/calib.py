"""Surface normals from the point map and camera pitch relative to gravity.

Camera frame: x right, y down, z forward. For a level camera facing the
vertical box front the per-pixel angle theta = arctan2(n_z, -n_y) is -pi/2,
so camera pitch is defined as phi = -(theta_hat + pi/2): phi = 0 means level,
phi > 0 means pitched down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .interchange import BinaryMask, PointMap

_EPS = 1e-9


@dataclass
class NormalField:
    normals: np.ndarray  # (H, W, 3) float64, unit where valid
    valid: np.ndarray    # (H, W) bool

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]


@dataclass
class PitchEstimate:
    theta_hat: float  # raw median per-pixel angle, radians
    phi: float        # camera pitch, radians
    samples: int

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi)


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    w = (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi
    w = np.where(w <= -np.pi, np.pi, w)
    return float(w) if np.isscalar(x) or np.ndim(x) == 0 else w


def surface_normals(pm: PointMap) -> NormalField:
    """Finite-difference normals on the image grid (u = column, v = row).

    N = (dv P x du P) / (||dv P x du P|| + eps), renormalized to unit length.
    Pixels in the last row/column, or with any invalid neighbor, are invalid.
    """
    pts = pm.points.astype(np.float64)
    h, w = pm.height, pm.width
    normals = np.zeros((h, w, 3))
    valid = np.zeros((h, w), dtype=bool)
    if h < 2 or w < 2:
        return NormalField(normals, valid)

    du = pts[:-1, 1:, :] - pts[:-1, :-1, :]   # right neighbor (u + 1)
    dv = pts[1:, :-1, :] - pts[:-1, :-1, :]   # down neighbor (v + 1)
    cross = np.cross(dv, du)
    norm = np.linalg.norm(cross, axis=2)
    n = cross / (norm[..., None] + _EPS)

    ok = (
        pm.valid[:-1, :-1]
        & pm.valid[:-1, 1:]
        & pm.valid[1:, :-1]
        & (norm > 1e-12)  # degenerate (collinear) tangents give no normal
    )
    # the eps guard biases the length; snap valid normals back to unit
    with np.errstate(invalid="ignore"):
        n = np.where(ok[..., None], n / np.maximum(np.linalg.norm(n, axis=2), 1e-300)[..., None], 0.0)
    normals[:-1, :-1] = n
    valid[:-1, :-1] = ok
    return NormalField(normals, valid)


def pixel_pitch(normal) -> float:
    """theta = arctan2(n_z, -n_y); undefined for normals along the x-axis."""
    n = np.asarray(normal, dtype=float)
    if n[1] == 0.0 and n[2] == 0.0:
        raise DataError("pixel_pitch: normal has no component in the (y, z) plane")
    return math.atan2(n[2], -n[1])


def estimate_pitch(nf: NormalField, front: BinaryMask) -> PitchEstimate:
    """Median pitch over valid front-face pixels.

    The median is the lower-middle order statistic, taken after recentering
    the samples around their circular mean so wrap-around near +-pi cannot
    split the distribution.
    """
    if front.bits.shape != nf.valid.shape:
        raise DataError("estimate_pitch: front mask dimensions do not match normals")
    sel = front.bits & nf.valid
    ny = nf.normals[..., 1][sel]
    nz = nf.normals[..., 2][sel]
    usable = (ny != 0.0) | (nz != 0.0)
    ny, nz = ny[usable], nz[usable]
    if ny.size == 0:
        raise DataError("no front-face normals")
    thetas = np.arctan2(nz, -ny)
    mu = math.atan2(np.sin(thetas).mean(), np.cos(thetas).mean())
    deltas = np.sort(wrap_angle(thetas - mu))
    theta_hat = wrap_angle(mu + deltas[(deltas.size - 1) // 2])
    phi = wrap_angle(-(theta_hat + math.pi / 2.0))
    return PitchEstimate(theta_hat=float(theta_hat), phi=float(phi), samples=int(ny.size))


def gravity_rotation(pe: PitchEstimate) -> np.ndarray:
    """Rotation taking camera-frame points to the gravity-aligned frame
    (x right, y down along gravity, z horizontal-forward): R_x(-phi)."""
    return rot_x(-pe.phi)


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
