"""Medium models: depth-only layered profiles and compact voxel scatterers.

Speeds are stored indirectly through the contrast V = 1 - c0^2 / c^2,
which is what every solver formula consumes; the speed is derived.  The
scatterer support must sit strictly below the measurement plane
(origin_depth h > 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import MediumValidationError


@dataclass(frozen=True)
class LayeredProfile:
    """Piecewise-constant speed profile below the plane, top to bottom.

    ``layers`` is a sequence of (thickness, speed) pairs; ``bottom_speed``
    fills the half-space underneath; ``top_speed`` is the background c0.
    """

    layers: tuple[tuple[float, float], ...]
    bottom_speed: float
    top_speed: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layers",
                           tuple((float(d), float(c)) for d, c in self.layers))

    @property
    def speeds(self) -> np.ndarray:
        """Speeds of all media top to bottom: c0, layers, bottom half-space."""
        return np.array([self.top_speed] + [c for _, c in self.layers]
                        + [self.bottom_speed])

    @property
    def thicknesses(self) -> np.ndarray:
        return np.array([d for d, _ in self.layers])


@dataclass(frozen=True)
class VoxelScatterer:
    """Compactly supported contrast on a uniform voxel box.

    The box top face sits at x3 = -origin_depth (must be strictly below
    the plane); the box is laterally centered on the origin.  ``contrast``
    holds V(y) = 1 - c0^2 / c^2(y) at voxel centers, shape ``dims``.
    """

    spacing: float
    dims: tuple[int, int, int]
    origin_depth: float
    contrast: np.ndarray
    c0: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.contrast, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "contrast", arr)
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    @property
    def voxel_volume(self) -> float:
        return self.spacing**3

    def voxel_centers(self) -> np.ndarray:
        """Centers as an (n1*n2*n3, 3) array, C-order matching contrast.ravel()."""
        n1, n2, n3 = self.dims
        a = self.spacing
        x1 = (np.arange(n1) - (n1 - 1) / 2) * a
        x2 = (np.arange(n2) - (n2 - 1) / 2) * a
        x3 = -self.origin_depth - (np.arange(n3) + 0.5) * a
        g1, g2, g3 = np.meshgrid(x1, x2, x3, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel(), g3.ravel()], axis=1)

    def speed(self) -> np.ndarray:
        """Speed field recovered from the contrast (requires V < 1)."""
        return speed_from_contrast(self.contrast, self.c0)


def contrast_from_speed(c, c0: float = 1.0) -> np.ndarray:
    return 1.0 - c0**2 / np.asarray(c, dtype=float) ** 2


def speed_from_contrast(v, c0: float = 1.0) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v >= 1):
        raise MediumValidationError("contrast must be < 1 to define a speed")
    return c0 / np.sqrt(1.0 - v)


def validate(medium):
    """Check a medium's invariants; returns the medium or raises.

    Layered profiles need positive bounded speeds and positive
    thicknesses.  Voxel scatterers need a strictly positive depth,
    positive spacing, and finite bounded real contrast.
    """
    if isinstance(medium, LayeredProfile):
        speeds = medium.speeds
        if np.any(~np.isfinite(speeds)) or np.any(speeds <= 0):
            raise MediumValidationError("all speeds must be positive and finite")
        if medium.thicknesses.size and np.any(medium.thicknesses <= 0):
            raise MediumValidationError("layer thicknesses must be positive")
        return medium
    if isinstance(medium, VoxelScatterer):
        if medium.origin_depth <= 0:
            raise MediumValidationError(
                "scatterer must sit strictly below the plane (origin_depth > 0)")
        if medium.spacing <= 0:
            raise MediumValidationError("voxel spacing must be positive")
        if any(n <= 0 for n in medium.dims):
            raise MediumValidationError("voxel dims must be positive")
        if medium.contrast.shape != medium.dims:
            raise MediumValidationError(
                f"contrast shape {medium.contrast.shape} != dims {medium.dims}")
        if np.any(~np.isfinite(medium.contrast)):
            raise MediumValidationError("contrast contains NaN or Inf")
        if np.any(np.abs(medium.contrast) >= 1e3):
            raise MediumValidationError("contrast is unphysically large")
        return medium
    raise MediumValidationError(f"unknown medium type {type(medium).__name__}")


def save_medium(medium, path) -> None:
    """Serialize a medium; layered profiles as JSON, voxel scatterers as npz."""
    path = str(path)
    if isinstance(medium, LayeredProfile):
        doc = {"kind": "layered", "layers": [list(l) for l in medium.layers],
               "bottom_speed": medium.bottom_speed, "top_speed": medium.top_speed}
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
    elif isinstance(medium, VoxelScatterer):
        np.savez(path, kind="voxel", spacing=medium.spacing,
                 dims=np.array(medium.dims), origin_depth=medium.origin_depth,
                 contrast=medium.contrast, c0=medium.c0)
    else:
        raise MediumValidationError(f"cannot serialize {type(medium).__name__}")


def load_medium(path):
    path = str(path)
    if path.endswith(".npz"):
        with np.load(path) as data:
            return VoxelScatterer(spacing=float(data["spacing"]),
                                  dims=tuple(int(n) for n in data["dims"]),
                                  origin_depth=float(data["origin_depth"]),
                                  contrast=data["contrast"],
                                  c0=float(data["c0"]))
    with open(path) as fh:
        doc = json.load(fh)
    return LayeredProfile(layers=tuple(tuple(l) for l in doc["layers"]),
                          bottom_speed=doc["bottom_speed"],
                          top_speed=doc["top_speed"])


def load_contrast_array(path, dims: tuple[int, int, int],
                        dtype=np.float64) -> np.ndarray:
    """Read a flat binary contrast array with declared dims."""
    flat = np.fromfile(str(path), dtype=dtype)
    n = int(np.prod(dims))
    if flat.size != n:
        raise MediumValidationError(
            f"binary file holds {flat.size} values, dims need {n}")
    return flat.reshape(dims)
