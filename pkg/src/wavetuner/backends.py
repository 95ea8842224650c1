"""Scattering backends: anything exposing scatter(down_field) -> up_field.

Physical backends (reflection tables, assembled 3D bands) come from the
solver modules; this module adds the zero backend (free space, the usual
reference), synthetic backends with a planted spectrum for convergence
studies, and conversion of any diagonal or synthetic backend to a dense
``ScatteringBand`` so the spectral tooling applies uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .angular import AngularField, DirectionGrid, FrequencyBand, zero_field
from .errors import GridMismatchError
from .solver_1d import ReflectionTable
from .solver_3d import ScatteringBand, compactness_weighting


@runtime_checkable
class ScatteringBackendHandle(Protocol):
    def scatter(self, down: AngularField) -> AngularField: ...


@dataclass(frozen=True)
class ZeroBackend:
    """Free space: the scattering operator is zero."""

    def scatter(self, down: AngularField) -> AngularField:
        return zero_field(down.band, down.grid, "up")


def _check_field(band, grid, field):
    if not np.array_equal(field.grid.nodes, grid.nodes) or \
       not np.array_equal(field.band.k_values, band.k_values):
        raise GridMismatchError("field does not match the backend grid/band")


@dataclass(frozen=True)
class SyntheticBackend:
    """Backend with planted eigenvalue curves lambda_m(k) >= 0.

    scatter multiplies each mode by sqrt(lambda_m(k)); the modes are
    orthonormal in the flux weight and mirror-symmetric real vectors,
    so the backend satisfies the same adjoint identity as a physical
    scatterer and the iteration behaves exactly as predicted.
    """

    band: FrequencyBand
    grid: DirectionGrid
    curves: np.ndarray    # (n_modes, n_k) nonnegative
    vectors: np.ndarray   # (n_modes, n_prop) real, D-orthonormal

    def __post_init__(self):
        c = np.asarray(self.curves, dtype=float)
        v = np.asarray(self.vectors, dtype=float)
        if c.shape != (v.shape[0], self.band.n_k) or v.shape[1] != self.grid.n_prop:
            raise ValueError("planted curves/vectors shape mismatch")
        if np.any(c < 0):
            raise ValueError("planted eigenvalue curves must be nonnegative")
        for name, arr in (("curves", c), ("vectors", v)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def scatter(self, down: AngularField) -> AngularField:
        _check_field(self.band, self.grid, down)
        n = self.grid.n_prop
        d = self.grid.prop_weights * self.grid.prop_eta3
        up = np.zeros_like(down.amplitudes)
        coeff = (self.vectors * d[None, :]) @ down.amplitudes[:n, :]  # (m, n_k)
        up[:n, :] = self.vectors.T @ (np.sqrt(self.curves) * coeff)
        return AngularField(down.band, down.grid, up, "up")

    def to_band(self) -> ScatteringBand:
        n = self.grid.n_prop
        d = self.grid.prop_weights * self.grid.prop_eta3
        mats = np.empty((self.band.n_k, n, n), dtype=complex)
        for i in range(self.band.n_k):
            s = np.zeros((n, n))
            for m in range(self.curves.shape[0]):
                s += np.sqrt(self.curves[m, i]) * np.outer(self.vectors[m],
                                                           self.vectors[m] * d)
            mats[i] = s
        return ScatteringBand(self.band, self.grid, mats,
                              compactness_weighting(self.grid))


def flux_orthonormal_modes(grid: DirectionGrid, n_modes: int,
                           width: float = 0.45) -> np.ndarray:
    """Real radial mode vectors, orthonormal in the flux weight.

    Gram-Schmidt on rho^(2m) exp(-rho^2 / width^2); radial symmetry makes
    every mode mirror symmetric.
    """
    n = grid.n_prop
    d = grid.prop_weights * grid.prop_eta3
    rho = grid.rho[:n]
    modes = np.empty((n_modes, n))
    for m in range(n_modes):
        v = rho ** (2 * m) * np.exp(-(rho**2) / width**2)
        for j in range(m):
            v = v - modes[j] * np.sum(d * modes[j] * v)
        v = v / np.sqrt(np.sum(d * v * v))
        modes[m] = v
    return modes


def clipped_peak_curve(k_values: np.ndarray, k0: float, height: float,
                       curvature: float, order: int = 2) -> np.ndarray:
    """max(height - curvature (k - k0)^order, 0) sampled on the k grid."""
    return np.maximum(height - curvature * (k_values - k0) ** order, 0.0)


def planted_backend(band: FrequencyBand, grid: DirectionGrid,
                    peaks: list[tuple[float, float, float, int]],
                    extra_curves: np.ndarray | None = None,
                    width: float = 0.45) -> SyntheticBackend:
    """Rank-1 synthetic backend whose top curve is the max of planted peaks.

    ``peaks`` holds (k0, height, curvature, order) tuples.  Optional
    ``extra_curves`` adds lower modes on further orthonormal vectors.
    """
    k = band.k_values
    top = np.zeros(band.n_k)
    for k0, height, curvature, order in peaks:
        top = np.maximum(top, clipped_peak_curve(k, k0, height, curvature, order))
    curves = [top]
    if extra_curves is not None:
        extra = np.atleast_2d(np.asarray(extra_curves, dtype=float))
        curves.extend(list(extra))
    curves = np.array(curves)
    vectors = flux_orthonormal_modes(grid, curves.shape[0], width=width)
    return SyntheticBackend(band, grid, curves, vectors)


def table_to_band(table: ReflectionTable) -> ScatteringBand:
    """Dense (diagonal) band for a depth-only medium's reflection table."""
    n = table.grid.n_prop
    mats = np.zeros((table.band.n_k, n, n), dtype=complex)
    for i in range(table.band.n_k):
        np.fill_diagonal(mats[i], table.r[:, i])
    return ScatteringBand(table.band, table.grid, mats,
                          compactness_weighting(table.grid))


def backend_to_band(backend, band: FrequencyBand,
                    grid: DirectionGrid) -> ScatteringBand:
    """Dense per-frequency matrices for any supported backend."""
    if isinstance(backend, ScatteringBand):
        return backend
    if isinstance(backend, ReflectionTable):
        return table_to_band(backend)
    if isinstance(backend, SyntheticBackend):
        return backend.to_band()
    if isinstance(backend, ZeroBackend):
        n = grid.n_prop
        return ScatteringBand(band, grid,
                              np.zeros((band.n_k, n, n), dtype=complex),
                              compactness_weighting(grid))
    raise TypeError(f"no matrix form for backend {type(backend).__name__}")
