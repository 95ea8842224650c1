"""Exact scattering for depth-only media: plane-wave reflection coefficients.

For a medium that depends only on depth, a downgoing plane wave with
transverse direction eta' reflects into the mirror-image upgoing plane
wave scaled by a coefficient R(k, eta'), so the scattering operator is
diagonal over (k, eta') and the best incident field concentrates at the
grid maximum of |R|^2.

R is computed from the 2x2 continuity system (u and du/dx3 continuous at
every interface, outgoing/decaying radiation below) folded into the
standard stable bottom-up recursion over interfaces

    R_j = (r_j + R_{j+1} e^{2 i q_{j+1} d_{j+1}})
          / (1 + r_j R_{j+1} e^{2 i q_{j+1} d_{j+1}}),

with Fresnel factors r_j = (q_j - q_{j+1}) / (q_j + q_{j+1}) and layer
vertical wavenumbers q_j = k sqrt((c0/c_j)^2 - |eta'|^2), continued to
i sgn(k) sqrt(...) past total internal reflection.  This is exact for
piecewise-constant profiles, and every phase factor decays for
evanescent layers, so no normalization blowup can occur.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angular import AngularField, DirectionGrid, FrequencyBand, check_same_support
from .errors import GrazingNodeError, GridMismatchError
from .media import LayeredProfile, validate


def _vertical_wavenumbers(profile: LayeredProfile, k: float,
                          abs_eta_sq: np.ndarray) -> np.ndarray:
    """q_j = k * sqrt(n_j^2 - |eta'|^2) per medium, branch matching eta3."""
    n_sq = (profile.top_speed / profile.speeds) ** 2
    arg = n_sq[:, None] - abs_eta_sq[None, :]
    root = np.where(arg >= 0,
                    np.sqrt(np.abs(arg)).astype(complex),
                    1j * np.sign(k) * np.sqrt(np.abs(arg)))
    return k * root


def reflection_coefficient(profile: LayeredProfile, k: float, eta_prime):
    """Reflection coefficient R(k, eta') for a downgoing plane wave.

    ``eta_prime`` may be a single point or an (n, 2) array; requires
    |eta'| < 1 and k > 0.
    """
    if k <= 0:
        raise ValueError("reflection table is built for k > 0")
    validate(profile)
    pts = np.asarray(eta_prime, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    s2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    if np.any(s2 >= 1.0):
        raise GrazingNodeError("reflection requires propagating incidence, |eta'| < 1")

    q = _vertical_wavenumbers(profile, k, s2)
    d = profile.thicknesses
    n_if = q.shape[0] - 1  # interfaces, top to bottom
    r = np.zeros(pts.shape[0], dtype=complex)
    for j in range(n_if - 1, -1, -1):
        fresnel = (q[j] - q[j + 1]) / (q[j] + q[j + 1])
        if j == n_if - 1:
            r = fresnel
        else:
            phase = np.exp(2j * q[j + 1] * d[j])
            r = (fresnel + r * phase) / (1.0 + fresnel * r * phase)
    return complex(r[0]) if scalar else r


@dataclass(frozen=True)
class ReflectionTable:
    """R(k, eta') sampled on the propagating nodes of a direction grid."""

    band: FrequencyBand
    grid: DirectionGrid
    r: np.ndarray  # (n_prop, n_k)

    def __post_init__(self):
        arr = np.asarray(self.r, dtype=complex).copy()
        if arr.shape != (self.grid.n_prop, self.band.n_k):
            raise ValueError("reflection table shape mismatch")
        arr.setflags(write=False)
        object.__setattr__(self, "r", arr)

    def scatter(self, down: AngularField) -> AngularField:
        return scatter_1d(self, down)


def build_reflection_table(profile: LayeredProfile, band: FrequencyBand,
                           grid: DirectionGrid) -> ReflectionTable:
    validate(profile)
    pts = grid.nodes[: grid.n_prop]
    r = np.empty((grid.n_prop, band.n_k), dtype=complex)
    for i, k in enumerate(band.k_values):
        r[:, i] = reflection_coefficient(profile, float(k), pts)
    return ReflectionTable(band, grid, r)


def scatter_1d(table: ReflectionTable, down: AngularField) -> AngularField:
    """Pointwise action A(k, eta') = R(k, eta') B(k, eta'); no mode coupling.

    Evanescent incidence entries are out of scope: annulus amplitudes map
    to zero upgoing amplitude.
    """
    if down.grid is not table.grid and not np.array_equal(down.grid.nodes, table.grid.nodes):
        raise GridMismatchError("field grid does not match the reflection table")
    if not np.array_equal(down.band.k_values, table.band.k_values):
        raise GridMismatchError("field band does not match the reflection table")
    up = np.zeros_like(down.amplitudes)
    n = table.grid.n_prop
    up[:n, :] = table.r * down.amplitudes[:n, :]
    return AngularField(down.band, down.grid, up, "up")


@dataclass(frozen=True)
class Distinguishability1D:
    delta: float
    k_star: float
    eta_star: tuple[float, float]
    k_index: int
    node_index: int
    degenerate: bool


def distinguishability_1d(table: ReflectionTable,
                          exclude_above: float | None = None) -> Distinguishability1D:
    """Grid maximum of |R|^2 and the node attaining it.

    ``exclude_above`` drops nodes with |eta'| greater than the cutoff
    before maximizing; the grazing maximum R -> -1 is physical but often
    unwanted, so callers typically report both variants.
    """
    mag = np.abs(table.r) ** 2
    rho = table.grid.rho[: table.grid.n_prop]
    if exclude_above is not None:
        mag = np.where(rho[:, None] <= exclude_above, mag, -np.inf)
    flat = int(np.argmax(mag))
    node_index, k_index = divmod(flat, table.band.n_k)
    delta = float(mag[node_index, k_index])
    degenerate = False
    if not np.isfinite(delta) or delta <= 0.0:
        delta = max(delta, 0.0) if np.isfinite(delta) else 0.0
        degenerate = True
    return Distinguishability1D(
        delta=delta,
        k_star=float(table.band.k_values[k_index]),
        eta_star=tuple(table.grid.nodes[node_index]),
        k_index=k_index,
        node_index=node_index,
        degenerate=degenerate,
    )


def save_reflection_csv(table: ReflectionTable, path) -> None:
    """Columnar export (k, eta1, eta2, Re R, Im R) for plotting |R|."""
    n, m = table.grid.n_prop, table.band.n_k
    rows = np.empty((n * m, 5))
    rows[:, 0] = np.repeat(table.band.k_values[None, :], n, axis=0).ravel()
    rows[:, 1] = np.repeat(table.grid.nodes[:n, 0], m)
    rows[:, 2] = np.repeat(table.grid.nodes[:n, 1], m)
    rows[:, 3] = table.r.real.ravel()
    rows[:, 4] = table.r.imag.ravel()
    np.savetxt(path, rows, fmt="%.17g", delimiter=",",
               header="k,eta1,eta2,re_r,im_r", comments="")
