"""Angular-spectrum representation of wave fields on the plane x3 = 0.

A real time-domain field on the plane is stored as a complex amplitude
array B(eta', k) over a direction grid and a positive-wavenumber grid.
The field it represents is the plane-wave superposition

    U(t, x') = 2 Re sum_{k>0, nodes} B(k, eta')
               exp(i k (eta'.x' - c0 t)) k^2 w(eta') c0 dk,

the discrete form of the downgoing/upgoing decomposition.  Only k > 0 is
stored; negative frequencies are implied by conjugate symmetry, which
makes reality structural.

Directions with |eta'| < 1 are propagating, with real vertical component
eta3 = sqrt(1 - |eta'|^2).  Directions with |eta'| > 1 are evanescent,
with eta3 = i sgn(k) sqrt(|eta'|^2 - 1); they decay away from the plane
and carry no time-integrated energy flux.  A configurable margin keeps
grid nodes away from the grazing circle |eta'| = 1, where 1/eta3 blows up.

Grids, bands and fields are immutable after construction; every
operation here is a pure function and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import GrazingNodeError, GridMismatchError

GRAZING_ATOL = 1e-12


def eta3(k: float, eta_prime) -> complex | np.ndarray:
    """Vertical component of the unit direction vector for transverse eta'.

    Returns sqrt(1 - |eta'|^2) for |eta'| < 1 and
    i sgn(k) sqrt(|eta'|^2 - 1) for |eta'| > 1, so that
    eta3(-k, eta') = conj(eta3(k, eta')).

    ``eta_prime`` is a point in R^2 or an (n, 2) array of points.
    Raises GrazingNodeError when some |eta'| = 1 (the grid construction
    forbids such nodes) and ValueError for k = 0.
    """
    if k == 0:
        raise ValueError("k = 0 carries no direction information")
    pts = np.asarray(eta_prime, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    s2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    if np.any(np.abs(s2 - 1.0) <= GRAZING_ATOL):
        raise GrazingNodeError("|eta'| = 1 puts the node on the grazing circle")
    out = np.where(
        s2 < 1.0,
        np.sqrt(np.abs(1.0 - s2)).astype(complex),
        1j * np.sign(k) * np.sqrt(np.abs(s2 - 1.0)),
    )
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class FrequencyBand:
    """Positive wavenumber samples inside a band (0, band_limit].

    k = 0 is excluded: the scattering operator vanishes there, and the
    kernel prefactor i k / (2 eta3) vanishes with it.
    """

    k_values: np.ndarray
    band_limit: float
    c0: float = 1.0

    def __post_init__(self):
        k = np.asarray(self.k_values, dtype=float)
        if k.ndim != 1 or k.size == 0:
            raise ValueError("k_values must be a nonempty 1-d array")
        if np.any(k <= 0):
            raise ValueError("all wavenumbers must be strictly positive")
        if np.any(np.diff(k) <= 0):
            raise ValueError("k_values must be strictly increasing")
        if self.band_limit <= 0 or k[-1] > self.band_limit * (1 + 1e-12):
            raise ValueError("k_values must lie inside (0, band_limit]")
        if self.c0 <= 0:
            raise ValueError("background speed must be positive")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "k_values", k)

    @property
    def n_k(self) -> int:
        return self.k_values.size

    @property
    def dk_weights(self) -> np.ndarray:
        """Trapezoidal integration weights over the stored k samples."""
        k = self.k_values
        if k.size == 1:
            return np.ones(1)
        w = np.empty_like(k)
        w[0] = 0.5 * (k[1] - k[0])
        w[-1] = 0.5 * (k[-1] - k[-2])
        w[1:-1] = 0.5 * (k[2:] - k[:-2])
        return w


def uniform_band(band_limit: float, n_k: int, c0: float = 1.0) -> FrequencyBand:
    """Uniform k grid k_i = band_limit * i / n_k, i = 1..n_k (k = 0 excluded)."""
    k = band_limit * np.arange(1, n_k + 1) / n_k
    return FrequencyBand(k, band_limit, c0)


@dataclass(frozen=True)
class DirectionGrid:
    """Quadrature nodes and weights over transverse directions.

    Propagating nodes fill the disc |eta'| <= 1 - margin (tensor rule:
    Gauss-Legendre in radius, uniform in angle); an optional evanescent
    annulus covers 1 + margin <= |eta'| <= eta_max.  Propagating nodes
    come first in all arrays.  The angular count is even so the node set
    is closed under eta' -> -eta'; ``mirror`` holds that permutation.
    """

    nodes: np.ndarray          # (n, 2)
    weights: np.ndarray        # (n,) positive area weights
    n_prop: int
    margin: float
    n_angular: int
    eta_max: float | None
    mirror: np.ndarray         # (n,) int, nodes[mirror[q]] == -nodes[q]
    eta3_pos: np.ndarray       # (n,) complex, eta3 at k > 0

    def __post_init__(self):
        for name in ("nodes", "weights", "mirror", "eta3_pos"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_evan(self) -> int:
        return self.n_nodes - self.n_prop

    @property
    def rho(self) -> np.ndarray:
        return np.hypot(self.nodes[:, 0], self.nodes[:, 1])

    @property
    def prop_weights(self) -> np.ndarray:
        return self.weights[: self.n_prop]

    @property
    def prop_eta3(self) -> np.ndarray:
        """Real vertical components of the propagating nodes."""
        return self.eta3_pos[: self.n_prop].real

    def quadrature_error(self) -> float:
        """Max relative error integrating {1, x^2, x^2 y^2} over the disc."""
        x, y = self.nodes[: self.n_prop, 0], self.nodes[: self.n_prop, 1]
        w = self.prop_weights
        r = 1.0 - self.margin
        exact = [np.pi * r**2, np.pi * r**4 / 4, np.pi * r**6 / 24]
        approx = [w.sum(), (w * x**2).sum(), (w * x**2 * y**2).sum()]
        return max(abs(a - e) / abs(e) for a, e in zip(approx, exact))


def build_direction_grid(n_radial: int, n_angular: int, margin: float = 0.02,
                         annulus: tuple[int, float] | None = None) -> DirectionGrid:
    """Tensor polar quadrature over the direction disc.

    ``annulus=(n_radial_evan, eta_max)`` adds evanescent nodes on
    [1 + margin, eta_max].  ``n_angular`` must be even so that the grid
    is closed under the transverse mirror eta' -> -eta'.
    """
    if margin <= 0:
        raise ValueError("margin must be positive to avoid grazing nodes")
    if n_angular < 2 or n_angular % 2:
        raise ValueError("n_angular must be even (mirror closure) and >= 2")

    theta = 2 * np.pi * np.arange(n_angular) / n_angular
    ct, st = np.cos(theta), np.sin(theta)
    dtheta = 2 * np.pi / n_angular

    def ring_block(rho_nodes, rho_weights):
        nodes = np.empty((rho_nodes.size * n_angular, 2))
        weights = np.empty(rho_nodes.size * n_angular)
        for i, (r, wr) in enumerate(zip(rho_nodes, rho_weights)):
            sl = slice(i * n_angular, (i + 1) * n_angular)
            nodes[sl, 0] = r * ct
            nodes[sl, 1] = r * st
            weights[sl] = wr * r * dtheta
        return nodes, weights

    x, wx = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * (x + 1.0) * (1.0 - margin)
    wrho = 0.5 * wx * (1.0 - margin)
    nodes, weights = ring_block(rho, wrho)
    n_prop = nodes.shape[0]
    eta_max = None

    if annulus is not None:
        n_ev, eta_max = annulus
        if eta_max <= 1 + margin:
            raise ValueError("annulus eta_max must exceed 1 + margin")
        xe, we = np.polynomial.legendre.leggauss(n_ev)
        rho_e = 1 + margin + 0.5 * (xe + 1.0) * (eta_max - 1 - margin)
        wrho_e = 0.5 * we * (eta_max - 1 - margin)
        nodes_e, weights_e = ring_block(rho_e, wrho_e)
        nodes = np.vstack([nodes, nodes_e])
        weights = np.concatenate([weights, weights_e])

    n = nodes.shape[0]
    half = n_angular // 2
    idx = np.arange(n)
    ring, ang = divmod(idx, n_angular)
    mirror = ring * n_angular + (ang + half) % n_angular
    e3 = eta3(1.0, nodes)
    grid = DirectionGrid(nodes, weights, n_prop, margin, n_angular,
                         eta_max, mirror, e3)
    assert np.allclose(grid.nodes[grid.mirror], -grid.nodes)
    return grid


Orientation = Literal["down", "up"]


@dataclass(frozen=True)
class AngularField:
    """Complex plane-wave amplitudes over a band and a direction grid.

    ``amplitudes[q, i]`` is the coefficient at node q and wavenumber
    k_values[i].  Only k > 0 is stored; the amplitude at -k is the
    complex conjugate, so the represented time-domain field is real.
    """

    band: FrequencyBand
    grid: DirectionGrid
    amplitudes: np.ndarray
    orientation: Orientation = "down"

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n_nodes, self.band.n_k):
            raise ValueError(
                f"amplitudes shape {amps.shape} does not match "
                f"(n_nodes, n_k) = ({self.grid.n_nodes}, {self.band.n_k})")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if self.orientation not in ("down", "up"):
            raise ValueError("orientation must be 'down' or 'up'")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def with_amplitudes(self, amplitudes, orientation: Orientation | None = None) -> "AngularField":
        return AngularField(self.band, self.grid, amplitudes,
                            orientation or self.orientation)


@dataclass(frozen=True)
class TestFunction:
    """A band-limited field used as a distributional test function.

    The k support is inside the band by construction and each
    per-frequency profile lies in the weighted direction space, so the
    pairing with any iterate is finite.
    """

    field: AngularField
    compact_support: bool = True


def zero_field(band: FrequencyBand, grid: DirectionGrid,
               orientation: Orientation = "down") -> AngularField:
    return AngularField(band, grid,
                        np.zeros((grid.n_nodes, band.n_k), dtype=complex),
                        orientation)


def constant_test_function(band: FrequencyBand, grid: DirectionGrid) -> TestFunction:
    """Default test function: constant in k, lowest radial mode on the disc.

    Real and mirror symmetric, hence generic for the normalization
    pairing (nonzero overlap with probability one for random scatterers).
    """
    amps = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
    amps[: grid.n_prop, :] = 1.0
    return TestFunction(AngularField(band, grid, amps, "down"))


def radial_test_function(band: FrequencyBand, grid: DirectionGrid,
                         radial_power: int = 0,
                         k_profile=None) -> TestFunction:
    """Test function rho^(2 p) in direction times an optional k profile."""
    prof = np.ones(band.n_k) if k_profile is None else np.asarray(k_profile, float)
    amps = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
    amps[: grid.n_prop, :] = np.outer(grid.rho[: grid.n_prop] ** (2 * radial_power), prof)
    return TestFunction(AngularField(band, grid, amps, "down"))


def random_field(band: FrequencyBand, grid: DirectionGrid,
                 rng: np.random.Generator,
                 orientation: Orientation = "down",
                 propagating_only: bool = True) -> AngularField:
    """Broadband complex Gaussian amplitudes (a random real time-domain field)."""
    shape = (grid.n_nodes, band.n_k)
    amps = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if propagating_only:
        amps[grid.n_prop:, :] = 0.0
    return AngularField(band, grid, amps, orientation)


def check_same_support(u: AngularField, v: AngularField) -> None:
    """Raise GridMismatchError unless u and v share grid and band."""
    same = (u.grid is v.grid or
            (u.grid.n_nodes == v.grid.n_nodes
             and np.array_equal(u.grid.nodes, v.grid.nodes)))
    same = same and (u.band is v.band or np.array_equal(u.band.k_values, v.band.k_values))
    if not same:
        raise GridMismatchError("fields live on different grids or bands")


def project_propagating(field: AngularField) -> AngularField:
    """Orthogonal projection onto propagating components.

    Zeroes the evanescent annulus; propagating amplitudes are copied
    bit-identically, so the projection is exactly idempotent.
    """
    if field.grid.n_evan == 0:
        return field
    amps = field.amplitudes.copy()
    amps[field.grid.n_prop:, :] = 0.0
    return field.with_amplitudes(amps)


def time_reverse(field: AngularField) -> AngularField:
    """Time reversal U(t, x) -> U(-t, x) in the stored representation.

    On the k > 0 half this conjugates every amplitude and mirrors the
    transverse direction, eta' -> -eta'; a wave travelling toward +eta'
    comes back along -eta', and a downgoing wave returns upgoing, so the
    orientation flips.  Applying it twice is exactly the identity.
    """
    amps = np.conj(field.amplitudes)[field.grid.mirror, :]
    orientation = "up" if field.orientation == "down" else "down"
    return field.with_amplitudes(amps, orientation)


def synthesize_time_field(field: AngularField, t_samples, x_prime_samples):
    """Evaluate the represented time-domain field on the plane x3 = 0.

    ``t_samples`` is a 1-d array of times, ``x_prime_samples`` an (m, 2)
    array of plane positions.  Returns ``(u, imag_residual)`` where ``u``
    has shape (n_t, m).  Both frequency half-lines are summed explicitly;
    the imaginary part left over is reported (relative to the real peak)
    and discarded.
    """
    t = np.asarray(t_samples, dtype=float).ravel()
    xp = np.atleast_2d(np.asarray(x_prime_samples, dtype=float))
    k = field.band.k_values
    c0 = field.band.c0
    dk = field.band.dk_weights

    # spatial phases: (n_nodes, m)
    phase_x = field.grid.nodes @ xp.T
    acc = np.zeros((t.size, xp.shape[0]), dtype=complex)
    for sign in (+1.0, -1.0):
        amps = field.amplitudes if sign > 0 else np.conj(field.amplitudes)
        # mode sums per k, then the temporal factor
        for i, ki in enumerate(k):
            mode = (amps[:, i] * field.grid.weights) @ np.exp(1j * sign * ki * phase_x)
            acc += np.outer(np.exp(-1j * sign * ki * c0 * t),
                            mode * (ki**2 * c0 * dk[i]))
    peak = np.max(np.abs(acc.real))
    residual = float(np.max(np.abs(acc.imag)) / peak) if peak > 0 else 0.0
    return acc.real.copy(), residual


def save_field_csv(field: AngularField, path) -> None:
    """Columnar export: one row per (node, k) with k, eta1, eta2, Re, Im."""
    n, m = field.grid.n_nodes, field.band.n_k
    rows = np.empty((n * m, 5))
    rows[:, 0] = np.repeat(field.band.k_values[None, :], n, axis=0).ravel()
    rows[:, 1] = np.repeat(field.grid.nodes[:, 0], m)
    rows[:, 2] = np.repeat(field.grid.nodes[:, 1], m)
    rows[:, 3] = field.amplitudes.real.ravel()
    rows[:, 4] = field.amplitudes.imag.ravel()
    np.savetxt(path, rows, fmt="%.17g", delimiter=",",
               header="k,eta1,eta2,re,im", comments="")


def load_field_csv(band: FrequencyBand, grid: DirectionGrid, path,
                   orientation: Orientation = "down") -> AngularField:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n, m = grid.n_nodes, band.n_k
    if rows.shape != (n * m, 5):
        raise ValueError(f"file holds {rows.shape[0]} rows, expected {n * m}")
    k_file = rows[:, 0].reshape(n, m)
    if not np.allclose(k_file, band.k_values[None, :]):
        raise GridMismatchError("file wavenumbers do not match the band")
    if not np.allclose(rows[:, 1].reshape(n, m)[:, 0], grid.nodes[:, 0]) or \
       not np.allclose(rows[:, 2].reshape(n, m)[:, 0], grid.nodes[:, 1]):
        raise GridMismatchError("file directions do not match the grid")
    amps = (rows[:, 3] + 1j * rows[:, 4]).reshape(n, m)
    return AngularField(band, grid, amps, orientation)
