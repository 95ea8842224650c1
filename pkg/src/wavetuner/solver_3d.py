"""Volume-integral scattering from compact penetrable scatterers.

The total field for an incident plane wave exp(i k d.x), d = (eta', -eta3),
solves the volume integral equation

    psi(x) = exp(i k d.x) - k^2 int g(k, x, y) V(y) psi(y) dy,

with the outgoing Green's function g = exp(ik|x-y|) / (4 pi |x-y|) and
contrast V = 1 - c0^2/c^2.  The solve uses the symmetrized form obtained
by multiplying through by |V|^{1/2},

    (I + k^2 K) zeta = zeta0,   K = |V|^{1/2} g (V / |V|^{1/2}),

which lives on the support of V and is well posed for every real k != 0.
K is applied through an FFT convolution on a 2x zero-padded voxel box;
the singular self-cell of g is integrated analytically over the
equal-volume ball.  A Krylov solver (GMRES) drives the residual below a
contract tolerance that is re-checked explicitly on every accepted solve.

From the solved field, the amplitude

    A(k, eta, eta~) = int exp(-i k eta . y) V(y) psi(k, y, eta~) dy

gives the upgoing angular response of a unit downgoing plane wave as the
kernel value -(i k / (2 eta3)) A(k, eta+, eta~-).  Scattering matrices
over a direction grid are assembled column by column, one solve per
incident propagating node per frequency, with the quadrature weight
k^2 w absorbed into the matrix so it acts directly on amplitude vectors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .angular import AngularField, DirectionGrid, FrequencyBand, eta3
from .errors import GrazingNodeError, GridMismatchError, SolveConvergenceError
from .media import VoxelScatterer, validate

ARCHIVE_FORMAT_VERSION = 1


def green(k: float, x, y):
    """Outgoing free-space Green's function exp(ik r) / (4 pi r).

    ``x`` and ``y`` broadcast over a trailing axis of length 3.  Raises
    on coincident points; the voxel self-cell is handled separately by
    the equal-volume ball integral.
    """
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    if np.any(r == 0):
        raise ValueError("green is singular at coincident points")
    return np.exp(1j * k * r) / (4 * np.pi * r)


def green_weyl(k: float, x, y, n_prop: int = 96, n_evan: int = 96,
               n_theta: int = 64) -> complex:
    """Plane-wave (transverse Fourier) quadrature of the Green's function.

    Evaluates g as an integral over transverse directions, extended over
    the evanescent region, with radial substitutions rho = sin(phi) and
    rho = sqrt(1 + t^2) that absorb the 1/eta3 grazing singularity.
    Requires x3 != y3.  Used as an independent cross-check of ``green``.
    """
    if k <= 0:
        raise ValueError("weyl quadrature implemented for k > 0")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    dz = abs(x[2] - y[2])
    if dz == 0:
        raise ValueError("weyl quadrature needs x3 != y3")
    dxp = x[:2] - y[:2]

    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    cs = np.stack([np.cos(theta), np.sin(theta)], axis=1)  # (n_theta, 2)
    w_theta = 2 * np.pi / n_theta

    # propagating: rho = sin(phi), eta3 = cos(phi)
    xg, wg = np.polynomial.legendre.leggauss(n_prop)
    phi = 0.25 * np.pi * (xg + 1.0)
    w_phi = 0.25 * np.pi * wg
    rho_p = np.sin(phi)
    rad_p = (1j / (2 * k)) * np.sin(phi) * np.exp(1j * k * np.cos(phi) * dz) * w_phi

    # evanescent: rho = sqrt(1 + t^2), eta3 = i t
    t_max = 40.0 / (k * dz)
    xe, we = np.polynomial.legendre.leggauss(n_evan)
    t = 0.5 * (xe + 1.0) * t_max
    w_t = 0.5 * we * t_max
    rho_e = np.sqrt(1.0 + t**2)
    rad_e = (1.0 / (2 * k)) * np.exp(-k * t * dz) * w_t

    rho = np.concatenate([rho_p, rho_e])
    rad = np.concatenate([rad_p, rad_e])
    # transverse phase factor exp(i k rho (cos, sin).dx')
    phase = np.exp(1j * k * np.outer(rho, cs @ dxp))
    total = w_theta * np.sum(rad[:, None] * phase)
    return complex(total * k**2 / (2 * np.pi) ** 2)


def _ball_self_term(k: float, spacing: float) -> complex:
    """Integral of g over the equal-volume ball around the singular voxel."""
    rho0 = spacing * (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)
    return (np.exp(1j * k * rho0) * (1.0 - 1j * k * rho0) - 1.0) / k**2


class GreenConvolution:
    """FFT convolution with the discretized Green kernel on a 2x padded box."""

    def __init__(self, k: float, dims: tuple[int, int, int], spacing: float):
        self.dims = dims
        pad = tuple(2 * n for n in dims)
        offs = []
        for n, m in zip(dims, pad):
            d = np.arange(m)
            offs.append(np.where(d < n, d, d - m) * spacing)
        g1, g2, g3 = np.meshgrid(*offs, indexing="ij")
        r = np.sqrt(g1**2 + g2**2 + g3**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.exp(1j * k * r) / (4 * np.pi * r) * spacing**3
        kern[0, 0, 0] = _ball_self_term(k, spacing)
        self._kern_fft = np.fft.fftn(kern)
        self._pad = pad

    def apply(self, density: np.ndarray) -> np.ndarray:
        """Convolve a voxel density (shape dims) with the Green kernel."""
        n1, n2, n3 = self.dims
        padded = np.zeros(self._pad, dtype=complex)
        padded[:n1, :n2, :n3] = density
        out = np.fft.ifftn(np.fft.fftn(padded) * self._kern_fft)
        return out[:n1, :n2, :n3]


@dataclass
class TotalFieldSolution:
    """Solved total field for one (k, incident direction) pair."""

    k: float
    eta_tilde_prime: tuple[float, float]
    psi: np.ndarray          # total field on the voxel grid, shape dims
    residual: float
    iterations: int


def incident_plane_wave(scatterer: VoxelScatterer, k: float, eta_tilde_prime) -> np.ndarray:
    """Downgoing plane wave exp(ik (eta'.y' - eta3 y3)) at voxel centers."""
    e = np.asarray(eta_tilde_prime, float)
    e3 = eta3(k, e)
    y = scatterer.voxel_centers()
    phase = 1j * k * (y[:, 0] * e[0] + y[:, 1] * e[1] - e3 * y[:, 2])
    return np.exp(phase).reshape(scatterer.dims)


def ls_solve(scatterer: VoxelScatterer, k: float, eta_tilde_prime,
             tol: float = 1e-8, max_iter: int = 500,
             conv: GreenConvolution | None = None,
             factored: bool = True) -> TotalFieldSolution:
    """Solve the volume integral equation for one incident plane wave.

    ``factored=False`` solves the raw (unsymmetrized) equation for
    diagnostics.  Raises SolveConvergenceError with the achieved residual
    if the Krylov iteration stalls; any real k != 0 is admissible.
    """
    validate(scatterer)
    if k == 0:
        raise ValueError("k = 0 is excluded (scattering vanishes there)")
    v = scatterer.contrast
    dims = scatterer.dims
    inc = incident_plane_wave(scatterer, k, eta_tilde_prime)
    if not np.any(v):
        return TotalFieldSolution(k, tuple(np.asarray(eta_tilde_prime, float)),
                                  inc, 0.0, 0)

    if conv is None:
        conv = GreenConvolution(k, dims, scatterer.spacing)
    abs_root = np.sqrt(np.abs(v))
    v_half = np.where(abs_root > 0, v / np.where(abs_root > 0, abs_root, 1.0), 0.0)

    if factored:
        def matvec(z):
            z = z.reshape(dims)
            return (z + k**2 * abs_root * conv.apply(v_half * z)).ravel()
        rhs = (abs_root * inc).ravel()
    else:
        def matvec(z):
            z = z.reshape(dims)
            return (z + k**2 * conv.apply(v * z)).ravel()
        rhs = inc.ravel()

    n = int(np.prod(dims))
    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    # max_iter bounds the total Krylov steps, split into restart cycles
    restart = max(1, min(50, n, max_iter))
    sol, info = gmres(op, rhs, rtol=tol * 0.1, atol=0.0,
                      restart=restart,
                      maxiter=max(1, -(-max_iter // restart)),
                      callback=count, callback_type="pr_norm")
    residual = float(np.linalg.norm(matvec(sol) - rhs) / np.linalg.norm(rhs))
    if info != 0 or residual > tol:
        raise SolveConvergenceError(
            f"linear solve stalled at relative residual {residual:.3e} "
            f"(tolerance {tol:.1e}, {iters} iterations)",
            residual=residual, iterations=iters)

    if factored:
        zeta = sol.reshape(dims)
        support = abs_root > 0
        psi = inc - k**2 * conv.apply(v_half * zeta)
        psi[support] = zeta[support] / abs_root[support]
    else:
        psi = sol.reshape(dims)
    return TotalFieldSolution(k, tuple(np.asarray(eta_tilde_prime, float)),
                              psi, residual, iters)


def _outgoing_phases(scatterer: VoxelScatterer, k: float, eta_prime) -> np.ndarray:
    """exp(-ik eta+ . y) rows for outgoing directions, shape (n_dirs, n_vox)."""
    pts = np.atleast_2d(np.asarray(eta_prime, float))
    e3 = np.atleast_1d(eta3(k, pts))
    y = scatterer.voxel_centers()
    phase = -1j * k * (pts[:, 0, None] * y[None, :, 0]
                       + pts[:, 1, None] * y[None, :, 1]
                       + e3[:, None] * y[None, :, 2])
    return np.exp(phase)


def scattering_amplitude(scatterer: VoxelScatterer, k: float, eta_prime,
                         eta_tilde_prime, solution: TotalFieldSolution | None = None,
                         born: bool = False, tol: float = 1e-8) -> complex | np.ndarray:
    """Amplitude A(k, eta+, eta~-) of the wave scattered from eta~ into eta.

    ``eta_prime`` may be one direction or an (n, 2) array (evanescent
    outgoing directions are fine, the vertical component is continued
    analytically).  ``born=True`` replaces the total field by the
    incident one.  A precomputed ``solution`` for (k, eta~) is reused
    when given.
    """
    if born:
        psi = incident_plane_wave(scatterer, k, eta_tilde_prime)
    else:
        if solution is None:
            solution = ls_solve(scatterer, k, eta_tilde_prime, tol=tol)
        psi = solution.psi
    density = (scatterer.contrast * psi).ravel() * scatterer.voxel_volume
    rows = _outgoing_phases(scatterer, k, eta_prime)
    vals = rows @ density
    return complex(vals[0]) if np.asarray(eta_prime).ndim == 1 else vals


def s_kernel(scatterer: VoxelScatterer, k: float, eta_prime, eta_tilde_prime,
             solution: TotalFieldSolution | None = None,
             born: bool = False, tol: float = 1e-8):
    """Scattering kernel -(i k / (2 eta3)) A(k, eta+, eta~-).

    Outgoing directions must stay off the grazing circle, where the
    prefactor blows up; grid construction guarantees a margin.
    """
    pts = np.atleast_2d(np.asarray(eta_prime, float))
    s2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    if np.any(np.abs(s2 - 1.0) <= 1e-9):
        raise GrazingNodeError("kernel prefactor 1/eta3 is singular at grazing")
    e3 = np.atleast_1d(eta3(k, pts))
    amp = scattering_amplitude(scatterer, k, pts, eta_tilde_prime,
                               solution=solution, born=born, tol=tol)
    vals = -(1j * k / (2.0 * e3)) * np.atleast_1d(amp)
    return complex(vals[0]) if np.asarray(eta_prime).ndim == 1 else vals


@dataclass(frozen=True)
class ScatteringBand:
    """Per-frequency dense scattering matrices on a direction grid.

    ``matrices[i]`` maps the vector of downgoing amplitudes at the
    propagating nodes to upgoing amplitudes at the same nodes for
    k_values[i]; the quadrature weight k^2 w is already absorbed.
    ``weighting`` holds the compactness weight |1 - |eta'|^2|^{1/4}
    per node.
    """

    band: FrequencyBand
    grid: DirectionGrid
    matrices: np.ndarray       # (n_k, n_prop, n_prop) complex
    weighting: np.ndarray      # (n_nodes,)

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=complex)
        n = self.grid.n_prop
        if m.shape != (self.band.n_k, n, n):
            raise ValueError("scattering matrices shape mismatch")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)
        w = np.asarray(self.weighting, dtype=float).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weighting", w)

    def scatter(self, down: AngularField) -> AngularField:
        if not np.array_equal(down.grid.nodes, self.grid.nodes) or \
           not np.array_equal(down.band.k_values, self.band.k_values):
            raise GridMismatchError("field does not match the scattering band")
        up = np.zeros_like(down.amplitudes)
        n = self.grid.n_prop
        for i in range(self.band.n_k):
            up[:n, i] = self.matrices[i] @ down.amplitudes[:n, i]
        return AngularField(down.band, down.grid, up, "up")


def compactness_weighting(grid: DirectionGrid) -> np.ndarray:
    return np.abs(1.0 - grid.rho**2) ** 0.25


def assemble_band(scatterer: VoxelScatterer, band: FrequencyBand,
                  grid: DirectionGrid, tol: float = 1e-8, max_iter: int = 500,
                  born_only: bool = False, workers: int = 1) -> ScatteringBand:
    """Assemble per-frequency scattering matrices by delta-probing.

    One solve per (frequency, incident propagating node); the column for
    incident node p holds kernel values times the quadrature weight
    k^2 w_p.  Evanescent incident directions are excluded (the projected
    operator is all the iteration uses).  Solves are independent and
    dispatched to a thread pool; assembly is deterministic because each
    column is written by index.
    """
    validate(scatterer)
    n = grid.n_prop
    pts = grid.nodes[:n]
    e3 = grid.prop_eta3
    w = grid.prop_weights
    matrices = np.zeros((band.n_k, n, n), dtype=complex)

    def fill_column(i: int, p: int, conv: GreenConvolution | None):
        k = float(band.k_values[i])
        if born_only:
            amp = scattering_amplitude(scatterer, k, pts, pts[p], born=True)
        else:
            sol = ls_solve(scatterer, k, pts[p], tol=tol, max_iter=max_iter,
                           conv=conv)
            amp = scattering_amplitude(scatterer, k, pts, pts[p], solution=sol)
        kernel = -(1j * k / (2.0 * e3)) * amp
        matrices[i, :, p] = kernel * k**2 * w[p]

    for i in range(band.n_k):
        k = float(band.k_values[i])
        conv = None
        if not born_only and np.any(scatterer.contrast):
            conv = GreenConvolution(k, scatterer.dims, scatterer.spacing)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda p: fill_column(i, p, conv), range(n)))
        else:
            for p in range(n):
                fill_column(i, p, conv)
    return ScatteringBand(band, grid, matrices, compactness_weighting(grid))


def flux_weighted_matrix(band_entry: np.ndarray, grid: DirectionGrid) -> np.ndarray:
    """Similarity transform D^(1/2) S D^(-1/2), D = diag(w eta3), per frequency.

    In this representation the flux inner product is the plain Euclidean
    one, so operator norms and adjoints are ordinary matrix operations.
    """
    d = np.sqrt(grid.prop_weights * grid.prop_eta3)
    return (d[:, None] * band_entry) / d[None, :]


def weighted_operator_norm(band: ScatteringBand, k_index: int) -> float:
    """Flux-weighted operator norm of the projected scattering matrix."""
    m = flux_weighted_matrix(band.matrices[k_index], band.grid)
    return float(np.linalg.norm(m, 2))


def hs_norm(band: ScatteringBand, k_index: int) -> float:
    """Discrete Hilbert-Schmidt norm in the compactness-weighted space.

    Frobenius norm of the kernel conjugated by the weighting
    |1 - |eta'|^2|^{1/4} (squared per side) with the k^2 w measure on
    both arguments; finiteness certifies compactness of the
    fixed-frequency operator.
    """
    n = band.grid.n_prop
    g = band.weighting[:n] ** 2
    w = band.grid.prop_weights
    s = band.matrices[k_index]
    # matrices carry k^2 w_p on the incident side already; complete the
    # symmetric measure and the weight ratio g_q / g_p.
    k2 = float(band.band.k_values[k_index]) ** 2
    scale = np.sqrt(g[:, None] / g[None, :]) * np.sqrt((k2 * w)[:, None] / (k2 * w)[None, :])
    return float(np.linalg.norm(s * scale))


def save_band(band: ScatteringBand, path, config_hash: str = "") -> None:
    """Persist an assembled band so iteration runs can reuse it."""
    np.savez(str(path),
             format_version=ARCHIVE_FORMAT_VERSION,
             k_values=band.band.k_values,
             band_limit=band.band.band_limit,
             c0=band.band.c0,
             nodes=band.grid.nodes,
             weights=band.grid.weights,
             n_prop=band.grid.n_prop,
             margin=band.grid.margin,
             n_angular=band.grid.n_angular,
             eta_max=-1.0 if band.grid.eta_max is None else band.grid.eta_max,
             mirror=band.grid.mirror,
             matrices=band.matrices,
             weighting=band.weighting,
             config_hash=config_hash)


def load_band(path) -> ScatteringBand:
    from .angular import DirectionGrid, FrequencyBand, eta3 as _eta3

    with np.load(str(path), allow_pickle=False) as data:
        version = int(data["format_version"])
        if version > ARCHIVE_FORMAT_VERSION:
            raise ValueError(f"archive format {version} is newer than supported "
                             f"({ARCHIVE_FORMAT_VERSION})")
        band = FrequencyBand(data["k_values"], float(data["band_limit"]),
                             float(data["c0"]))
        eta_max = float(data["eta_max"])
        nodes = data["nodes"]
        grid = DirectionGrid(nodes=nodes,
                             weights=data["weights"],
                             n_prop=int(data["n_prop"]),
                             margin=float(data["margin"]),
                             n_angular=int(data["n_angular"]),
                             eta_max=None if eta_max < 0 else eta_max,
                             mirror=data["mirror"],
                             eta3_pos=_eta3(1.0, nodes))
        return ScatteringBand(band, grid, data["matrices"], data["weighting"])
