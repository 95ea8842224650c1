"""Per-frequency spectral analysis of the scattered-energy operator.

At each wavenumber the two-pass operator (scatter, weight, adjoint
scatter) is a nonnegative self-adjoint matrix in the flux inner product;
its eigenvalue curves over k govern the time-reversal iteration: powers
of the operator concentrate at the band frequency where the top curve
attains its maximum M, at a speed set by the local expansion
M - b (k - k0)^p.  This module extracts the curves, locates maximizers,
fits the order p and curvature b, evaluates the decay integral
int_0^h (1 - b k^p)^n dk that controls the rate, and builds the
predicted limit field for comparison with empirical iterates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import linear_sum_assignment

from .angular import AngularField, TestFunction
from .errors import DegeneratePairingError, OrderUndeterminedError
from .flux import flux_inner
from .solver_3d import ScatteringBand, flux_weighted_matrix


def gram_matrix(band: ScatteringBand, k_index: int) -> np.ndarray:
    """Self-adjoint product of the projected scattering matrix with its adjoint.

    The flux weight is absorbed into a similarity transform, so the
    result is an ordinary Hermitian matrix whose eigenvalues are the
    squared singular values of the weighted matrix; it is symmetrized to
    remove roundoff skew.
    """
    m = flux_weighted_matrix(band.matrices[k_index], band.grid)
    a = m.conj().T @ m
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class Maximizer:
    k_index: int
    k_value: float
    levels: tuple[int, ...]      # eigenvalue indices attaining the maximum
    curvature: float | None      # b in M - b (k - k0)^p, None if undetermined
    order: int | None            # p, None if undetermined
    band_edge: bool


@dataclass
class SpectralCurve:
    """Eigenvalue curves lambda_l(k), sorted descending per k, plus maximizers.

    ``eigenvectors[i]`` holds the flux-weighted eigenvectors as columns;
    divide by ``sqrt_weights`` to return to amplitude space.  Sorted
    order keeps lambda_l >= lambda_{l+1} everywhere; crossings detected
    by eigenvector overlap are listed in ``crossings`` (sorted order is
    the fallback when a crossing is too degenerate to track).
    """

    band: object
    grid: object
    k_values: np.ndarray
    eigenvalues: np.ndarray      # (n_k, n) descending
    eigenvectors: np.ndarray     # (n_k, n, n)
    sqrt_weights: np.ndarray     # (n_prop,)
    max_value: float
    maximizers: list[Maximizer] = dataclass_field(default_factory=list)
    crossings: list[int] = dataclass_field(default_factory=list)
    degenerate_crossings: list[int] = dataclass_field(default_factory=list)


def _detect_crossings(vecs: np.ndarray) -> tuple[list[int], list[int]]:
    crossings, degenerate = [], []
    for i in range(vecs.shape[0] - 1):
        overlap = np.abs(vecs[i].conj().T @ vecs[i + 1])
        rows, cols = linear_sum_assignment(-overlap)
        if np.any(cols != rows):
            crossings.append(i)
        if np.any(overlap[rows, cols] < 0.7):
            degenerate.append(i)
    return crossings, degenerate


def estimate_peak_order(curve: SpectralCurve, k_index: int,
                        window: float | None = None) -> tuple[float, int]:
    """Fit (curvature, order) of the top curve near a maximizer.

    Least squares of log(M - lambda) against log|k - k_j| over a
    shrinking window, keeping points where the drop below M is resolved
    but still local (between 1e-13 M and 0.75 M).  Interior maxima round
    the exponent to the nearest positive even integer (odd orders cannot
    be smooth interior maxima); band-edge maxima use the one-sided
    points and admit any positive integer.  Raises OrderUndeterminedError
    when the curve is flat within tolerance around k_j.
    """
    k = curve.k_values
    lam = curve.eigenvalues[:, 0]
    m_val = curve.max_value
    k_j = k[k_index]
    band_edge = k_index in (0, k.size - 1)
    floor = max(m_val, 1.0) * 1e-13
    drop = m_val - lam
    dist = np.abs(k - k_j)
    usable = (dist > 0) & (drop > floor) & (drop <= 0.75 * m_val)
    if not np.any(usable):
        raise OrderUndeterminedError(
            f"top curve is flat around k = {k_j:.6g} within tolerance")

    if window is None:
        window = dist[usable].max()
    min_points = 3 if band_edge else 4

    def fit(w):
        sel = usable & (dist <= w)
        if np.count_nonzero(sel) < min_points:
            return None
        x = np.log(dist[sel])
        y = np.log(drop[sel])
        p_hat, logb = np.polyfit(x, y, 1)
        return p_hat, logb, sel

    result = fit(window)
    if result is None:
        raise OrderUndeterminedError(
            f"not enough resolved samples around k = {k_j:.6g}")
    w = window
    while True:
        shrunk = fit(w / 2)
        if shrunk is None:
            break
        if abs(shrunk[0] - result[0]) < 0.05:
            result = shrunk
            break
        result = shrunk
        w /= 2

    p_hat, _, sel = result
    if band_edge:
        p = max(1, int(round(p_hat)))
    else:
        p = max(2, 2 * int(round(p_hat / 2)))
    b = float(np.exp(np.mean(np.log(drop[sel]) - p * np.log(dist[sel]))))
    return b, p


def eigenvalue_curves(band: ScatteringBand, peak_rel_tol: float = 1e-9,
                      merge_steps: int = 2,
                      order_window: float | None = None) -> SpectralCurve:
    """Full eigendecomposition per frequency plus maximizer analysis.

    Local maxima of the top curve within ``peak_rel_tol`` of the global
    maximum become maximizers; groups closer than ``merge_steps`` grid
    steps are merged.  Order fits that fail (flat plateaus) leave the
    maximizer with order None rather than aborting the analysis.
    """
    n_k = band.band.n_k
    n = band.grid.n_prop
    eigenvalues = np.empty((n_k, n))
    eigenvectors = np.empty((n_k, n, n), dtype=complex)
    for i in range(n_k):
        vals, vecs = np.linalg.eigh(gram_matrix(band, i))
        order = np.argsort(vals)[::-1]
        eigenvalues[i] = vals[order]
        eigenvectors[i] = vecs[:, order]
    crossings, degenerate = _detect_crossings(eigenvectors)

    sqrt_d = np.sqrt(band.grid.prop_weights * band.grid.prop_eta3)
    curve = SpectralCurve(
        band=band.band, grid=band.grid,
        k_values=np.asarray(band.band.k_values),
        eigenvalues=eigenvalues, eigenvectors=eigenvectors,
        sqrt_weights=sqrt_d,
        max_value=float(eigenvalues[:, 0].max()),
        crossings=crossings, degenerate_crossings=degenerate)

    m_val = curve.max_value
    if m_val <= 0.0:
        return curve

    top = eigenvalues[:, 0]
    near = top >= m_val * (1.0 - peak_rel_tol)
    local = np.ones(n_k, dtype=bool)
    local[1:] &= top[1:] >= top[:-1] - m_val * peak_rel_tol
    local[:-1] &= top[:-1] >= top[1:] - m_val * peak_rel_tol
    candidates = np.flatnonzero(near & local)
    groups: list[list[int]] = []
    for idx in candidates:
        if groups and idx - groups[-1][-1] <= merge_steps:
            groups[-1].append(idx)
        else:
            groups.append([idx])

    for group in groups:
        best = int(group[int(np.argmax(top[group]))])
        levels = tuple(int(l) for l in np.flatnonzero(
            eigenvalues[best] >= m_val * (1.0 - peak_rel_tol)))
        try:
            b, p = estimate_peak_order(curve, best, window=order_window)
        except OrderUndeterminedError:
            b, p = None, None
        curve.maximizers.append(Maximizer(
            k_index=best, k_value=float(curve.k_values[best]),
            levels=levels, curvature=b, order=p,
            band_edge=best in (0, n_k - 1)))
    return curve


def decay_constant(p: int) -> float:
    """C(p) in the asymptote C(p) / (b n)^(1/p): the gamma value Gamma(1 + 1/p)."""
    return math.gamma(1.0 + 1.0 / p)


def peak_weights(maximizers: list[Maximizer]) -> tuple[list[Maximizer], np.ndarray]:
    """Relative weights of competing maximizers in the iteration limit.

    Only maximizers of maximal order survive (slower decay wins); their
    weights are k_j C(p_j) / b_j^(1/p_j), fixed only up to a common
    factor and normalized here to unit absolute sum.  Maximizers whose
    order could not be determined are weighted equally among themselves
    when no determined order exists.
    """
    if not maximizers:
        raise ValueError("no maximizers to weight")
    orders = [m.order for m in maximizers]
    if all(o is None for o in orders):
        kept = list(maximizers)
        beta = np.ones(len(kept))
    else:
        p_max = max(o for o in orders if o is not None)
        kept = [m for m in maximizers if m.order == p_max]
        beta = np.array([m.k_value * decay_constant(m.order)
                         / m.curvature ** (1.0 / m.order) for m in kept])
    return kept, beta / np.sum(np.abs(beta))


def power_decay_integral(n: float, p: int, b: float = 1.0, h: float = 1.0) -> float:
    """Quadrature of int_0^h (1 - b k^p)^n dk.

    Requires b > 0, positive integer p, and b h^p <= 1 so the integrand
    stays in [0, 1].
    """
    if b <= 0 or h <= 0 or p < 1:
        raise ValueError("need b > 0, h > 0 and integer p >= 1")
    s_max = b ** (1.0 / p) * h
    if s_max > 1.0 + 1e-12:
        raise ValueError("b h^p must not exceed 1")
    s_max = min(s_max, 1.0)
    scale = min((1.0 / max(n, 1.0)) ** (1.0 / p), s_max)

    def integrand(s):
        return (1.0 - s**p) ** n

    val, _ = quad(integrand, 0.0, s_max, epsabs=1e-15, epsrel=1e-13,
                  limit=200, points=[scale] if scale < s_max else None)
    return float(val * b ** (-1.0 / p))


def power_decay_asymptote(n: float, p: int, b: float = 1.0) -> float:
    """Large-n asymptote C(p) / (b n)^(1/p) with C(p) = Gamma(1 + 1/p)."""
    return decay_constant(p) / (b * n) ** (1.0 / p)


def power_decay_product(n: int, p: int) -> float:
    """Exact product form of int_0^1 (1 - s^p)^n ds, for cross-checking."""
    j = np.arange(1, n + 1, dtype=float)
    return float(np.exp(-np.sum(np.log1p(1.0 / (j * p)))))


def predict_limit(curve: SpectralCurve, u0: AngularField,
                  psi: TestFunction) -> AngularField:
    """Predicted iteration limit: maximizer columns of u0's top-eigenspace part.

    The limit is supported on the maximizer frequencies; each column is
    the projection of u0 onto the eigenspace attaining the maximum,
    weighted by the peak weights, and the whole field is normalized so
    its pairing with the test function equals one (matching the
    normalization used by the iteration).  Raises DegeneratePairingError
    when u0 has no overlap with the top eigenspace or the test-function
    pairing vanishes.
    """
    if not curve.maximizers:
        raise ValueError("spectral curve has no maximizers (zero backend?)")
    kept, beta = peak_weights(curve.maximizers)
    n = curve.sqrt_weights.size
    amps = np.zeros_like(u0.amplitudes)
    for m, b_j in zip(kept, beta):
        u_col = u0.amplitudes[:n, m.k_index]
        u_w = curve.sqrt_weights * u_col
        vecs = curve.eigenvectors[m.k_index][:, list(m.levels)]
        proj_w = vecs @ (vecs.conj().T @ u_w)
        amps[:n, m.k_index] += b_j * (proj_w / curve.sqrt_weights)
    raw = u0.with_amplitudes(amps, "down")
    scale = np.max(np.abs(amps))
    if scale == 0.0:
        raise DegeneratePairingError(
            "start field has no component in the top eigenspace")
    denom = flux_inner(raw, psi.field)
    ref = np.max(np.abs(psi.field.amplitudes))
    if abs(denom) <= 1e-13 * scale * max(ref, 1.0):
        raise DegeneratePairingError(
            "test-function pairing vanishes for the predicted limit")
    return raw.with_amplitudes(amps / denom)


def save_curve_csv(curve: SpectralCurve, path, n_curves: int | None = None) -> None:
    """Columnar export (k, lambda_0, lambda_1, ...) for plotting."""
    n = curve.eigenvalues.shape[1] if n_curves is None else min(
        n_curves, curve.eigenvalues.shape[1])
    rows = np.column_stack([curve.k_values, curve.eigenvalues[:, :n]])
    header = "k," + ",".join(f"lambda_{l}" for l in range(n))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header,
               comments="")


def maximizer_report(curve: SpectralCurve) -> dict:
    kept, beta = (([], np.array([])) if not curve.maximizers
                  else peak_weights(curve.maximizers))
    beta_by_index = {m.k_index: float(b) for m, b in zip(kept, beta)}
    return {
        "max_value": curve.max_value,
        "maximizers": [
            {"k": m.k_value, "k_index": m.k_index, "levels": list(m.levels),
             "curvature": m.curvature, "order": m.order,
             "band_edge": m.band_edge,
             "weight": beta_by_index.get(m.k_index)}
            for m in curve.maximizers],
        "crossings": list(map(int, curve.crossings)),
        "degenerate_crossings": list(map(int, curve.degenerate_crossings)),
    }


def save_maximizer_report(curve: SpectralCurve, path, config_hash: str = "") -> None:
    doc = maximizer_report(curve)
    doc["config_hash"] = config_hash
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
