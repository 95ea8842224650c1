"""Time-integrated energy flux through the plane and the flux inner product.

For a field with amplitudes B(k, eta') the flux through x3 = 0 is the
weighted quadrature

    W = (2 pi)^3 * 2 * sum_k dk sum_prop w |B|^2 c0^2 k^4 eta3,

taken over propagating nodes only (evanescent components carry no
time-integrated flux) and doubled for the implied negative-k half.  The
same weight defines the flux inner product, whose diagonal recovers W.
Downgoing flux is positive; upgoing flux is reported as a magnitude.

A separate norm with weight |eta3| over *all* nodes (including the
evanescent annulus) is provided for diagnostics; the iteration itself
uses only the propagating flux inner product.
"""

from __future__ import annotations

import numpy as np

from .angular import AngularField, check_same_support

PREFACTOR = (2.0 * np.pi) ** 3


def _flux_row_weights(field: AngularField) -> np.ndarray:
    g = field.grid
    return g.prop_weights * g.prop_eta3


def column_flux(field: AngularField) -> np.ndarray:
    """Per-wavenumber flux contributions; sums to flux(field)."""
    b = field.band
    a = field.amplitudes[: field.grid.n_prop, :]
    row = _flux_row_weights(field)
    col = row @ (np.abs(a) ** 2)
    return PREFACTOR * 2.0 * b.c0**2 * b.k_values**4 * b.dk_weights * col


def flux(field: AngularField) -> float:
    """Time-integrated energy flux magnitude of the field."""
    return float(np.sum(column_flux(field)))


def flux_inner(u: AngularField, v: AngularField) -> float:
    """Flux inner product over propagating components.

    Real by construction (the negative-k half contributes the conjugate);
    flux_inner(f, f) == flux(f).
    """
    check_same_support(u, v)
    b = u.band
    n = u.grid.n_prop
    row = _flux_row_weights(u)
    pair = np.real(u.amplitudes[:n, :] * np.conj(v.amplitudes[:n, :]))
    col = row @ pair
    return float(np.sum(PREFACTOR * 2.0 * b.c0**2 * b.k_values**4
                        * b.dk_weights * col))


def w_inner(u: AngularField, v: AngularField) -> float:
    """Finite-energy pairing with weight |eta3| over all nodes (annulus included)."""
    check_same_support(u, v)
    b = u.band
    row = u.grid.weights * np.abs(u.grid.eta3_pos)
    pair = np.real(u.amplitudes * np.conj(v.amplitudes))
    col = row @ pair
    return float(np.sum(PREFACTOR * 2.0 * b.c0**2 * b.k_values**4
                        * b.dk_weights * col))


def w_norm_sq(field: AngularField) -> float:
    return w_inner(field, field)


def annulus_share(field: AngularField) -> float:
    """Fraction of the |eta3|-weighted norm carried by the evanescent annulus."""
    total = w_norm_sq(field)
    if total == 0.0:
        return 0.0
    b = field.band
    g = field.grid
    row = g.weights[g.n_prop:] * np.abs(g.eta3_pos[g.n_prop:])
    pair = np.abs(field.amplitudes[g.n_prop:, :]) ** 2
    evan = np.sum(PREFACTOR * 2.0 * b.c0**2 * b.k_values**4
                  * b.dk_weights * (row @ pair))
    return float(evan / total)
