"""Adaptive search for the incident field with maximal scattered flux.

The algorithm sends a downgoing field, measures the upgoing response,
subtracts the reference response, time-reverses the difference and sends
it back, normalizing by a test-function pairing on every other pass:

    1. start from any downgoing field, j = 0;
    2. scatter: measure the upgoing response of iterate j;
    3. subtract the reference backend's response;
    4. if j is even, time-reverse the difference (after projecting out
       evanescent components) and continue;
    5. if j is odd, do the same and divide by the pairing with the test
       function, then continue.

Two passes make one application of the nonnegative self-adjoint
operator whose Rayleigh quotient

    |flux(scattered difference)| / flux(incident)

is the distinguishability achieved by the current iterate; the quotient
is nondecreasing and converges to the supremum over incident fields.
Pointwise field limits do not exist on a fixed grid (the continuum limit
is a distribution), so convergence is tracked through test-function
pairings and a spectral concentration diagnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .angular import (AngularField, TestFunction, project_propagating,
                      time_reverse)
from .backends import ScatteringBackendHandle, ZeroBackend
from .errors import DegeneratePairingError, DivergenceError, WavetunerError
from .flux import annulus_share, column_flux, flux, flux_inner


@dataclass
class IterationTrace:
    """Record of one run: normalized iterates and their diagnostics.

    ``rayleigh[n]`` is the quotient achieved by ``iterate n`` (index 0 is
    the start field); for physical backends against a zero reference it
    lies in [0, 1] and never decreases.  ``concentration[n]`` holds the
    flux-density argmax k* and the flux fraction within the window.
    """

    iterates: list[AngularField] = dataclass_field(default_factory=list)
    rayleigh: list[float] = dataclass_field(default_factory=list)
    concentration: list[tuple[float, float]] = dataclass_field(default_factory=list)
    pairings: list[float] = dataclass_field(default_factory=list)
    annulus_shares: list[float] = dataclass_field(default_factory=list)
    converged: bool = False
    n_applications: int = 0

    @property
    def final_field(self) -> AngularField:
        return self.iterates[-1]


def spectral_concentration(field: AngularField,
                           window_halfwidth: float) -> tuple[float, float]:
    """Flux-density peak frequency and the flux share within +- window of it."""
    col = column_flux(field)
    total = col.sum()
    k = field.band.k_values
    if total <= 0.0:
        return float(k[0]), 0.0
    density = col / field.band.dk_weights
    i_star = int(np.argmax(density))
    k_star = float(k[i_star])
    inside = np.abs(k - k_star) <= window_halfwidth
    return k_star, float(col[inside].sum() / total)


def _scatter_difference(backend, reference, field: AngularField) -> AngularField:
    up = backend.scatter(field)
    if reference is not None and not isinstance(reference, ZeroBackend):
        ref_up = reference.scatter(field)
        up = up.with_amplitudes(up.amplitudes - ref_up.amplitudes)
    return up


def _half_pass(backend, reference, field: AngularField) -> tuple[AngularField, AngularField]:
    """One scatter-project-reverse pass; returns (difference up, next down)."""
    diff = _scatter_difference(backend, reference, field)
    return diff, time_reverse(project_propagating(diff))


def apply_tr_operator(backend: ScatteringBackendHandle,
                      reference: ScatteringBackendHandle | None,
                      field: AngularField) -> AngularField:
    """One full double-pass application: scatter the difference, project,
    time-reverse, and repeat, in exactly that order.  Input and output
    are downgoing; backend failures propagate tagged with the pass index."""
    if field.orientation != "down":
        raise ValueError("the operator acts on downgoing fields")
    for pass_index in (1, 2):
        try:
            _, field = _half_pass(backend, reference, field)
        except WavetunerError as exc:
            raise type(exc)(f"scatter pass {pass_index}: {exc}") from exc
    return field


def iterate(backend: ScatteringBackendHandle, v0: AngularField,
            psi: TestFunction,
            reference: ScatteringBackendHandle | None = None,
            n_max: int = 200, tol: float = 1e-6,
            window_halfwidth: float | None = None,
            normalize_every: bool = False) -> IterationTrace:
    """Run the adaptive iteration from start field v0.

    Normalization follows the even/odd schedule above by default; with
    ``normalize_every`` each half pass is normalized instead (linearity
    makes the limits identical).  Terminates when successive Rayleigh
    quotients differ by less than ``tol`` (relative) or after ``n_max``
    double passes.  Raises DegeneratePairingError when the test-function
    pairing vanishes (restart with a perturbed start field) and
    DivergenceError on non-finite amplitudes.
    """
    if v0.orientation != "down":
        raise ValueError("the start field must be downgoing")
    if flux(v0) == 0.0:
        raise ValueError("the start field has no propagating flux")
    if window_halfwidth is None:
        k = v0.band.k_values
        window_halfwidth = 3.0 * (k[1] - k[0]) if k.size > 1 else float(k[0])

    psi_scale = np.max(np.abs(psi.field.amplitudes))

    def normalize(field: AngularField) -> tuple[AngularField, float]:
        pairing = flux_inner(field, psi.field)
        scale = np.max(np.abs(field.amplitudes))
        if abs(pairing) <= 1e-14 * scale * max(psi_scale, 1.0):
            raise DegeneratePairingError(
                "normalization pairing vanished; restart with a perturbed "
                "start field or another test function")
        return field.with_amplitudes(field.amplitudes / pairing), pairing

    trace = IterationTrace()
    u = v0
    for n in range(n_max):
        diff1, mid = _half_pass(backend, reference, u)
        quotient = flux(project_propagating(diff1)) / flux(project_propagating(u))
        trace.rayleigh.append(quotient)
        if quotient == 0.0:
            # nothing scatters back: the backends are indistinguishable
            trace.converged = True
            break
        if normalize_every:
            mid, _ = normalize(mid)
        _, nxt = _half_pass(backend, reference, mid)
        nxt, pairing = normalize(nxt)
        if not np.all(np.isfinite(nxt.amplitudes)):
            raise DivergenceError(f"non-finite amplitudes after application {n}")
        trace.pairings.append(pairing)
        trace.iterates.append(nxt)
        trace.concentration.append(spectral_concentration(nxt, window_halfwidth))
        trace.annulus_shares.append(annulus_share(nxt))
        trace.n_applications = n + 1
        u = nxt
        if len(trace.rayleigh) >= 2:
            prev, cur = trace.rayleigh[-2], trace.rayleigh[-1]
            if abs(cur - prev) <= tol * max(abs(cur), 1e-300):
                trace.converged = True
                break
    if trace.rayleigh and trace.rayleigh[-1] == 0.0 and not trace.iterates:
        trace.iterates.append(u)
        trace.concentration.append(spectral_concentration(u, window_halfwidth))
        trace.annulus_shares.append(annulus_share(u))
    return trace


def distinguishability_estimate(trace: IterationTrace) -> float:
    """Final Rayleigh quotient: a monotone lower bound on the supremum."""
    if not trace.rayleigh:
        raise ValueError("empty trace")
    return trace.rayleigh[-1]


def trace_report(trace: IterationTrace) -> dict:
    return {
        "n_applications": trace.n_applications,
        "converged": trace.converged,
        "rayleigh": [float(r) for r in trace.rayleigh],
        "k_star": [float(k) for k, _ in trace.concentration],
        "concentration": [float(f) for _, f in trace.concentration],
        "pairings": [float(p) for p in trace.pairings],
        "annulus_shares": [float(s) for s in trace.annulus_shares],
        "distinguishability": trace.rayleigh[-1] if trace.rayleigh else None,
    }


def save_trace_json(trace: IterationTrace, path, config_hash: str = "") -> None:
    doc = trace_report(trace)
    doc["config_hash"] = config_hash
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def save_iterate_spectra(trace: IterationTrace, directory) -> list[str]:
    """Per-iteration flux spectra as columnar files (k, flux)."""
    from pathlib import Path

    outdir = Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for n, it in enumerate(trace.iterates):
        rows = np.column_stack([it.band.k_values, column_flux(it)])
        path = outdir / f"iterate_{n:04d}.csv"
        np.savetxt(path, rows, fmt="%.17g", delimiter=",",
                   header="k,flux", comments="")
        written.append(str(path))
    return written
