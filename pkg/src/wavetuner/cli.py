"""Batch experiment runner.

Subcommands:

    probe-1d      reflection table and distinguishability report
    assemble-3d   assemble and archive per-frequency scattering matrices
    spectrum      eigenvalue curves and maximizer report
    iterate       run the adaptive iteration, emit trace and spectra
    lemma1        tabulate the peak-decay integral against its asymptote
    validate      run the invariant suite, print pass/fail per property

Every failure exits nonzero and writes a machine-readable error document
(error.json) into the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .angular import random_field, save_field_csv
from .backends import ZeroBackend, backend_to_band
from .config import (ConfigError, build_backend, build_band, build_grid,
                     build_test_function, config_hash, load_config)
from .errors import WavetunerError
from .flux import flux, flux_inner
from .solver_1d import ReflectionTable, distinguishability_1d, save_reflection_csv
from .solver_3d import ScatteringBand, hs_norm, save_band, weighted_operator_norm
from .spectral import (eigenvalue_curves, power_decay_asymptote,
                       power_decay_integral, save_curve_csv,
                       save_maximizer_report)
from .time_reversal import (distinguishability_estimate, iterate,
                            save_iterate_spectra, save_trace_json)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.raw["seed"] = args.seed
    if args.workers is not None:
        cfg.raw["workers"] = args.workers
    out = Path(args.out) if args.out else Path(cfg.raw.get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out, config_hash(cfg)


def cmd_probe_1d(args) -> int:
    cfg, out, chash = _prepare(args)
    band, grid = build_band(cfg), build_grid(cfg)
    backend = build_backend(cfg, band, grid)
    if not isinstance(backend, ReflectionTable):
        raise ConfigError("probe-1d needs a layered medium")
    save_reflection_csv(backend, out / "reflection_table.csv")
    full = distinguishability_1d(backend)
    excl = distinguishability_1d(backend, exclude_above=0.98)
    _write_json(out / "probe_1d.json", {
        "config_hash": chash,
        "delta_full_grid": full.delta,
        "argmax_full_grid": {"k": full.k_star, "eta": list(full.eta_star)},
        "delta_grazing_excluded": excl.delta,
        "argmax_grazing_excluded": {"k": excl.k_star, "eta": list(excl.eta_star)},
        "grazing_cutoff": 0.98,
        "degenerate": full.degenerate,
    })
    print(f"delta (full grid)        = {full.delta:.6g}")
    print(f"delta (grazing excluded) = {excl.delta:.6g}")
    return 0


def cmd_assemble_3d(args) -> int:
    cfg, out, chash = _prepare(args)
    band, grid = build_band(cfg), build_grid(cfg)
    backend = build_backend(cfg, band, grid, cache_dir=out / "cache")
    if not isinstance(backend, ScatteringBand):
        raise ConfigError("assemble-3d needs a voxel medium")
    save_band(backend, out / "scattering_band.npz", config_hash=chash)
    norms = [weighted_operator_norm(backend, i) for i in range(band.n_k)]
    hs = [hs_norm(backend, i) for i in range(band.n_k)]
    _write_json(out / "assemble_3d.json", {
        "config_hash": chash,
        "k_values": [float(k) for k in band.k_values],
        "weighted_operator_norms": norms,
        "hilbert_schmidt_norms": hs,
    })
    print(f"assembled {band.n_k} frequencies x {grid.n_prop} directions; "
          f"max weighted norm {max(norms):.6g}")
    return 0


def cmd_spectrum(args) -> int:
    cfg, out, chash = _prepare(args)
    band, grid = build_band(cfg), build_grid(cfg)
    backend = build_backend(cfg, band, grid, cache_dir=out / "cache")
    curve = eigenvalue_curves(backend_to_band(backend, band, grid))
    save_curve_csv(curve, out / "spectral_curve.csv")
    save_maximizer_report(curve, out / "maximizers.json", config_hash=chash)
    print(f"max eigenvalue {curve.max_value:.6g} with "
          f"{len(curve.maximizers)} maximizer(s)")
    return 0


def cmd_iterate(args) -> int:
    cfg, out, chash = _prepare(args)
    band, grid = build_band(cfg), build_grid(cfg)
    backend = build_backend(cfg, band, grid, cache_dir=out / "cache")
    reference = None
    if cfg.raw.get("reference") is not None:
        reference = build_backend(cfg, band, grid, section="reference",
                                  cache_dir=out / "cache")
    alg = {**{"n_max": 200, "tol": 1e-6, "window_halfwidth": None,
              "normalize_every": False}, **(cfg.raw.get("algorithm") or {})}
    rng = np.random.default_rng(cfg.seed)
    v0 = random_field(band, grid, rng)
    psi = build_test_function(cfg, band, grid)
    if isinstance(backend, ZeroBackend) and reference is None:
        print("free-space backend: nothing scatters, delta = 0")
        _write_json(out / "trace.json", {"config_hash": chash,
                                         "distinguishability": 0.0,
                                         "rayleigh": [0.0]})
        return 0
    trace = iterate(backend, v0, psi, reference=reference,
                    n_max=int(alg["n_max"]), tol=float(alg["tol"]),
                    window_halfwidth=alg["window_halfwidth"],
                    normalize_every=bool(alg["normalize_every"]))
    save_trace_json(trace, out / "trace.json", config_hash=chash)
    save_iterate_spectra(trace, out / "spectra")
    if trace.iterates:
        save_field_csv(trace.final_field, out / "final_field.csv")
    delta = distinguishability_estimate(trace)
    k_star = trace.concentration[-1][0] if trace.concentration else float("nan")
    print(f"delta estimate = {delta:.6g} after {trace.n_applications} "
          f"applications (k* = {k_star:.6g})")
    return 0


def cmd_lemma1(args) -> int:
    value = power_decay_integral(args.n, args.p, args.b, args.h)
    asym = power_decay_asymptote(args.n, args.p, args.b)
    print(f"I(n={args.n}, p={args.p}, b={args.b}, h={args.h}) = {value:.12g}")
    print(f"asymptote C(p)/(b n)^(1/p)      = {asym:.12g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ns = np.unique(np.geomspace(1, max(args.n, 2), 40).astype(int))
        rows = [(int(n), power_decay_integral(int(n), args.p, args.b, args.h),
                 power_decay_asymptote(int(n), args.p, args.b)) for n in ns]
        np.savetxt(out / "decay_integral.csv", np.array(rows),
                   fmt="%.17g", delimiter=",",
                   header="n,integral,asymptote", comments="")
    return 0


def _validation_checks(band, grid, backend, rng):
    """Yield (name, passed, detail) for each invariant."""
    from .angular import project_propagating, time_reverse, zero_field

    f = random_field(band, grid, rng)
    pf = project_propagating(f)
    yield ("projection idempotent",
           np.array_equal(project_propagating(pf).amplitudes, pf.amplitudes), "")

    tt = time_reverse(time_reverse(f))
    yield ("time reversal is an involution",
           np.array_equal(tt.amplitudes, f.amplitudes), "")

    iso = abs(flux(time_reverse(f)) - flux(f)) <= 1e-12 * max(flux(f), 1.0)
    yield ("time reversal preserves flux", iso, "")

    cs_ok = True
    for _ in range(20):
        a = random_field(band, grid, rng)
        b = random_field(band, grid, rng)
        if flux_inner(a, b) ** 2 > flux(a) * flux(b) * (1 + 1e-9):
            cs_ok = False
    yield ("flux Cauchy-Schwarz", cs_ok, "")

    up = backend.scatter(pf)
    conserve = flux(up) <= flux(pf) * (1 + 1e-8)
    yield ("energy conservation", conserve,
           f"(out {flux(up):.4g} vs in {flux(pf):.4g})")

    zero_up = backend.scatter(zero_field(band, grid))
    yield ("linear backend maps zero to zero",
           not np.any(zero_up.amplitudes), "")

    n1 = power_decay_integral(100, 1)
    yield ("decay integral closed form",
           abs(n1 - 1.0 / 101.0) < 1e-12, f"I(100,1) = {n1:.12g}")

    mono = all(power_decay_integral(n, 2) > power_decay_integral(4 * n, 2)
               for n in (10, 100))
    yield ("decay integral monotone in n", mono, "")


def cmd_validate(args) -> int:
    cfg, out, chash = _prepare(args)
    band, grid = build_band(cfg), build_grid(cfg)
    backend = build_backend(cfg, band, grid, cache_dir=out / "cache")
    psi = build_test_function(cfg, band, grid)
    rng = np.random.default_rng(cfg.seed)
    results = []
    for name, ok, detail in _validation_checks(band, grid, backend, rng):
        results.append({"check": name, "passed": bool(ok), "detail": detail})
        print(f"{'PASS' if ok else 'FAIL'}  {name} {detail}")

    delta = 0.0
    if isinstance(backend, ZeroBackend):
        results.append({"check": "free space delta", "passed": True, "detail": "0"})
        print("PASS  free space distinguishability = 0")
    else:
        rng2 = np.random.default_rng(cfg.seed + 1)
        trace = iterate(backend, random_field(band, grid, rng2), psi,
                        n_max=50, tol=1e-9)
        delta = distinguishability_estimate(trace)
        mono = all(b >= a - 1e-9 for a, b in zip(trace.rayleigh, trace.rayleigh[1:]))
        results.append({"check": "rayleigh monotone", "passed": bool(mono),
                        "detail": ""})
        print(f"{'PASS' if mono else 'FAIL'}  rayleigh monotone")
    print(f"delta = {delta:.6g}")
    _write_json(out / "validation.json",
                {"config_hash": chash, "results": results,
                 "delta": delta,
                 "all_passed": all(r["passed"] for r in results)})
    return 0 if all(r["passed"] for r in results) else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavetuner",
        description="Find incident waveforms that maximize scattered energy flux.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON config document")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override RNG seed")
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads for assembly")

    for name, fn in [("probe-1d", cmd_probe_1d), ("assemble-3d", cmd_assemble_3d),
                     ("spectrum", cmd_spectrum), ("iterate", cmd_iterate),
                     ("validate", cmd_validate)]:
        p = sub.add_parser(name)
        add_common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("lemma1", help="peak-decay integral table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lemma1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, WavetunerError, OSError, ValueError) as exc:
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        out = getattr(args, "out", None)
        if out:
            try:
                _write_json(Path(out) / "error.json", doc)
            except OSError:
                pass
        json.dump(doc, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # unexpected: keep the traceback visible
        traceback.print_exc()
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        json.dump(doc, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
