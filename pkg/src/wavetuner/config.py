"""Experiment configuration: a single JSON document drives every run.

The schema (documented in the README) nests band, grid, medium,
reference, algorithm, and solver sections.  A seeded run is fully
deterministic, and every output file carries the hash of the canonical
configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .angular import (DirectionGrid, FrequencyBand, build_direction_grid,
                      constant_test_function, uniform_band)
from .backends import ZeroBackend, planted_backend, table_to_band
from .errors import MediumValidationError
from .media import LayeredProfile, VoxelScatterer, load_contrast_array, validate
from .solver_1d import build_reflection_table
from .solver_3d import assemble_band, load_band, save_band


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "band": {"band_limit": 6.0, "n_k": 24, "c0": 1.0},
    "grid": {"n_radial": 5, "n_angular": 8, "margin": 0.02, "annulus": None},
    "medium": {"kind": "free"},
    "reference": None,
    "algorithm": {"n_max": 200, "tol": 1e-6, "psi": "constant",
                  "window_halfwidth": None, "normalize_every": False},
    "solver": {"tol": 1e-8, "max_iter": 500, "born_only": False},
    "seed": 0,
    "workers": 1,
}


def _merged(section: str, cfg: dict) -> dict:
    base = dict(_DEFAULTS[section]) if isinstance(_DEFAULTS[section], dict) else {}
    user = cfg.get(section) or {}
    if not isinstance(user, dict):
        raise ConfigError(f"section '{section}' must be an object")
    unknown = set(user) - set(base) if base else set()
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    base.update(user)
    return base


@dataclass
class ExperimentConfig:
    raw: dict
    base_dir: Path

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", _DEFAULTS["seed"]))

    @property
    def workers(self) -> int:
        return int(self.raw.get("workers", _DEFAULTS["workers"]))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    known = {"band", "grid", "medium", "reference", "algorithm", "solver",
             "seed", "workers", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    return ExperimentConfig(raw=raw, base_dir=path.parent)


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def build_band(cfg: ExperimentConfig) -> FrequencyBand:
    sec = _merged("band", cfg.raw)
    return uniform_band(float(sec["band_limit"]), int(sec["n_k"]),
                        float(sec["c0"]))


def build_grid(cfg: ExperimentConfig) -> DirectionGrid:
    sec = _merged("grid", cfg.raw)
    annulus = sec["annulus"]
    if annulus is not None:
        annulus = (int(annulus["n_radial"]), float(annulus["eta_max"]))
    return build_direction_grid(int(sec["n_radial"]), int(sec["n_angular"]),
                                float(sec["margin"]), annulus)


def build_medium(cfg: ExperimentConfig, section: str = "medium"):
    sec = cfg.raw.get(section) or _DEFAULTS["medium"]
    if sec is None:
        return None
    kind = sec.get("kind")
    if kind == "free":
        return "free"
    if kind == "layered":
        profile = LayeredProfile(
            layers=tuple(tuple(l) for l in sec.get("layers", [])),
            bottom_speed=float(sec["bottom_speed"]),
            top_speed=float(sec.get("top_speed", 1.0)))
        return validate(profile)
    if kind == "voxel":
        dims = tuple(int(n) for n in sec["dims"])
        contrast_spec = sec["contrast"]
        if contrast_spec.get("kind") == "file":
            p = Path(contrast_spec["path"])
            if not p.is_absolute():
                p = cfg.base_dir / p
            if not p.exists():
                raise ConfigError(f"contrast file does not exist: {p}")
            contrast = load_contrast_array(p, dims) * float(
                contrast_spec.get("scale", 1.0))
        elif contrast_spec.get("kind") == "gaussian":
            contrast = _gaussian_blob(dims, float(contrast_spec["amplitude"]),
                                      float(contrast_spec.get("sigma_voxels", 3.0)),
                                      contrast_spec.get("center"))
        elif contrast_spec.get("kind") == "random":
            rng = np.random.default_rng(int(contrast_spec.get("seed", cfg.seed)))
            contrast = _random_blob(dims, float(contrast_spec["amplitude"]), rng)
        else:
            raise ConfigError(f"unknown contrast kind {contrast_spec.get('kind')!r}")
        scatterer = VoxelScatterer(spacing=float(sec["spacing"]), dims=dims,
                                   origin_depth=float(sec["origin_depth"]),
                                   contrast=contrast,
                                   c0=float(sec.get("c0", 1.0)))
        return validate(scatterer)
    if kind == "synthetic":
        return dict(sec)
    raise ConfigError(f"unknown medium kind {kind!r}")


def _gaussian_blob(dims, amplitude, sigma_voxels, center=None):
    grids = np.meshgrid(*[np.arange(n, dtype=float) for n in dims], indexing="ij")
    if center is None:
        center = [(n - 1) / 2 for n in dims]
    r2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    return amplitude * np.exp(-r2 / (2 * sigma_voxels**2))


def _random_blob(dims, amplitude, rng):
    v = rng.standard_normal(dims)
    # keep the support compact and the amplitude bounded
    window = _gaussian_blob(dims, 1.0, min(dims) / 4)
    v = v * window
    return amplitude * v / np.max(np.abs(v))


def build_backend(cfg: ExperimentConfig, band: FrequencyBand,
                  grid: DirectionGrid, section: str = "medium",
                  cache_dir: Path | None = None):
    """Backend for the configured medium; 3D assemblies are cached by hash."""
    medium = build_medium(cfg, section)
    if medium is None or medium == "free":
        return ZeroBackend()
    if isinstance(medium, LayeredProfile):
        return build_reflection_table(medium, band, grid)
    if isinstance(medium, VoxelScatterer):
        solver = _merged("solver", cfg.raw)
        key = hashlib.sha256(json.dumps(
            [cfg.raw.get(section), cfg.raw.get("band"), cfg.raw.get("grid"),
             solver], sort_keys=True, default=str).encode()).hexdigest()[:16]
        if cache_dir is not None:
            cached = Path(cache_dir) / f"band_{key}.npz"
            if cached.exists():
                return load_band(cached)
        result = assemble_band(medium, band, grid,
                               tol=float(solver["tol"]),
                               max_iter=int(solver["max_iter"]),
                               born_only=bool(solver["born_only"]),
                               workers=cfg.workers)
        if cache_dir is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            save_band(result, Path(cache_dir) / f"band_{key}.npz",
                      config_hash=key)
        return result
    if isinstance(medium, dict):  # synthetic
        peaks = [(float(p["k0"]), float(p["height"]), float(p["curvature"]),
                  int(p.get("order", 2))) for p in medium.get("peaks", [])]
        if not peaks:
            raise ConfigError("synthetic medium needs at least one peak")
        return planted_backend(band, grid, peaks,
                               width=float(medium.get("width", 0.45)))
    raise ConfigError(f"cannot build a backend for {type(medium).__name__}")


def build_test_function(cfg: ExperimentConfig, band, grid):
    sec = _merged("algorithm", cfg.raw)
    if sec["psi"] != "constant":
        raise ConfigError("only the 'constant' test function is configurable")
    return constant_test_function(band, grid)
