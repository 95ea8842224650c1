"""Reflection coefficients for depth-only media.

The closed-form oracle for a single interface comes from the two-equation
continuity system: with vertical wavenumbers q0 (top) and q1 (bottom),
matching u and du/dx3 for (incident + reflected) against transmitted
gives 1 + R = T and q0 (1 - R) = q1 T, hence R = (q0 - q1) / (q0 + q1);
at normal incidence q_j = k c0 / c_j, so R = (c1 - c0) / (c1 + c0).

The independent multilayer oracle solves the full dense continuity system
(two equations per interface, one unknown pair per layer) directly.
"""

import numpy as np
import pytest

from wavetuner import (LayeredProfile, build_reflection_table,
                       distinguishability_1d, flux, random_field,
                       reflection_coefficient, scatter_1d, uniform_band,
                       zero_field)
from wavetuner.angular import build_direction_grid
from wavetuner.errors import GrazingNodeError, GridMismatchError
from wavetuner.solver_1d import _vertical_wavenumbers, save_reflection_csv


def dense_continuity_reflection(profile: LayeredProfile, k: float, eta) -> complex:
    """Solve the full interface continuity system as an independent oracle.

    Unknowns: [R, a_1, b_1, ..., a_N, b_N, T], with a_m / b_m the down /
    up amplitudes of layer m referenced at its top interface and T the
    transmitted amplitude referenced at the bottom interface.
    """
    s2 = np.array([eta[0] ** 2 + eta[1] ** 2])
    q = _vertical_wavenumbers(profile, k, s2)[:, 0]
    d = profile.thicknesses
    n_media = q.size
    n_layers = n_media - 2
    z = np.concatenate([[0.0], -np.cumsum(d)])  # interface depths

    def terms(medium: int, x3: float):
        """(unknown index | None for the incident wave, coefficient, d/dx3 factor)."""
        if medium == 0:
            return [(None, np.exp(-1j * q[0] * x3), -1j * q[0]),
                    (0, np.exp(+1j * q[0] * x3), +1j * q[0])]
        if medium == n_media - 1:
            zref = z[-1]
            return [(1 + 2 * n_layers,
                     np.exp(-1j * q[-1] * (x3 - zref)), -1j * q[-1])]
        zref = z[medium - 1]
        ia = 1 + 2 * (medium - 1)
        return [(ia, np.exp(-1j * q[medium] * (x3 - zref)), -1j * q[medium]),
                (ia + 1, np.exp(+1j * q[medium] * (x3 - zref)), +1j * q[medium])]

    n_unknowns = 2 + 2 * n_layers
    a = np.zeros((n_unknowns, n_unknowns), dtype=complex)
    rhs = np.zeros(n_unknowns, dtype=complex)
    row = 0
    for j in range(n_media - 1):
        x3 = z[j]
        for deriv in (False, True):
            for medium, sign in ((j, +1.0), (j + 1, -1.0)):
                for idx, coeff, dfac in terms(medium, x3):
                    val = coeff * (dfac if deriv else 1.0)
                    if idx is None:
                        rhs[row] -= sign * val
                    else:
                        a[row, idx] += sign * val
            row += 1
    sol = np.linalg.solve(a, rhs)
    return complex(sol[0])


class TestReflectionCoefficient:
    def test_free_space_reflects_nothing(self, rng):
        prof = LayeredProfile(layers=((0.4, 1.0), (0.2, 1.0)), bottom_speed=1.0)
        pts = rng.uniform(-0.6, 0.6, (10, 2))
        assert np.allclose(reflection_coefficient(prof, 2.0, pts), 0.0,
                           atol=1e-14)

    def test_single_interface_normal_incidence(self):
        prof = LayeredProfile(layers=(), bottom_speed=2.0, top_speed=1.0)
        r = reflection_coefficient(prof, 3.0, (0.0, 0.0))
        assert r == pytest.approx((2.0 - 1.0) / (2.0 + 1.0), abs=1e-14)

    def test_grazing_limit_is_minus_one(self):
        prof = LayeredProfile(layers=(), bottom_speed=2.0)
        errs = [abs(reflection_coefficient(prof, 2.0, (1.0 - m, 0.0)) + 1.0)
                for m in (1e-2, 1e-3, 1e-4, 1e-5)]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 0.02

    def test_matches_dense_continuity_oracle(self, rng):
        for _ in range(12):
            n_layers = rng.integers(0, 4)
            prof = LayeredProfile(
                layers=tuple((rng.uniform(0.1, 0.8), rng.uniform(0.5, 2.5))
                             for _ in range(n_layers)),
                bottom_speed=rng.uniform(0.5, 2.5))
            k = rng.uniform(0.5, 6.0)
            eta = rng.uniform(-0.65, 0.65, 2)
            got = reflection_coefficient(prof, k, eta)
            want = dense_continuity_reflection(prof, k, eta)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_magnitude_bounded_for_lossless(self, rng):
        for _ in range(20):
            prof = LayeredProfile(
                layers=tuple((rng.uniform(0.05, 1.0), rng.uniform(0.4, 3.0))
                             for _ in range(rng.integers(0, 5))),
                bottom_speed=rng.uniform(0.4, 3.0))
            pts = rng.uniform(-0.68, 0.68, (20, 2))
            r = reflection_coefficient(prof, rng.uniform(0.5, 6.0), pts)
            assert np.all(np.abs(r) <= 1 + 1e-10)

    def test_continuity_in_k_under_refinement(self):
        prof = LayeredProfile(layers=((0.5, 1.8), (0.3, 0.7)), bottom_speed=2.0)
        eta = (0.45, 0.2)

        def max_jump(n_k):
            ks = np.linspace(0.5, 6.0, n_k)
            r = np.array([reflection_coefficient(prof, k, eta) for k in ks])
            return np.max(np.abs(np.diff(r)))

        coarse, fine = max_jump(200), max_jump(400)
        assert fine < 0.8 * coarse

    def test_grazing_incidence_rejected(self):
        prof = LayeredProfile(layers=(), bottom_speed=2.0)
        with pytest.raises(GrazingNodeError):
            reflection_coefficient(prof, 1.0, (1.0, 0.0))


class TestScatter1D:
    @pytest.fixture
    def table(self, band, grid):
        prof = LayeredProfile(layers=((0.5, 1.8),), bottom_speed=0.6)
        return build_reflection_table(prof, band, grid)

    def test_free_space_table_gives_zero_upgoing(self, band, grid, rng):
        prof = LayeredProfile(layers=(), bottom_speed=1.0)
        table = build_reflection_table(prof, band, grid)
        up = scatter_1d(table, random_field(band, grid, rng))
        assert not np.any(up.amplitudes)
        assert up.orientation == "up"

    def test_single_mode_picks_up_reflection_value(self, table, band, grid):
        amps = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
        amps[4, 2] = 1.0
        up = scatter_1d(table, zero_field(band, grid).with_amplitudes(amps))
        assert up.amplitudes[4, 2] == table.r[4, 2]
        assert np.count_nonzero(up.amplitudes) == 1

    def test_linearity(self, table, band, grid, rng):
        u = random_field(band, grid, rng)
        v = random_field(band, grid, rng)
        lin = scatter_1d(table, u.with_amplitudes(2.0 * u.amplitudes
                                                  - 0.5j * v.amplitudes))
        parts = 2.0 * scatter_1d(table, u).amplitudes \
            - 0.5j * scatter_1d(table, v).amplitudes
        assert np.allclose(lin.amplitudes, parts, rtol=1e-12, atol=1e-14)

    def test_energy_conservation_random_fields(self, table, band, grid, rng):
        for _ in range(20):
            f = random_field(band, grid, rng)
            assert flux(scatter_1d(table, f)) <= flux(f) * (1 + 1e-10)

    def test_grid_mismatch_rejected(self, table, band, rng):
        other = build_direction_grid(5, 8, margin=0.02)
        with pytest.raises(GridMismatchError):
            scatter_1d(table, random_field(band, other, rng))


class TestDistinguishability1D:
    def test_free_space_degenerate(self, band, grid):
        prof = LayeredProfile(layers=(), bottom_speed=1.0)
        table = build_reflection_table(prof, band, grid)
        result = distinguishability_1d(table)
        assert result.delta == 0.0
        assert result.degenerate

    def test_grazing_maximum_when_included(self):
        # a slow bottom has no total reflection plateau, so |R| increases
        # strictly toward grazing and the argmax sits at the outermost node;
        # delta climbs toward 1 as the margin shrinks
        prof = LayeredProfile(layers=(), bottom_speed=0.5)
        deltas = []
        for margin in (0.05, 0.01, 0.002):
            grid = build_direction_grid(6, 8, margin=margin)
            table = build_reflection_table(prof, uniform_band(6.0, 8), grid)
            result = distinguishability_1d(table)
            rho_star = np.hypot(*result.eta_star)
            assert rho_star == pytest.approx(grid.rho[: grid.n_prop].max())
            deltas.append(result.delta)
        assert deltas[0] < deltas[1] < deltas[2]
        assert deltas[-1] > 0.5

    def test_total_reflection_plateau_attains_one(self):
        # a fast bottom reflects totally beyond the critical angle; the grid
        # maximum hits the plateau value 1 and grazing nodes are among the ties
        prof = LayeredProfile(layers=(), bottom_speed=2.0)
        grid = build_direction_grid(6, 8, margin=0.002)
        table = build_reflection_table(prof, uniform_band(6.0, 8), grid)
        result = distinguishability_1d(table)
        assert result.delta == pytest.approx(1.0, abs=1e-12)
        outer = np.argmax(table.grid.rho[: table.grid.n_prop])
        assert np.abs(table.r[outer, 0]) ** 2 == pytest.approx(result.delta,
                                                               abs=1e-12)

    def test_exclusion_window_and_dense_grid_oracle(self, band):
        prof = LayeredProfile(layers=((0.4, 1.6),), bottom_speed=0.55)
        grid = build_direction_grid(6, 8, margin=0.02)
        table = build_reflection_table(prof, band, grid)
        res = distinguishability_1d(table, exclude_above=0.98)
        rho = table.grid.rho[: table.grid.n_prop]
        mask = rho[:, None] <= 0.98
        brute = np.max(np.where(mask, np.abs(table.r) ** 2, -np.inf))
        assert res.delta == pytest.approx(brute, rel=1e-14)
        # a 10x denser direction grid cannot fall below the coarse maximum
        dense = build_direction_grid(60, 16, margin=0.02)
        table10 = build_reflection_table(prof, band, dense)
        res10 = distinguishability_1d(table10, exclude_above=0.98)
        assert res10.delta >= res.delta - 1e-12
        assert res10.delta - res.delta < 0.05 * max(res10.delta, 1e-30)

    def test_export_csv(self, band, grid, tmp_path):
        prof = LayeredProfile(layers=(), bottom_speed=2.0)
        table = build_reflection_table(prof, band, grid)
        path = tmp_path / "table.csv"
        save_reflection_csv(table, path)
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        assert rows.shape == (grid.n_prop * band.n_k, 5)
        r_back = (rows[:, 3] + 1j * rows[:, 4]).reshape(grid.n_prop, band.n_k)
        assert np.allclose(r_back, table.r, rtol=0, atol=1e-15)
