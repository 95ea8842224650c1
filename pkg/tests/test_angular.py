"""Angular-spectrum representation: directions, grids, fields, transforms."""

import numpy as np
import pytest

from wavetuner import (build_direction_grid, eta3, project_propagating,
                       random_field, synthesize_time_field, time_reverse,
                       uniform_band, zero_field)
from wavetuner.angular import (AngularField, load_field_csv, save_field_csv)
from wavetuner.errors import GrazingNodeError, GridMismatchError


class TestEta3:
    def test_normal_incidence(self):
        assert eta3(2.0, (0.0, 0.0)) == 1.0

    def test_three_four_five(self):
        assert eta3(1.0, (0.6, 0.0)) == pytest.approx(0.8)

    def test_evanescent_sign_of_k(self):
        val = eta3(1.0, (np.sqrt(2.0), 0.0))
        assert val == pytest.approx(1.0j)
        assert eta3(-1.0, (np.sqrt(2.0), 0.0)) == pytest.approx(-1.0j)

    def test_conjugate_symmetry_on_grid_nodes(self, grid_with_annulus):
        pts = grid_with_annulus.nodes
        plus = eta3(3.0, pts)
        minus = eta3(-3.0, pts)
        assert np.allclose(minus, np.conj(plus))

    def test_zero_k_rejected(self):
        with pytest.raises(ValueError):
            eta3(0.0, (0.3, 0.0))

    def test_grazing_rejected(self):
        with pytest.raises(GrazingNodeError):
            eta3(1.0, (1.0, 0.0))


class TestDirectionGrid:
    def test_quadrature_exactness(self):
        grid = build_direction_grid(6, 8, margin=0.02)
        assert grid.quadrature_error() < 1e-12

    def test_margin_respected(self, grid_with_annulus):
        g = grid_with_annulus
        rho = g.rho
        assert np.all(rho[: g.n_prop] <= 1 - g.margin)
        assert np.all(rho[g.n_prop:] >= 1 + g.margin)
        assert np.all(rho[g.n_prop:] <= g.eta_max)

    def test_weights_positive(self, grid_with_annulus):
        assert np.all(grid_with_annulus.weights > 0)

    def test_mirror_closure(self, grid_with_annulus):
        g = grid_with_annulus
        assert np.allclose(g.nodes[g.mirror], -g.nodes)
        assert np.array_equal(g.mirror[g.mirror], np.arange(g.n_nodes))

    def test_odd_angular_count_rejected(self):
        with pytest.raises(ValueError):
            build_direction_grid(4, 7)


class TestFrequencyBand:
    def test_rejects_zero_k(self):
        with pytest.raises(ValueError):
            uniform_band(6.0, 0)
        from wavetuner.angular import FrequencyBand
        with pytest.raises(ValueError):
            FrequencyBand(np.array([0.0, 1.0]), 2.0)

    def test_rejects_unsorted(self):
        from wavetuner.angular import FrequencyBand
        with pytest.raises(ValueError):
            FrequencyBand(np.array([2.0, 1.0]), 3.0)

    def test_trapezoid_weights_sum(self):
        band = uniform_band(6.0, 12)
        k = band.k_values
        assert band.dk_weights.sum() == pytest.approx(k[-1] - k[0])


class TestAngularField:
    def test_shape_and_finiteness_enforced(self, band, grid):
        with pytest.raises(ValueError):
            AngularField(band, grid, np.zeros((3, 3)))
        bad = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            AngularField(band, grid, bad)

    def test_amplitudes_read_only(self, band, grid, rng):
        f = random_field(band, grid, rng)
        with pytest.raises(ValueError):
            f.amplitudes[0, 0] = 1.0

    def test_csv_round_trip(self, band, grid, rng, tmp_path):
        f = random_field(band, grid, rng)
        path = tmp_path / "field.csv"
        save_field_csv(f, path)
        g = load_field_csv(band, grid, path)
        assert np.allclose(g.amplitudes, f.amplitudes, rtol=0, atol=1e-15)

    def test_csv_grid_mismatch_detected(self, band, grid, rng, tmp_path):
        f = random_field(band, grid, rng)
        path = tmp_path / "field.csv"
        save_field_csv(f, path)
        other = build_direction_grid(4, 8, margin=0.05)
        with pytest.raises(GridMismatchError):
            load_field_csv(band, other, path)


class TestSynthesize:
    def test_zero_field_synthesizes_to_zero(self, band, grid):
        u, residual = synthesize_time_field(zero_field(band, grid),
                                            np.linspace(0, 1, 5),
                                            [(0.0, 0.0), (1.0, 2.0)])
        assert not np.any(u)
        assert residual == 0.0

    def test_single_mode_is_cosine(self, band, grid):
        # One stored mode plus its implied conjugate partner synthesize to
        # 2 w cos(k eta'.x' - k c0 t) with w = (node weight) k^2 c0 dk,
        # from evaluating the two-term quadrature by hand.
        q, i = 5, 3
        amps = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
        amps[q, i] = 1.0
        f = AngularField(band, grid, amps, "down")
        k0 = band.k_values[i]
        w = grid.weights[q] * k0**2 * band.c0 * band.dk_weights[i]
        t = np.linspace(-2.0, 2.0, 7)
        xs = np.array([[0.0, 0.0], [0.7, -0.4], [2.0, 1.0]])
        u, residual = synthesize_time_field(f, t, xs)
        phase = k0 * (xs @ grid.nodes[q])[None, :] - k0 * band.c0 * t[:, None]
        assert np.allclose(u, 2 * w * np.cos(phase), rtol=1e-12)
        assert residual < 1e-10

    def test_reality_of_random_field(self, band, grid, rng):
        f = random_field(band, grid, rng)
        _, residual = synthesize_time_field(f, np.linspace(-1, 1, 9),
                                            rng.uniform(-2, 2, (6, 2)))
        assert residual < 1e-10


class TestProjection:
    def test_identity_without_annulus(self, band, grid, rng):
        f = random_field(band, grid, rng)
        assert project_propagating(f) is f

    def test_annulus_only_field_projects_to_zero(self, band, grid_with_annulus, rng):
        g = grid_with_annulus
        amps = np.zeros((g.n_nodes, band.n_k), dtype=complex)
        amps[g.n_prop:, :] = rng.standard_normal((g.n_evan, band.n_k))
        f = AngularField(band, g, amps, "down")
        assert not np.any(project_propagating(f).amplitudes)

    def test_idempotent_and_bit_identical(self, band, grid_with_annulus, rng):
        f = random_field(band, grid_with_annulus, rng, propagating_only=False)
        pf = project_propagating(f)
        ppf = project_propagating(pf)
        assert np.array_equal(pf.amplitudes, ppf.amplitudes)
        assert np.array_equal(pf.amplitudes[: f.grid.n_prop],
                              f.amplitudes[: f.grid.n_prop])


class TestTimeReverse:
    def test_involution(self, band, grid_with_annulus, rng):
        f = random_field(band, grid_with_annulus, rng, propagating_only=False)
        g = time_reverse(time_reverse(f))
        assert np.array_equal(g.amplitudes, f.amplitudes)
        assert g.orientation == f.orientation

    def test_orientation_flips(self, band, grid, rng):
        f = random_field(band, grid, rng)
        assert time_reverse(f).orientation == "up"

    def test_mirror_symmetric_real_amplitudes_unchanged(self, band, grid):
        # radial (hence mirror-symmetric) real profile is a fixed point
        amps = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
        amps[: grid.n_prop, :] = np.outer(grid.rho[: grid.n_prop] ** 2,
                                          np.arange(1, band.n_k + 1))
        f = AngularField(band, grid, amps, "down")
        assert np.allclose(time_reverse(f).amplitudes, f.amplitudes)

    def test_imaginary_amplitude_conjugates_at_mirror_node(self, band, grid):
        amps = np.zeros((grid.n_nodes, band.n_k), dtype=complex)
        amps[2, 0] = 1.0j
        f = AngularField(band, grid, amps, "down")
        rev = time_reverse(f)
        partner = grid.mirror[2]
        assert rev.amplitudes[partner, 0] == -1.0j
        assert rev.amplitudes[2, 0] == (0.0 if partner != 2 else -1.0j)

    def test_synthesized_field_runs_backwards(self, band, grid, rng):
        # T realizes U(t, x') -> U(-t, x') for the synthesized field
        f = random_field(band, grid, rng)
        t = np.linspace(-1.5, 1.5, 11)
        xs = rng.uniform(-2, 2, (5, 2))
        u_fwd, _ = synthesize_time_field(f, t, xs)
        u_rev, _ = synthesize_time_field(time_reverse(f), t, xs)
        assert np.allclose(u_rev, u_fwd[::-1, :], rtol=1e-10, atol=1e-12)
