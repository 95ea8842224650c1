"""Optimal incident acoustic waveforms by iterative time reversal.

The toolkit represents fields on a plane as angular spectra, scatters
them off layered or compact penetrable media, and iterates the
time-reversed response to find the incident waveform that maximizes the
scattered energy flux, tracking the spectral analysis that predicts the
limiting single-frequency field.
"""

__version__ = "0.1.0"

from .angular import (AngularField, DirectionGrid, FrequencyBand, TestFunction,
                      build_direction_grid, constant_test_function, eta3,
                      project_propagating, random_field, synthesize_time_field,
                      time_reverse, uniform_band, zero_field)
from .backends import (ScatteringBackendHandle, SyntheticBackend, ZeroBackend,
                       backend_to_band, planted_backend, table_to_band)
from .flux import annulus_share, column_flux, flux, flux_inner, w_inner, w_norm_sq
from .media import (LayeredProfile, VoxelScatterer, contrast_from_speed,
                    load_medium, save_medium, speed_from_contrast, validate)
from .solver_1d import (ReflectionTable, build_reflection_table,
                        distinguishability_1d, reflection_coefficient,
                        scatter_1d)
from .solver_3d import (ScatteringBand, TotalFieldSolution, assemble_band,
                        green, green_weyl, hs_norm, load_band, ls_solve,
                        s_kernel, save_band, scattering_amplitude,
                        weighted_operator_norm)
from .spectral import (SpectralCurve, eigenvalue_curves, estimate_peak_order,
                       gram_matrix, peak_weights, power_decay_asymptote,
                       power_decay_integral, power_decay_product, predict_limit)
from .time_reversal import (IterationTrace, apply_tr_operator,
                            distinguishability_estimate, iterate,
                            spectral_concentration)

__all__ = [name for name in dir() if not name.startswith("_")]
