"""ffl: a workbench for stationary fractal measures on the line and in
product boxes - Fourier transforms with guaranteed error bounds, random
convolution disintegrations, nonlinear pushforwards, and quantitative
equidistribution experiments."""

from .ifs import (AffineMap, SmoothMap, ProductMap, CIFS, FibreProductCIFS,
                  SeparatedPair, Word, compose, make_word, tail_check, lyapunov,
                  build_fibre_product, fibre_product_from_1d, cantor_system,
                  dyadic_uniform_system, ValidationError, SeparationError,
                  BudgetExhausted)
from .measure import (FourierValue, SamplePoints, sample_points, make_sampler,
                      fourier_exact, fourier_product_homogeneous,
                      fourier_montecarlo, frostman_profile, cylinder_decomposition)
from .disintegrate import (EquivClass, ClassTable, OmegaSample, ConvolutionFactor,
                           build_classes, sample_omega, mu_omega_fourier,
                           disintegration_consistency, LargeDeviationParams,
                           check_omega_membership, ek_diagnostics,
                           circle_sum_bound, calibrate_alpha)
from .pushforward import (SmoothMapF, MapNorms, map_norms, pushforward_fourier,
                          stopping_words, StoppingSet, zero_cover, ZeroCover,
                          split_fourier, prefix_decomposition, conjugate_ifs,
                          ks_distance, identity_map)
from .equidist import (RateFn, EquidistSpec, GridPoint, random_grid_point,
                       grid_point_for, sigma, count_hits, weyl_sums, digit_freq,
                       sample_rational_points)
from .decay import (BandMax, DecayFit, SparseCover, band_maxima, fit_eta,
                    sparse_cover, rajchman_probe)

__version__ = "0.1.0"
