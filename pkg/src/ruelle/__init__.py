"""Ruelle resonances of real-analytic Anosov maps of the 2-torus.

Two independent routes to the spectrum: periodic-orbit dynamical
determinants and escape-weighted Fourier-Galerkin truncations of the
Koopman operator ``u -> g * (u o F)``.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .determinant import (DeterminantSeries, GrowthProfile, Resonance, ResonanceSet, determinant_coefficients,
                          determinant_zeros, evaluate_determinant, growth_profile, resonances_from_determinant)
from .errors import (BudgetExceeded, ConeCertificateMissing, DegenerateSeries, EigenSolverFailure,
                     GridBelowValidityFloor, LefschetzMismatch, LocalDiffeoViolation, NewtonDivergence,
                     NotHyperbolic, ParseError, QuadratureOverflow, RuelleError)
from .family_sweep import PipelineConfig, SweepPlan, run_sweep
from .galerkin import (EscapeWeight, GalerkinOperator, assemble, eigenvalues, operator_trace_power,
                       resonances_from_galerkin, singular_values)
from .periodic_orbits import (FixedPointRecord, TraceSequence, enumerate_fixed_points, fourier_trace,
                              lefschetz_check, trace_sequence, trace_sum)
from .spectral_analysis import (CountingCurve, NotEstimable, counting_function, exponent_estimate,
                                hausdorff_distance, weyl_bound_check)
from .torus_maps import (HyperbolicSplitting, IntMatrix2, TorusMap, TrigPolynomial, evaluate, jacobian, load_map,
                         splitting, verify_cone_condition)
from .corpus import corpus, corpus_path

__all__ = [name for name in dir() if not name.startswith("_")]
