"""First-order optimal prediction for the periodic lattice nonlinear Schrodinger equation."""
from .lattice import (Grid, LatticeField, HamiltonianSpec, DivergenceError, full_hamiltonian,
                      nls_rhs, integrate_field)
from .kernels import KernelSet, KernelError, gaussian_bump_kernels, fourier_kernels, collective_variables
from .gaussian import (GaussianPrior, ConditionedGaussian, ConditioningError, build_prior, condition,
                       wick_moment, closed_form_moments)
from .partition import Partition, h1_second_moment, optimize_m0, compute_b, fit_m0_to_correlation
from .perturbation import (SeriesTerm, DegenerateSeriesError, conditional_expectation_order0,
                           conditional_expectation_order1)
from .opsolver import (CollectiveTrajectory, SubgridConstant, compute_c, op_rhs_fourier, galerkin_rhs,
                       op_rhs_gaussian_kernels, integrate_collective)
from .montecarlo import SamplerConfig, SampleSet, EnsembleResult, sample_unconditioned, sample_conditioned, ensemble_truth

__version__ = "0.1.0"
