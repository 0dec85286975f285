"""Numerical laboratory for generalized self-similar blow-up in the 1D wave
equations with quadratic time-derivative nonlinearities."""

__version__ = "0.1.0"

from .profiles import (BetaBranch, BetaBranchKind, EquationKind, ProfileParams,
                       blowup_solution_eval, pde_residual, profile_eval,
                       riccati_g, singular_selfsim_root)
from .operators import (Discretization, GramFlavor, GramForm, OperatorKind,
                        OperatorMatrix, assemble_linearized, build_discretization,
                        rayleigh_dissipativity, sobolev_gram)
from .spectrum import (ModeBasis, SpectrumReport, eigen_scan,
                       eigenfunction_identities, mode_vectors, projections,
                       resolvent_probe)
from .evolve import (Field2, Nonlinearity, Trajectory, correction_term,
                     decomposition_taylor_check, integrate, lyapunov_perron,
                     mode_growth_rates, stable_decay)
from .physical import (BlowupFit, CauchyData, detect_blowup_time,
                       detect_blowup_time_cone, family_cauchy_data,
                       fit_modulation, similarity_rate_check, solve_physical)
