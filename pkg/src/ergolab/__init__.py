"""Numerical laboratory for weighted ergodic averages on finite-dimensional
tracial matrix algebras: L^p structure and the projection lattice, positive
trace-preserving dynamics, weighted averages over unit-circle weight grids,
Kronecker-factor decompositions and atomic spectral measures, operator
Van der Corput certificates, and scenario-driven convergence experiments.
"""

__version__ = "0.1.0"

from .algebra import (
    AlgebraCtx, Operator, Projection, absval, inner, lp_norm, measure_nbhd,
    meet, operator_from_json, operator_to_json, spectral_projection, trace,
)
from .averages import (
    AverageTrajectory, ergodic_avg, roots_of_unity_grid, trajectory,
    uniform_grid, uniform_sup, weighted_avg,
)
from .dynamics import (
    Composition, Dynamics, DynamicsReport, KrausChannel,
    PermutationConjugation, Power, UnitaryConjugation, dynamics_from_json,
    dynamics_to_json, iterate, superoperator, validate,
)
from .errors import ConfigError, HypothesisViolation, NumericalFailure
from .experiments import (
    ConvergenceReport, ProjectionWitness, Theorem6Report, find_witness,
    mean_ergodic_check, refine_projection, theorem6_experiment,
    weak_mixing_experiment, ww_verdict,
)
from .spectral import (
    CorrelationSequence, EigenOperator, KroneckerSplit, SpectralMeasure,
    atom_estimate, check_positive_definite, correlation, eigen_split,
    kronecker_split, spectral_measure, wiener_criterion,
)
from .vandercorput import (
    VdcCertificate, lemma2_identity_check, random_vdc_suite, vdc_gap,
    vdc_norm_bound, ww_bound_chain,
)
