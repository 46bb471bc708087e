"""Numerical laboratory for Gaussian characterization theorems via Q-independence."""
__version__ = "0.1.0"

from .charfn import CharFnHandle, GridSpec, PolyDegreeCertificate, degree_test, finite_difference, log_cf_field
from .distributions import GaussianDist, ProductDist, ScalarFamily, point_mass, sample
from .errors import (CharlabError, ConfigError, DegreeCapError, DimensionError, OutOfDomainError,
                     PreconditionError, UnsupportedFamilyError)
from .polyalgebra import BlockPolynomial, QuadraticExponent
from .qindep import (QIndependenceCertificate, certify, estimate_q, lemma1_residual, lemma4_residual,
                     lemma6_residual)
from .space import LinearOp, check_heyde_condition, check_invertible
from .theorems import (ExperimentSpec, TheoremVerdict, gaussianity_check, lemma5_transform, run,
                       run_heyde, run_sample_mean_residue, run_skitovich_darmois, run_theorem3)

__all__ = [
    "BlockPolynomial", "CharFnHandle", "CharlabError", "ConfigError", "DegreeCapError", "DimensionError",
    "ExperimentSpec", "GaussianDist", "GridSpec", "LinearOp", "OutOfDomainError", "PolyDegreeCertificate",
    "PreconditionError", "ProductDist", "QIndependenceCertificate", "QuadraticExponent", "ScalarFamily",
    "TheoremVerdict", "UnsupportedFamilyError", "certify", "check_heyde_condition", "check_invertible",
    "degree_test", "estimate_q", "finite_difference", "gaussianity_check", "lemma1_residual",
    "lemma4_residual", "lemma5_transform", "lemma6_residual", "log_cf_field", "point_mass", "run",
    "run_heyde", "run_sample_mean_residue", "run_skitovich_darmois", "run_theorem3", "sample",
]
