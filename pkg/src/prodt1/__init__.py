"""Bi-parameter T(1) toolkit on finite quasimetric measure spaces."""
from . import _backend
from .errors import (BadCubeEntry, BallTooSmall, ConfigError, DeltaTooLarge, EmptySpace,
                     GenerationOutOfRange, MismatchedDelta, NegativeWeight, NotAdjacentScales,
                     NotRectUnion, OutsideBidisc, Prodt1Error, UnknownIndex, UnknownPoint)
from .space import (Ball, DominatingFunction, PointSpace, ball_members, fit_power_dominating,
                    from_coords, from_table, power_dominating, table_dominating, tail_integral,
                    validate_space)
from .dyadic import DyadicSystem, build_system, check_axioms, containing_cube
from .haar import HaarBasis, ProductCoefficients, build_haar, expand, reconstruct
from .goodness import Frame, GoodnessParams, badness_probability, classify
from .productseq import AdmissibleOpenSet, CandidateFamily, ProductFrame, bmo_prod_norm, norm_report
from .kernels import KernelOperator, KernelSpec, dense_norm, operator_norm, validate_assumptions

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active numeric core: "compiled" or "python"."""
    return _backend.name()
