"""Free boundaries of irreversible investment problems driven by
one-dimensional diffusions: closed forms, a generic solver and Monte Carlo
verification."""

__version__ = "0.1.0"

from .closed_form import ClosedFormBoundary, closed_form_boundary, has_closed_form
from .diffusions import CEV, GBM, Bessel3, CustomDiffusion, Diffusion, diffusion_from_dict
from .errors import (AssumptionViolation, DomainViolation, FreeBoundaryError,
                     MonotonicityViolation, NumericalFailure, QuadratureError,
                     RootNotBracketed, UnsupportedConfiguration)
from .montecarlo import (MCConfig, PolicyOutcome, VerificationReport, foc_spot_check,
                         policy_comparison, policy_payoff, verify_backward_equation,
                         verify_joint_law)
from .profits import CES, CobbDouglas, ProfitModel, profit_from_dict
from .solver import (BoundaryCurve, PointwiseBoundary, ResidualReport, pointwise_solve, residual,
                     residual_report, solve_on_grid)

__all__ = [
    "AssumptionViolation", "Bessel3", "BoundaryCurve", "CES", "CEV", "ClosedFormBoundary",
    "CobbDouglas", "CustomDiffusion", "Diffusion", "DomainViolation", "FreeBoundaryError",
    "GBM", "MCConfig", "MonotonicityViolation", "NumericalFailure", "PolicyOutcome",
    "PointwiseBoundary", "ProfitModel", "QuadratureError", "ResidualReport", "RootNotBracketed",
    "UnsupportedConfiguration", "VerificationReport", "closed_form_boundary",
    "diffusion_from_dict", "foc_spot_check", "has_closed_form", "pointwise_solve",
    "policy_comparison", "policy_payoff", "profit_from_dict", "residual", "residual_report",
    "solve_on_grid", "verify_backward_equation", "verify_joint_law",
]
