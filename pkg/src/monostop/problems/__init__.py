"""Ready-made problem families."""
from __future__ import annotations

from ..core.rules import StoppingRule
from ..sets import BallComplement, HalfSpace, ProductH, ProductUniform
from .burglar import (BurglarParams, BurglarProduct, BurglarSum, Witness, burglar_h, burglar_sum_witness,
                      burglar_y, make_burglar_problem, make_burglar_product)
from .config import FAMILIES, ConfigError, build_problem, load_config, load_problem
from .disorder import (DisorderParams, DisorderProblem, disorder_phi, disorder_pi, disorder_y,
                       make_disorder_problem)
from .house import HouseParams, HouseProduct, HouseSum, house_f, house_g, make_house_problem
from .investment import (InvestmentParams, InvestmentProblem, JumpModel, investment_coeff,
                         make_investment_problem)

RADIUS_FACTORS = (0.5, 0.6, 0.75, 0.9, 1.1, 1.3, 1.6, 2.0)
LEVEL_FACTORS = (0.85, 0.9, 0.95, 0.98, 1.02, 1.1, 1.25, 1.5)
THRESHOLD_FACTORS = (0.5, 0.6, 0.75, 0.9, 1.1, 1.25, 1.5, 1.75)


def perturbation_family(problem) -> list[StoppingRule]:
    """Eight first-entry rules whose regions perturb the problem's own stopping set."""
    base = problem.myopic_set()
    if base is None:
        raise ValueError(f"{problem.family}: no closed-form stopping set to perturb")
    if isinstance(base, BallComplement):
        factors = RADIUS_FACTORS
    elif isinstance(base, (ProductUniform, ProductH)):
        factors = LEVEL_FACTORS
    else:
        factors = THRESHOLD_FACTORS
    return [StoppingRule.first_entry(base.scaled(f), label=f"entry:{f:g}") for f in factors]


__all__ = [
    "BurglarParams", "BurglarProduct", "BurglarSum", "ConfigError", "DisorderParams", "DisorderProblem",
    "FAMILIES", "HalfSpace", "HouseParams", "HouseProduct", "HouseSum", "InvestmentParams",
    "InvestmentProblem", "JumpModel", "Witness", "build_problem", "burglar_h", "burglar_sum_witness",
    "burglar_y", "disorder_phi", "disorder_pi", "disorder_y", "house_f", "house_g", "investment_coeff",
    "load_config", "load_problem", "make_burglar_problem", "make_burglar_product", "make_disorder_problem",
    "make_house_problem", "make_investment_problem", "perturbation_family",
]
