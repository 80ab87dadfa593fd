from .decomposition import INFINITE, compensator, first_violation, multiplicative_compensator, myopic_time
from .problem import (MAXIMIZE, MINIMIZE, ContinuousProblem, DiscreteProblem, EventPath, InvalidProblemError,
                      as_state, repeat, take)
from .rules import StoppingRule, parse_rule
