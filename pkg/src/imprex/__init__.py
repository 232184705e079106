"""Upper and lower expectations on imprecise probability trees.

Two independent routes are provided: backward recursion with witness
supermartingales (:mod:`imprex.game`) and forward enumeration of compatible
precise trees (:mod:`imprex.oracle`). Non-finitary variables enter as monotone
limits of finitary gambles (:mod:`imprex.limits`).
"""

from .automaton import AutomatonGamble
from .core import (TOL, BudgetExceeded, DepthExceeded, DimensionMismatch, EmptyTarget, FinitaryGamble,
                   ImprexError, InvalidModel, NotConverged, PathPrefix, SituationTooShort, StateSpace,
                   cut_lower, cut_upper, is_prefix)
from .game import (CutExtended, GameValue, Supermartingale, backward_lower, backward_upper, game_lower,
                   game_upper, hedging_check, is_supermartingale, optimal_supermartingale)
from .limits import (ConvergenceControls, LimitResult, MonotoneVariable, converge, hitting_variable,
                     lsc_decomposition, lsc_from_table, monotone_approach, truncated_average,
                     usc_decomposition, usc_from_table, validate_monotone)
from .local import (CredalSet, MassFunction, check_coherence, is_dominated, lower_envelope,
                    upper_envelope)
from .oracle import (cylinder_probability, finitary_expectation, measure_lower_finitary,
                     measure_upper_finitary, measure_upper_limit)
from .trees import ImpreciseTree, PreciseTree, VertexSelection, enumerate_vertex_trees, is_compatible

__version__ = "0.1.0"
