"""p-Wasserstein barycenters of discrete measures.

Point p-barycenters, the multi-marginal transport LP and its duals,
structural checks on optimal plans, and exact one-dimensional formulas.
"""

from .exceptions import BudgetExceededError, SolverError, ValidationError
from .measures import (DiscreteMeasure, QuantileGrid, dirac, discretize_gaussian,
                       dump_measure, load_measure, quantile_function, uniform)
from .pbarycenter import (BarycenterResult, PointConfiguration, barycenter_limit_p1,
                          barycenter_limit_pinf, cost_cp, point_barycenter,
                          solve_point_barycenter)
from .mmot import (BarycenterProblem, TransportPlan, plan_marginal,
                   pushforward_barycenter, solve_mmot)
from .twomarg import PairPlan, coupled_objective, induced_pair_plan, wp_discrete
from .duality import (GridFunction, PotentialSet, check_first_order, conjugate,
                      dual_value, first_order_potentials, improve_potentials,
                      lp_potentials, reconstruct_map_S)
from .onedim import (INF, ONE, OneDimProblem, barycenter_quantile,
                     barycenter_quantile_limit, emit_figure_data, wp_1d)
from .verify import check_cp_monotone, classify_singular, graph_diagnostic
from .estimators import MultiMarginalBarycenter, PBarycenter, QuantileBarycenter

__version__ = "0.1.0"

__all__ = [
    "BarycenterProblem", "BarycenterResult", "BudgetExceededError", "DiscreteMeasure",
    "GridFunction", "INF", "MultiMarginalBarycenter", "ONE", "OneDimProblem",
    "PBarycenter", "PairPlan", "PointConfiguration", "PotentialSet",
    "QuantileBarycenter", "QuantileGrid", "SolverError", "TransportPlan",
    "ValidationError", "barycenter_limit_p1", "barycenter_limit_pinf",
    "barycenter_quantile", "barycenter_quantile_limit", "check_cp_monotone",
    "check_first_order", "classify_singular", "conjugate", "cost_cp",
    "coupled_objective", "dirac", "discretize_gaussian", "dual_value", "dump_measure",
    "emit_figure_data", "first_order_potentials", "graph_diagnostic",
    "improve_potentials", "induced_pair_plan", "load_measure", "lp_potentials",
    "plan_marginal", "point_barycenter", "pushforward_barycenter",
    "quantile_function", "reconstruct_map_S", "solve_mmot",
    "solve_point_barycenter", "uniform", "wp_1d", "wp_discrete",
]
