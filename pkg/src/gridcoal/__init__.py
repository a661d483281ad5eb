"""Interactive cooperative game between a smart grid and cloud federations."""

from .allocation import (CoalitionEvaluator, InfeasibleCoalitionError,
                         MigrationCostMatrix, coalition_cost, coalition_revenue,
                         evaluate_coalition, solve_allocation)
from .dynamics import (DynamicsParams, StateSpace, absorbing_states,
                       build_transition_matrix, ergodic_sets,
                       is_merge_split_stable, stationary_distribution,
                       transition_prob)
from .harness import RunReport, run_experiment, write_report
from .model import (BusPricing, DataCenterSpec, GridSpec, PowerDraw,
                    electricity_price, power_draw)
from .partitions import Move, Partition, bell_number, enumerate_partitions, neighbors
from .policy import (ActionGrid, PricingPolicy, SlotModel, average_profits,
                     build_action_grid, build_cmdp_lp, cent_solve, extract_policy,
                     nocoop_solve, sg_utility, solve_pricing_policy)
from .scenario import (Scenario, diurnal_profile, generate_trace, load_scenario,
                       paper6)
from .shapley import shapley_values
from .simplex import LinearProgram, LpSolution
from .simplex import solve as solve_lp

__version__ = "0.1.0"
