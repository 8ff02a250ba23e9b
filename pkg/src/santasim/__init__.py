"""CONGEST-style simulator, mixed packing-covering LP solver, cycle
rounding, and the max-min gift-allocation pipeline built on them."""

from .congest import CongestNetwork, RoundStats
from .instance import Instance, format_instance, parse_instance
from .mpclp import MixedLP, from_dense, normalize, solve_feasibility, solve_max
from .oracles import brute_force_opt, lp_feasibility_oracle, verify_assignment
from .pipeline import SolveConfig, solve
from .rounding import cycle_decompose, ldd, round_cycles, round_single_cycle, t_join

__all__ = [
    "CongestNetwork", "RoundStats", "Instance", "format_instance",
    "parse_instance", "MixedLP", "from_dense", "normalize",
    "solve_feasibility", "solve_max", "brute_force_opt",
    "lp_feasibility_oracle", "verify_assignment", "SolveConfig", "solve",
    "cycle_decompose", "ldd", "round_cycles", "round_single_cycle", "t_join",
]
