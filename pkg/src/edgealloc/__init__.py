"""Deadline-constrained task mapping and bandwidth/compute allocation for edge clouds.

Modules: ``model`` (instances, solutions, JSON documents), ``verify``
(feasibility checker), ``zsg`` (zero-slack greedy heuristic), ``ldm``
(discretized 0-1 model and LP export), ``solver`` (exact search over it),
``taskgen`` (synthetic tasksets), ``bench`` (campaigns and plots) and
``cli``.
"""

from .ldm import DiscretizationConfig, discretize, export_lp, prune
from .model import (AccessPoint, Assignment, Instance, Server, Solution, Task, Topology,
                    ValidationError, completion_time, load_instance, load_solution,
                    objective_value, save_instance, save_solution)
from .solver import branch_and_bound, brute_force, solve_brute, solve_ldm
from .verify import verify
from .zsg import zsg_solve

__version__ = "0.1.0"

__all__ = [
    "AccessPoint", "Assignment", "DiscretizationConfig", "Instance", "Server", "Solution", "Task",
    "Topology", "ValidationError", "branch_and_bound", "brute_force", "completion_time",
    "discretize", "export_lp", "load_instance", "load_solution", "objective_value", "prune",
    "save_instance", "save_solution", "solve_brute", "solve_ldm", "verify", "zsg_solve",
]
