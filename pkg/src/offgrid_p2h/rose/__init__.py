"""Rolling optimal electrolyzer scheduling."""

from .enumerate import enumerate_solve, status_strings
from .lpformat import read_solution_values, solution_from_values, write_lp
from .problem import RosesParams, ScheduleProblem, build_model, build_schedule_problem
from .solution import ScheduleSolution, solution_objective
from .solve import solve_counts, solve_schedule
from .validate import ResidualReport, validate_solution
