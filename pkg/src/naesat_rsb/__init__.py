"""1RSB ground-state energy, Gardner instability and 2RSB perturbation numerics
for random d-regular k-NAE-SAT."""
from .errors import InvalidInput, NaesatError, NonConvergence, ResourceLimit
from .instance import Instance, ModelParams, exact_ground_state, generate
from .sp_core import SpPoint, sp_solve
from .onersb import evaluate, solve_ystar

__version__ = "0.1.0"
