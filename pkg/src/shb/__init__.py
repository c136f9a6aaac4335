"""Stationary Swift-Hohenberg equation ``w'''' + k w'' + f(w) = 0``: integration,
blow-up diagnostics and periodic orbits."""

from .blowup import BlowupReport, REstimate, detect_blowup, detect_blowup_both, estimate_R
from .integrator import (
    BACKWARD,
    FORWARD,
    StopPolicy,
    Tolerance,
    Trajectory,
    energy_audit,
    find_roots,
    integrate,
    locate_event,
)
from .ladder import Ladder, extract_ladder, sequence_diagnostics
from .model import Nonlinearity, Problem, State, check_hypotheses, invariants, k_threshold, rhs
from .shooting import PeriodicSolution, find_periodic, linear_limit_profile, phi
from .transforms import mu_to_problem, pull_back, reflect, shift

__version__ = "0.1.0"
