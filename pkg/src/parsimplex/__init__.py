"""Sparse dual revised simplex solver with serial, PAMI and SIP engines."""

from .dual import COMPONENTS, Options, Solution, SolveStatus, solve_serial
from .lp import Basis, CompLp, Status, Tolerances
from .mps import parse_mps, read_mps, to_computational_form
from .pami import solve_pami
from .sip import solve_sip

__all__ = [
    "COMPONENTS", "Basis", "CompLp", "Options", "Solution", "SolveStatus", "Status", "Tolerances",
    "parse_mps", "read_mps", "solve_pami", "solve_serial", "solve_sip", "to_computational_form",
]
