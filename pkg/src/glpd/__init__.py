"""Finite-difference laboratory for the primal-dual formulation of the
double-well energy ``gamma/2 |grad u|^2 + alpha/4 u^4 - beta/2 u^2 - f u``."""

from glpd.conjugates import DualPoint, eval_Jstar, fenchel_young_check, reconstruct_dual_point
from glpd.energy import (
    Params,
    eval_dual,
    eval_primal,
    grad_dual,
    grad_primal,
    hess_dual,
    hess_primal,
    residual_shifted,
)
from glpd.mesh import GridSpec
from glpd.solve import ascend_dual, multistart_oracle, newton_primal, spectrum
from glpd.theorem import concavity_radius, epsilon_sweep, verify_theorem

__version__ = "0.1.0"
