"""Rescalings between the classical mu-form and the canonical equation, plus reflection and shift.

The classical form ``(1 + d^2)^2 U + U^3 - mu U = 0`` becomes
``w'''' + k w'' + w^3 + w = 0`` with ``k = 2 / sqrt(1 - mu)`` under
``w(s) = A U(B s)``, ``A = (1 - mu)^(-1/2)``, ``B = (1 - mu)^(-1/4)``.
At ``mu = 1`` no rescaling is needed and the canonical nonlinearity is ``t^3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain
from .model import Problem

_REFLECT = np.array([1.0, -1.0, 1.0, -1.0])


@dataclass(frozen=True)
class MuForm:
    mu: float
    problem: Problem
    amplitude: float  # A in w(s) = A U(B s)
    abscissa: float  # B

    @property
    def state_scale(self):
        """Diagonal map from U-states at ``x = B s`` to w-states at ``s``."""
        A, B = self.amplitude, self.abscissa
        return A * B ** np.arange(4.0)


def mu_to_problem(mu):
    mu = float(mu)
    if not math.isfinite(mu) or mu > 1.0:
        raise OutOfDomain(f"mu={mu}: only mu <= 1 maps to the canonical equation")
    if mu == 1.0:
        return MuForm(mu, Problem.prototype(2.0, alpha=0.0, q=1.0, p=3.0), 1.0, 1.0)
    c = 1.0 - mu
    return MuForm(mu, Problem.prototype(2.0 / math.sqrt(c), alpha=1.0, q=1.0, p=3.0),
                  c**-0.5, c**-0.25)


def to_canonical_state(u_state, mu):
    """``(U, U', U'', U''')`` at ``x`` to ``(w, w', w'', w''')`` at ``s = x / B``."""
    return np.asarray(u_state, dtype=float) * mu_to_problem(mu).state_scale


def to_mu_state(w_state, mu):
    return np.asarray(w_state, dtype=float) / mu_to_problem(mu).state_scale


def pull_back(traj, mu):
    """Canonical trajectory ``w(s)`` to the mu-form trajectory ``U(x)``, ``x = B s``."""
    form = mu_to_problem(mu)
    B = form.abscissa
    return traj.transformed(lambda s: B * s, 1.0 / form.state_scale, info={"mu": form.mu})


def mu_residual(traj_u, mu, x):
    """``U'''' + 2U'' + (1 - mu) U + U^3`` at ``x``, with U'''' from the dense output of U'''."""
    x = np.asarray(x, dtype=float)
    U = traj_u(x)
    d4 = traj_u.derivative(x)[..., 3]
    return d4 + 2.0 * U[..., 2] + (1.0 - mu) * U[..., 0] + U[..., 0] ** 3


def ode_residual(traj, s, prob=None):
    """``w'''' + k w'' + f(w)`` at ``s``, with w'''' from the dense output of w'''."""
    prob = prob or traj.prob
    s = np.asarray(s, dtype=float)
    Y = traj(s)
    return traj.derivative(s)[..., 3] + prob.k * Y[..., 2] + prob.nl.f(Y[..., 0])


def reflect(traj):
    """Trajectory of ``w(-s)``; odd-order components change sign."""
    return traj.transformed(lambda s: -s, _REFLECT)


def shift(traj, s0):
    """Trajectory of ``w(s + s0)``."""
    return traj.transformed(lambda s: s - s0, np.ones(4))
