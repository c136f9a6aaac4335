"""Periodic solutions above the threshold by topological shooting.

Shots start from ``(0, a, 0, -k a / 2)`` (zero energy). With ``m(a)`` the
first zero of w', a root of ``phi(a) = w'''(m(a))`` makes ``m`` a point of
symmetry: for odd f the odd extension to ``[-m, m]`` followed by reflection
about ``m`` closes up into a solution of period ``4m``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketingFailed,
    DegenerateRoots,
    NoFirstCriticalPoint,
    SymmetryViolation,
    ValidationFailed,
)
from .integrator import EVENT, StopPolicy, Tolerance, concatenate, find_roots, integrate
from .model import Problem, invariant_arrays

log = logging.getLogger(__name__)

SHOOT_TOL = Tolerance(rel=1e-12, abs=1e-14)
RESIDUAL_BOUND = 1e-8
CLOSURE_BOUND = 1e-6
JOINT_BOUND = 1e-6
_REFLECT = np.array([1.0, -1.0, 1.0, -1.0])


def shot_state(prob, a):
    return (0.0, a, 0.0, -prob.k * a / 2.0)


def half_wave(prob, a, tol=SHOOT_TOL, s_max=1e3):
    """Shot from ``(0, a, 0, -ka/2)`` cut at the first critical point ``m(a)``.

    Returns ``(m, trajectory on [0, m])``.
    """
    if not a > 0:
        raise ValueError(f"shooting parameter must be positive, got a={a}")
    if not prob.k > 0:
        raise ValueError(f"shooting needs k > 0, got k={prob.k}")
    stop = StopPolicy(s_max=s_max, max_events=1)
    traj = integrate(prob, shot_state(prob, a), tol=tol, stop=stop,
                     event=lambda s, y: y[1])
    roots = find_roots(traj, lambda Y: Y[:, 1], 0.0)
    if traj.stop_reason != EVENT or roots.size == 0:
        raise NoFirstCriticalPoint(
            f"w' stayed positive up to s={traj.s_end} ({traj.stop_reason}) for a={a}",
            escape_s=traj.escape_s,
        )
    m = float(roots[0])
    return m, traj.truncated(m)


def phi(prob, a, tol=SHOOT_TOL):
    """Shooting function ``w'''(m(a))``."""
    m, hw = half_wave(prob, a, tol)
    return float(hw.y[-1, 3])


@dataclass(frozen=True)
class ScanResult:
    a: np.ndarray
    phi: np.ndarray  # NaN where no first critical point exists
    brackets: list


def _phi_or_nan(prob, a, tol):
    try:
        return phi(prob, a, tol)
    except NoFirstCriticalPoint as exc:
        log.info("%s", exc)
        return math.nan


def _brackets(a, vals):
    out = []
    ok = np.nonzero(np.isfinite(vals))[0]
    for i, j in zip(ok[:-1], ok[1:]):
        if vals[i] == 0.0:
            out.append((a[i], a[i]))
        elif vals[i] * vals[j] < 0:
            out.append((a[i], a[j]))
    return out


def scan_phi(prob, grid, tol=SHOOT_TOL):
    a = np.asarray(grid, dtype=float)
    vals = np.array([_phi_or_nan(prob, ai, tol) for ai in a])
    return ScanResult(a, vals, _brackets(a, vals))


@dataclass(frozen=True, eq=False)
class PeriodicSolution:
    a_star: float
    m: float
    period: float
    half_wave: object
    orbit: object  # one period on [-m, 3m]
    residuals: dict
    phi_at_root: float
    other_brackets: list = field(default_factory=list)

    def sidecar(self):
        return {
            "a_star": self.a_star,
            "m": self.m,
            "period": self.period,
            "residuals": dict(self.residuals),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2)


def build_symmetric_extension(half, m, odd_f=True, max_mismatch=JOINT_BOUND, check=True):
    """One period on ``[-m, 3m]`` from a half-wave on ``[0, m]``.

    The odd extension ``w(s) = -w(-s)`` covers ``[-m, 0]`` and reflection
    ``w(s) = w(2m - s)`` covers ``[m, 3m]``. Even-order components match at
    the joints by construction; the odd ones match only up to
    ``2|w'(m)|, 2|w'''(m)|`` (and ``2|w(0)|, 2|w''(0)|`` at the origin).
    """
    if not odd_f:
        raise ValueError("a one-point symmetric extension needs an odd nonlinearity")
    if half.s_start != 0.0 or abs(half.s_end - m) > 1e-14 * max(1.0, m):
        raise ValueError("half-wave must run from 0 to m")
    y0, ym = half.y[0], half.y[-1]
    mismatch = 2.0 * max(abs(ym[1]), abs(ym[3]), abs(y0[0]), abs(y0[2]))
    if check and mismatch > max_mismatch:
        raise SymmetryViolation(f"joint mismatch {mismatch:.3g} exceeds {max_mismatch:.3g}")
    odd = half.transformed(lambda s: -s, -_REFLECT).reversed()
    core = concatenate([odd, half])
    refl = core.transformed(lambda s: 2.0 * m - s, _REFLECT).reversed()
    return concatenate([core, refl], info={"joint_mismatch": mismatch, "period": 4.0 * m})


def _closure_error(prob, a, period, tol):
    y0 = np.array(shot_state(prob, a))
    traj = integrate(prob, y0, tol=tol, stop=StopPolicy(s_max=period))
    return float(np.max(np.abs(traj.y[-1] - y0))), traj


def find_periodic(prob, a_scan=None, tol=SHOOT_TOL):
    """Root of ``phi`` from the first sign-change bracket in increasing a.

    ``a_scan`` is ``(a_min, a_max, n)``; the grid is widened by decades (three
    at most on each side) while no sign change appears.
    """
    if not prob.nl.odd:
        raise ValueError("periodic construction needs an odd nonlinearity")
    if prob.k <= prob.k_f:
        log.warning("k=%g <= k_f=%g: no periodic solution is expected", prob.k, prob.k_f)
    a_min, a_max, n = a_scan or (1e-3, 1e3, 61)
    step = math.log10(a_max / a_min) / (n - 1)
    # grid point i sits at a_min 10^(i step); widening only evaluates new indices
    cache = {}
    for widen in range(4):
        extra = int(round(widen / step))
        idx = range(-extra, n + extra)
        for i in idx:
            if i not in cache:
                cache[i] = _phi_or_nan(prob, a_min * 10 ** (i * step), tol)
        a = np.array([a_min * 10 ** (i * step) for i in idx])
        vals = np.array([cache[i] for i in idx])
        scan = ScanResult(a, vals, _brackets(a, vals))
        lo, hi = a[0], a[-1]
        if scan.brackets:
            break
    else:
        raise BracketingFailed(
            f"phi keeps one sign on [{lo:g}, {hi:g}] for k={prob.k}"
        )
    a_lo, a_hi = scan.brackets[0]

    def g(a):
        return phi(prob, a, tol)

    a_star = a_lo if a_lo == a_hi else brentq(g, a_lo, a_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    m, hw = half_wave(prob, a_star, tol)
    ym = hw.y[-1]
    phi_root = float(ym[3])
    res = {"w1_m": float(ym[1]), "w3_m": float(ym[3])}
    if abs(phi_root) > 1e-10 * max(1.0, a_star):
        log.warning("|phi(a*)| = %.3g above 1e-10 max(1, a*)", abs(phi_root))
    closure, _ = _closure_error(prob, a_star, 4.0 * m, tol)
    res["closure"] = closure
    if abs(ym[1]) > RESIDUAL_BOUND or abs(ym[3]) > RESIDUAL_BOUND or closure > CLOSURE_BOUND:
        raise ValidationFailed(f"residuals out of bounds: {res}")
    orbit = build_symmetric_extension(hw, m, prob.nl.odd)
    return PeriodicSolution(a_star, m, 4.0 * m, hw, orbit, res, phi_root, scan.brackets[1:])


@dataclass(frozen=True)
class LinearLimitProfile:
    """Small-amplitude limit ``V'''' + k V'' + f'(0) V = 0`` from ``(0, 1, 0, -k/2)``.

    ``secular`` marks the ``f'(0) = 0`` branch, where
    ``V(t) = sin(sqrt(k) t) / (2 sqrt(k)) + t / 2``.
    """

    k: float
    fprime0: float
    lambda1: float
    lambda2: float
    T: float
    Vppp_T: float
    secular: bool

    def V(self, t):
        t = np.asarray(t, dtype=float)
        if self.secular:
            rk = self.lambda1
            return np.sin(rk * t) / (2 * rk) + t / 2
        l1, l2 = self.lambda1, self.lambda2
        return np.sin(l1 * t) / (2 * l1) + np.sin(l2 * t) / (2 * l2)


def linear_limit_profile(k, fprime0):
    if fprime0 < 0:
        raise ValueError("f'(0) must be non-negative")
    if fprime0 == 0:
        if not k > 0:
            raise ValueError("secular branch needs k > 0")
        rk = math.sqrt(k)
        return LinearLimitProfile(k, 0.0, rk, 0.0, math.pi / rk, k / 2, True)
    if k <= 2.0 * math.sqrt(fprime0):
        raise DegenerateRoots(f"k={k} <= 2 sqrt(f'(0))={2 * math.sqrt(fprime0)}")
    disc = math.sqrt(k * k - 4.0 * fprime0)
    l1 = math.sqrt((k + disc) / 2.0)
    # product form avoids cancellation in (k - disc)
    l2 = math.sqrt(fprime0) / l1

    def dV(t):
        return 0.5 * (math.cos(l1 * t) + math.cos(l2 * t))

    # dV starts at 1; step below the fastest half-period to bracket the first zero
    step = math.pi / (4.0 * l1)
    a = 0.0
    while dV(a + step) > 0:
        a += step
    T = brentq(dV, a, a + step, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    Vppp = -0.5 * l1 * l1 * math.cos(l1 * T) - 0.5 * l2 * l2 * math.cos(l2 * T)
    return LinearLimitProfile(k, fprime0, l1, l2, T, Vppp, False)


def rescaling_exponents(p):
    """``(sigma, rho)`` with ``t = a^sigma s``, ``v = a^rho w`` normalising large shots."""
    return (p - 1.0) / (p + 3.0), -4.0 / (p + 3.0)


def limit_problem(p):
    """``V'''' + |V|^(p-1) V = 0``, the large-amplitude limit of a shot."""
    return Problem.prototype(0.0, alpha=0.0, q=1.0, p=p)


def limit_solution(p, tol=SHOOT_TOL):
    """Limit solution from ``(0, 1, 0, 0)`` up to its first critical point ``T``."""
    prob = limit_problem(p)
    stop = StopPolicy(s_max=1e3, max_events=1)
    traj = integrate(prob, (0.0, 1.0, 0.0, 0.0), tol=tol, stop=stop, event=lambda s, y: y[1])
    T = float(find_roots(traj, lambda Y: Y[:, 1], 0.0)[0])
    return T, traj.truncated(T)


def rescaled_shot(prob, a, t_max, tol=SHOOT_TOL):
    """Trajectory of ``v(t) = a^rho w(a^-sigma t)`` on ``[0, t_max]``."""
    sigma, rho = rescaling_exponents(prob.nl.p)
    s_end = a ** (-sigma) * t_max
    traj = integrate(prob, shot_state(prob, a), tol=tol, stop=StopPolicy(s_max=s_end))
    scale = np.array([a**rho, a ** (rho - sigma), a ** (rho - 2 * sigma), a ** (rho - 3 * sigma)])
    return traj.transformed(lambda s: a**sigma * s, scale)


def rescaling_distance(prob, a, n_grid=2001, tol=SHOOT_TOL):
    """Sup over ``[0, T]`` of ``|v - V|`` between a rescaled shot and the limit solution."""
    T, V = limit_solution(prob.nl.p, tol)
    v = rescaled_shot(prob, a, T, tol)
    t = np.linspace(0.0, T, n_grid)
    t[-1] = min(t[-1], v.s_end)
    return float(np.max(np.abs(v(t)[:, 0] - V(t)[:, 0])))


def hbar_slope_at_origin(prob, orbit, h=1e-4):
    """Central fourth-order difference of Hbar at 0 along ``orbit``."""
    s = np.array([-2 * h, -h, h, 2 * h])
    Hb = invariant_arrays(prob, orbit(s))["Hbar"]
    return float((Hb[0] - 8 * Hb[1] + 8 * Hb[2] - Hb[3]) / (12 * h))
