"""Critical-point ladder of an oscillating solution.

Between consecutive extrema ``m_j < m_{j+1}`` the blow-up theory predicts
exactly one zero ``z_j`` of w, one zero ``tau_j`` of w''', one zero ``r_j`` of
w'' with ``m_j < z_j < tau_j < r_j < m_{j+1}``, and (for late, large rungs) a
single zero ``theta_j`` of w'''' inside ``(m_j, z_j)``. This module locates
those abscissas on a trajectory and checks the ordering, sign and growth laws
that go with them.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateCriticalPoint, InsufficientRungs, NoCompleteRung, TrivialSolution
from .integrator import find_roots
from .model import fourth_derivative, invariant_arrays

log = logging.getLogger(__name__)

THETA_AMPLITUDE_FACTOR = 10.0
MIN_FIT_RUNGS = 4


@dataclass(frozen=True, eq=False)
class Ladder:
    """Extremum data (length n) and rung data (length n - 1, NaN when absent).

    ``counts[j]`` holds how many zeros of w, w''' and w'' fell strictly
    between ``m_j`` and ``m_{j+1}``; the theory says one each.
    """

    m: np.ndarray
    wm: np.ndarray
    w2m: np.ndarray
    w3m: np.ndarray
    M: np.ndarray
    F_M: np.ndarray
    G_m: np.ndarray
    H_m: np.ndarray
    z: np.ndarray
    tau: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    wr: np.ndarray
    counts: np.ndarray
    theta_applicable: np.ndarray
    theta_count: np.ndarray
    E: float
    direction: int = 1

    @property
    def n_rungs(self):
        return len(self.m) - 1

    @property
    def parity(self):
        return np.sign(self.wm)

    def to_csv(self, path):
        def fmt(v):
            return "" if v is None or not math.isfinite(v) else f"{float(v):.17g}"

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["j", "m", "z", "tau", "r", "theta", "M", "F_M", "G_m", "H_m"])
            for j in range(len(self.m)):
                rung = [self.z, self.tau, self.r, self.theta]
                vals = [a[j] if j < self.n_rungs else None for a in rung]
                writer.writerow(
                    [j, fmt(self.m[j]), *map(fmt, vals),
                     fmt(self.M[j]), fmt(self.F_M[j]), fmt(self.G_m[j]), fmt(self.H_m[j])]
                )


def _between(roots, a, b, direction):
    u = direction * roots
    lo, hi = sorted((direction * a, direction * b))
    return roots[(u > lo) & (u < hi)]


def extract_ladder(traj, s_start=None, s_tol=1e-12):
    """Locate all extrema after ``s_start`` and the interleaved zeros of w, w'', w''', w''''."""
    if traj.is_trivial():
        raise TrivialSolution("w vanishes identically on the trajectory")
    prob = traj.prob
    if s_start is None:
        s_start = traj.s_start
    d = traj.direction

    m = find_roots(traj, lambda Y: Y[:, 1], s_start, s_tol)
    r_all = find_roots(traj, lambda Y: Y[:, 2], s_start, s_tol)
    if m.size and r_all.size:
        gap = np.min(np.abs(m[:, None] - r_all[None, :]), axis=1)
        if np.any(gap <= 2 * s_tol):
            # critical points of nontrivial solutions are isolated: retry finer once
            fine = s_tol / 100
            m = find_roots(traj, lambda Y: Y[:, 1], s_start, fine)
            r_all = find_roots(traj, lambda Y: Y[:, 2], s_start, fine)
            gap = np.min(np.abs(m[:, None] - r_all[None, :]), axis=1)
            if np.any(gap <= 2 * fine):
                raise DegenerateCriticalPoint(f"w' and w'' vanish together near s={m[np.argmin(gap)]}")
    if len(m) < 2:
        raise NoCompleteRung(f"found {len(m)} extrema after s={s_start}; need two")
    z_all = find_roots(traj, lambda Y: Y[:, 0], s_start, s_tol)
    tau_all = find_roots(traj, lambda Y: Y[:, 3], s_start, s_tol)
    theta_all = find_roots(traj, lambda Y: fourth_derivative(prob, Y), s_start, s_tol)

    Ym = traj(m)
    inv = invariant_arrays(prob, Ym)
    M = np.abs(Ym[:, 0])
    n = len(m)
    nan = np.full(n - 1, np.nan)
    z, tau, r, theta = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    counts = np.zeros((n - 1, 3), dtype=int)
    theta_count = np.zeros(n - 1, dtype=int)
    applicable = M[:-1] >= THETA_AMPLITUDE_FACTOR * M[0]
    for j in range(n - 1):
        a, b = m[j], m[j + 1]
        for col, (roots, out) in enumerate(((z_all, z), (tau_all, tau), (r_all, r))):
            inside = _between(roots, a, b, d)
            counts[j, col] = inside.size
            if inside.size:
                out[j] = inside[0]
        if applicable[j] and math.isfinite(z[j]):
            inside = _between(theta_all, a, z[j], d)
            theta_count[j] = inside.size
            if inside.size:
                theta[j] = inside[0]
    wr = np.where(np.isfinite(r), traj(np.nan_to_num(r, nan=m[0]))[:, 0], np.nan)
    return Ladder(
        m=m, wm=Ym[:, 0], w2m=Ym[:, 2], w3m=Ym[:, 3], M=M,
        F_M=prob.nl.F(Ym[:, 0]), G_m=inv["G"], H_m=inv["H"],
        z=z, tau=tau, r=r, theta=theta, wr=wr, counts=counts,
        theta_applicable=applicable, theta_count=theta_count,
        E=float(traj.invariants["E"][0]), direction=d,
    )


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    n: int

    def within(self, lo, hi):
        return lo <= self.slope <= hi


def fit_slope(x, y):
    """Least-squares slope of y on x with its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = len(x)
    if n > 2:
        resid = y - A @ coef
        s2 = float(resid @ resid) / (n - 2)
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    else:
        stderr = math.inf
    return SlopeFit(float(coef[0]), stderr, n)


@dataclass(frozen=True)
class LadderReport:
    ordering_ok: np.ndarray
    sign_pattern_ok: np.ndarray
    r_sign_ok: np.ndarray
    theta_ok: np.ndarray  # per rung; True where not applicable
    l3_ok: np.ndarray
    H_increasing: np.ndarray
    l1_first_index: Optional[int]
    amp_exponent: SlopeFit
    gap_exponents: dict  # keys "z-m", "r-z", "m'-r"
    fit_rungs: int

    @property
    def all_ordered(self):
        return bool(np.all(self.ordering_ok))


def fit_window(n):
    return max(MIN_FIT_RUNGS, math.ceil(n / 2))


def skip_one_doubling_start(F):
    """Smallest i0 with ``F[i+1] > 2 F[i-1]`` for every i >= i0, or None."""
    F = np.asarray(F, dtype=float)
    if len(F) < 3:
        return None
    ok = F[2:] > 2 * F[:-2]  # entry i-1 tests index i
    if not ok[-1]:
        return None
    bad = np.nonzero(~ok)[0]
    return int(bad[-1] + 2) if bad.size else 1


def sequence_diagnostics(lad, prob=None):
    """Ordering, sign, monotonicity and scaling-law checks on a ladder.

    Slopes are fitted over the last ``max(4, ceil(n/2))`` complete rungs,
    where n is the number of complete rungs.
    """
    n = lad.n_rungs
    if n < MIN_FIT_RUNGS:
        raise InsufficientRungs(f"{n} complete rungs; slope fits need {MIN_FIT_RUNGS}")
    d = lad.direction
    u = lambda a: d * np.asarray(a)  # noqa: E731
    ordering = (
        np.all(lad.counts == 1, axis=1)
        & (u(lad.m[:-1]) < u(lad.z))
        & (u(lad.z) < u(lad.tau))
        & (u(lad.tau) < u(lad.r))
        & (u(lad.r) < u(lad.m[1:]))
    )
    sign_ok = (lad.wm[:-1] * lad.wm[1:] < 0)
    r_sign = np.sign(lad.wr) == -np.sign(lad.wm[:-1])
    theta_ok = np.where(
        lad.theta_applicable,
        (lad.theta_count == 1) & (u(lad.m[:-1]) < u(lad.theta)) & (u(lad.theta) < u(lad.z)),
        True,
    )
    l3 = lad.F_M[1:] > lad.F_M[:-1]
    # reflection negates H, so monotonicity is read in the run direction
    Hd = d * lad.H_m
    Hinc = Hd[1:] > Hd[:-1]

    w = fit_window(n)
    sl = slice(n - w, n)
    logM = np.log(lad.M[:-1][sl])
    amp = fit_slope(np.log(lad.M[: n + 1][-w:]), np.log(np.abs(lad.w2m[: n + 1][-w:])))
    gaps = {
        "z-m": fit_slope(logM, np.log(np.abs(lad.z - lad.m[:-1])[sl])),
        "r-z": fit_slope(logM, np.log(np.abs(lad.r - lad.z)[sl])),
        "m'-r": fit_slope(logM, np.log(np.abs(lad.m[1:] - lad.r)[sl])),
    }
    return LadderReport(
        ordering_ok=ordering,
        sign_pattern_ok=sign_ok,
        r_sign_ok=r_sign,
        theta_ok=theta_ok,
        l3_ok=l3,
        H_increasing=Hinc,
        l1_first_index=skip_one_doubling_start(lad.F_M),
        amp_exponent=amp,
        gap_exponents=gaps,
        fit_rungs=w,
    )
