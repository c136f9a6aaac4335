"""Run classification and escape-abscissa estimation.

For ``0 < k <= k_f`` every nontrivial solution escapes in finite space to the
right when ``H(0) >= 0`` and to the left when ``H(0) <= 0``. Near the escape
point the distance between consecutive extrema contracts geometrically, so the
remaining distance is bounded by a geometric tail fitted to the last gaps.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientRungs, NoCompleteRung, NoContraction, TrivialSolution
from .integrator import BACKWARD, ESCAPE, FORWARD, S_MAX, StopPolicy, Tolerance, integrate
from .ladder import extract_ladder
from .model import BLOWUP, as_state, check_hypotheses, invariants

log = logging.getLogger(__name__)

FINITE_ESCAPE = "finite_escape"
BOUNDED = "bounded_to_horizon"
INCONCLUSIVE = "inconclusive"

GAP_FIT_RUNGS = 6


def step6_ratio(p):
    """Contraction factor ``2^((1-p)/(4(p+1)))`` of the tail series bounding R."""
    return 2.0 ** ((1.0 - p) / (4.0 * (p + 1.0)))


@dataclass(frozen=True)
class REstimate:
    R_lower: float
    R_upper: float
    fitted_ratio: float
    residual: float
    n_gaps: int


def _extrema(lad):
    if hasattr(lad, "m"):
        return np.asarray(lad.m, dtype=float), int(getattr(lad, "direction", 1))
    m = np.asarray(lad, dtype=float)
    direction = 1 if len(m) < 2 or m[-1] >= m[0] else -1
    return m, direction


def fit_gap_ratio(gaps, n_fit=GAP_FIT_RUNGS):
    """Geometric ratio of the last ``n_fit`` gaps by least squares on log-gaps."""
    g = np.asarray(gaps, dtype=float)[-n_fit:]
    if np.any(g <= 0):
        raise NoContraction("non-positive gap in the fit window")
    l = np.arange(len(g), dtype=float)
    A = np.vstack([l, np.ones_like(l)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(g), rcond=None)
    resid = np.log(g) - A @ coef
    return math.exp(coef[0]), float(np.sqrt(np.mean(resid**2)))


def estimate_R(lad, n_fit=GAP_FIT_RUNGS):
    """Bracket the escape abscissa from the extremum abscissas of a ladder.

    Accepts a :class:`~shb.ladder.Ladder` or a monotone sequence of extremum
    abscissas. ``R_upper = last m + g_last * rho / (1 - rho)`` with ``rho``
    the fitted gap ratio. For backward runs the bracket is returned in the
    original coordinates, so ``R_lower <= R_upper`` still holds.
    """
    m, d = _extrema(lad)
    if len(m) < 3:
        raise InsufficientRungs(f"{len(m)} extrema; the gap fit needs at least 3")
    u = d * m
    g = np.diff(u)
    rho, resid = fit_gap_ratio(g, n_fit)
    # equal gaps can fit to 1 - eps in floating point
    if not rho < 1.0 - 1e-12:
        raise NoContraction(f"fitted gap ratio {rho:.6g} >= 1")
    lo = float(u[-1])
    hi = lo + float(g[-1]) * rho / (1.0 - rho)
    if d < 0:
        lo, hi = -hi, -lo
    return REstimate(lo, hi, rho, resid, min(n_fit, len(g)))


def gap_model_ratio(lad, p):
    """Ratio of the gap model ``F(M_j)^((1-p)/(4(p+1)))`` fitted over the last rungs."""
    model = np.asarray(lad.F_M, dtype=float) ** ((1.0 - p) / (4.0 * (p + 1.0)))
    return fit_gap_ratio(model)[0]


@dataclass(frozen=True)
class BlowupReport:
    direction: str
    verdict: str
    R_lower: float
    R_upper: float
    fitted_ratio: float
    theorem_regime: bool
    escape_s: Optional[float] = None
    H0: float = math.nan
    fit_residual: float = math.nan
    n_extrema: int = 0
    stop_reason: str = ""
    theorem_consistent: bool = True
    fit_error: str = ""  # exception name when the tail fit was not possible

    def to_dict(self):
        keys = ("direction", "verdict", "R_lower", "R_upper", "fitted_ratio",
                "theorem_regime", "fit_residual")
        d = asdict(self)
        return {key: _json_float(d[key]) for key in keys}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def in_theorem_regime(prob):
    return prob.regime == BLOWUP and check_hypotheses(prob.nl).all_hold()


def _amplitudes_diverging(lad, n_fit=GAP_FIT_RUNGS):
    M = lad.M[-n_fit:]
    return len(M) >= 3 and bool(np.all(np.diff(M) > 0))


def detect_blowup(prob, ic, direction=FORWARD, tol=None, stop=None):
    """Integrate in one direction and classify the run.

    ``finite_escape`` needs either the escape threshold to be hit or a
    contracting gap fit with growing amplitudes, plus a successful fit of the
    tail. Runs reaching ``s_max`` without diverging amplitudes are
    ``bounded_to_horizon``; everything else is ``inconclusive``.
    """
    tol = tol or Tolerance()
    stop = stop or StopPolicy()
    st = as_state(ic)
    H0 = invariants(prob, st).H
    regime = in_theorem_regime(prob)
    traj = integrate(prob, st, direction, tol, stop)

    lad = None
    est = None
    fit_error = ""
    try:
        lad = extract_ladder(traj, st.s)
        est = estimate_R(lad)
    except (NoCompleteRung, InsufficientRungs, NoContraction, TrivialSolution) as exc:
        log.info("no tail estimate: %s", exc)
        fit_error = type(exc).__name__

    n_ext = 0 if lad is None else len(lad.m)
    diverging = lad is not None and _amplitudes_diverging(lad)
    if traj.stop_reason == ESCAPE and est is not None:
        verdict = FINITE_ESCAPE
    elif traj.stop_reason == S_MAX and not (est is not None and diverging):
        verdict = BOUNDED
    elif traj.stop_reason not in (ESCAPE, S_MAX) and est is not None and diverging:
        verdict = FINITE_ESCAPE
    else:
        verdict = INCONCLUSIVE

    nontrivial = any(v != 0.0 for v in st.y)
    expected = regime and nontrivial and ((direction == FORWARD and H0 >= 0) or (direction == BACKWARD and H0 <= 0))
    consistent = verdict == FINITE_ESCAPE or not expected
    if not consistent:
        log.warning("theorem regime with H(0)=%g predicts finite escape %s, got %s",
                    H0, direction, verdict)
    if est is None:
        R_lo = R_hi = traj.escape_s if traj.escape_s is not None else math.nan
        ratio = resid = math.nan
    else:
        R_lo, R_hi, ratio, resid = est.R_lower, est.R_upper, est.fitted_ratio, est.residual
    if verdict != FINITE_ESCAPE:
        # a tail estimate without an escape verdict is not a claim about R
        R_lo = R_hi = math.nan
    return BlowupReport(
        direction=direction,
        verdict=verdict,
        R_lower=R_lo,
        R_upper=R_hi,
        fitted_ratio=ratio,
        theorem_regime=regime,
        escape_s=traj.escape_s,
        H0=H0,
        fit_residual=resid,
        n_extrema=n_ext,
        stop_reason=traj.stop_reason,
        theorem_consistent=consistent,
        fit_error=fit_error,
    )


def detect_blowup_both(prob, ic, tol=None, stop=None):
    return (detect_blowup(prob, ic, FORWARD, tol, stop),
            detect_blowup(prob, ic, BACKWARD, tol, stop))
