"""Adaptive Dormand-Prince 5(4) integration with dense output and event location.

Every accepted step is stored as a segment ``[s_i, s_i + h_i]`` carrying the
free quartic interpolant

    y(s_i + theta h_i) = y_i + h_i * Q_i @ (theta, theta^2, theta^3, theta^4)

so derived trajectories (reflections, rescalings, symmetric extensions) are
obtained by transforming ``(s, y, Q)`` without re-integrating. Backward runs
integrate the reflected problem ``w(-s)`` forward and are mapped back, which
makes ``h_i`` negative.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import NoSignChange, NonFiniteInput, StepUnderflowAtStart
from .model import Problem, as_state, energy_scale, invariant_arrays, make_rhs

log = logging.getLogger(__name__)

FORWARD = "forward"
BACKWARD = "backward"

# stop reasons
S_MAX = "s_max"
ESCAPE = "escape"
UNDERFLOW = "step_underflow"
EVENT = "event"
MAX_STEPS = "max_steps"

# Dormand-Prince 5(4), Hairer-Norsett-Wanner vol. I p. 178
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = _A[6]
# 5th-order weights minus embedded 4th-order weights
_E = np.array([
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
])
# free 4th-order continuous extension; rows sum to the 5th-order weights
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_REFLECT = np.array([1.0, -1.0, 1.0, -1.0])

SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 5.0
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-10
    abs: float = 1e-12

    def __post_init__(self):
        for v in (self.rel, self.abs):
            if not (0 < v <= 1e-2):
                raise ValueError(f"tolerances must lie in (0, 1e-2], got {v}")


@dataclass(frozen=True)
class StopPolicy:
    """When to stop a run.

    ``s_max`` is measured in the integration frame: a backward run from ``s0``
    stops at ``s = -s_max``. ``max_events`` counts sign changes of the
    ``event`` passed to :func:`integrate`; ``None`` disables event stops.
    """

    s_max: float = 100.0
    escape_threshold: float = 1e8
    min_step: float = 1e-13
    max_events: Optional[int] = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.escape_threshold > 0:
            raise ValueError("escape_threshold must be positive")
        if not self.min_step > 0:
            raise ValueError("min_step must be positive")


def _powers(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([theta, theta**2, theta**3, theta**4], axis=-1)


def _dpowers(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.ones_like(theta), 2 * theta, 3 * theta**2, 4 * theta**3], axis=-1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Immutable piecewise-polynomial solution.

    ``s`` holds the ``N + 1`` step nodes (monotone in the run direction), ``y``
    the states there, ``Q`` the ``(N, 4, 4)`` interpolation coefficients and
    ``err`` the per-step scaled error estimates.
    """

    prob: Problem
    s: np.ndarray
    y: np.ndarray
    Q: np.ndarray
    err: np.ndarray
    direction: int = 1
    stop_reason: str = S_MAX
    tol: Optional[Tolerance] = None
    stop: Optional[StopPolicy] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("s", "y", "Q", "err"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def h(self):
        return np.diff(self.s)

    @property
    def n_segments(self):
        return len(self.s) - 1

    @property
    def s_start(self):
        return float(self.s[0])

    @property
    def s_end(self):
        return float(self.s[-1])

    @property
    def escape_s(self):
        return self.s_end if self.stop_reason == ESCAPE else None

    @property
    def meta(self):
        return {
            "problem": self.prob,
            "tolerance": self.tol,
            "stop": self.stop,
            "stop_reason": self.stop_reason,
            "energy_drift": energy_audit(self).max_drift,
            **self.info,
        }

    @property
    def segments(self):
        return [
            {"s_left": float(a), "s_right": float(b), "Q": q, "error": float(e)}
            for a, b, q, e in zip(self.s[:-1], self.s[1:], self.Q, self.err)
        ]

    @cached_property
    def invariants(self):
        """Arrays of E, G, H, H', D, Hbar at the nodes."""
        return invariant_arrays(self.prob, self.y)

    def is_trivial(self):
        return not np.any(self.y)

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = min(self.s[0], self.s[-1]), max(self.s[0], self.s[-1])
        span = hi - lo
        slack = 1e-14 * max(1.0, abs(lo), abs(hi))
        if np.any(s < lo - slack) or np.any(s > hi + slack):
            raise ValueError(f"abscissa outside trajectory range [{lo}, {hi}]")
        if self.n_segments == 0:
            return np.zeros(s.shape, dtype=int), np.zeros(s.shape)
        u = self.direction * self.s
        idx = np.searchsorted(u, self.direction * s, side="right") - 1
        idx = np.clip(idx, 0, self.n_segments - 1)
        h = self.s[idx + 1] - self.s[idx]
        theta = np.where(span > 0, (s - self.s[idx]) / np.where(h == 0, 1.0, h), 0.0)
        return idx, theta

    def segment_eval(self, idx, theta):
        """States inside segments ``idx`` at local coordinates ``theta``."""
        idx = np.asarray(idx)
        h = self.s[idx + 1] - self.s[idx]
        return self.y[idx] + h[..., None] * np.einsum("...ij,...j->...i", self.Q[idx], _powers(theta))

    def __call__(self, s):
        """Dense-output state(s) at ``s``; stored node states are returned verbatim."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.n_segments == 0:
            out = np.broadcast_to(self.y[0], s.shape + (4,)).copy()
        else:
            idx, theta = self._locate(s)
            out = self.segment_eval(idx, theta)
            right = self.s[idx + 1] == s
            out[right] = self.y[idx[right] + 1]
            left = self.s[idx] == s
            out[left] = self.y[idx[left]]
        return out[0] if scalar else out

    def derivative(self, s):
        """d/ds of the dense output."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx, theta = self._locate(s)
        out = np.einsum("...ij,...j->...i", self.Q[idx], _dpowers(theta))
        return out[0] if scalar else out

    def transformed(self, s_map, y_scale, prob=None, info=None):
        """Trajectory of ``x -> S * y(s)`` under the affine abscissa map ``x = s_map(s)``.

        ``y_scale`` is the diagonal ``S``; ``s_map`` must be affine. Nodes are
        mapped exactly so the node/dense-output identity is preserved.
        """
        y_scale = np.asarray(y_scale, dtype=float)
        x = np.asarray(s_map(self.s), dtype=float)
        h_old = np.diff(self.s)
        h_new = np.diff(x)
        ratio = np.divide(h_old, h_new, out=np.ones_like(h_old), where=h_new != 0)
        Q = self.Q * y_scale[None, :, None] * ratio[:, None, None]
        y = self.y * y_scale
        err = self.err
        direction = int(np.sign(x[-1] - x[0])) if len(x) > 1 and x[-1] != x[0] else self.direction
        return Trajectory(
            prob if prob is not None else self.prob,
            x, y, Q, err, direction, self.stop_reason, self.tol, self.stop,
            dict(self.info, **(info or {})),
        )

    def truncated(self, s_end):
        """Restriction to ``[s_start, s_end]``; the last segment is re-parameterised."""
        if self.direction * (s_end - self.s_start) <= 0:
            raise ValueError("truncation point must lie after the start")
        idx, theta = self._locate(np.array([s_end]))
        i, th = int(idx[0]), float(theta[0])
        if th == 0.0:
            n = i
            s = self.s[: n + 1]
            return Trajectory(self.prob, s, self.y[: n + 1], self.Q[:n], self.err[:n],
                              self.direction, self.stop_reason, self.tol, self.stop, dict(self.info))
        h = self.s[i + 1] - self.s[i]
        Qi = _truncate(self.Q[i], th)
        y_end = self.y[i] + th * h * Qi.sum(axis=1)
        s = np.append(self.s[: i + 1], s_end)
        y = np.vstack([self.y[: i + 1], y_end])
        Q = np.concatenate([self.Q[:i], Qi[None]])
        return Trajectory(self.prob, s, y, Q, self.err[: i + 1], self.direction,
                          self.stop_reason, self.tol, self.stop, dict(self.info))

    def reversed(self):
        """Same curve with nodes listed in the opposite order."""
        if self.n_segments == 0:
            return self
        s = self.s[::-1]
        y = self.y[::-1]
        # re-expand each segment about its other endpoint: p(theta) -> p(1 - phi)
        Qr = np.empty_like(self.Q)
        for i in range(self.n_segments):
            Qr[i] = _reexpand(self.Q[i])
        Qr = Qr[::-1]
        return Trajectory(self.prob, s, y, Qr, self.err[::-1], -self.direction,
                          self.stop_reason, self.tol, self.stop, dict(self.info))

    def to_csv(self, path):
        inv = self.invariants
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["s", "w", "w1", "w2", "w3", "E", "G", "H"])
            for i in range(len(self.s)):
                row = [self.s[i], *self.y[i], inv["E"][i], inv["G"][i], inv["H"][i]]
                writer.writerow([f"{float(v):.17g}" for v in row])


def _reexpand(Q):
    """Coefficients about the right endpoint.

    With ``y(theta) = y0 + h Q p(theta)``, return ``Qr`` such that
    ``y(1 - phi) = y1 + (-h) Qr p(phi)``.
    """
    # p(theta) coefficients c_k (k=1..4); expand sum c_k (1-phi)^k - sum c_k
    Qr = np.zeros_like(Q)
    for k in range(1, 5):
        c = Q[:, k - 1]
        for j in range(1, k + 1):
            Qr[:, j - 1] += c * math.comb(k, j) * (-1) ** j
    return -Qr


def concatenate(trajs, info=None):
    """Join trajectories whose end and start abscissas coincide."""
    trajs = [t for t in trajs if t.n_segments > 0]
    first = trajs[0]
    s = [first.s]
    y = [first.y]
    for prev, nxt in zip(trajs[:-1], trajs[1:]):
        if nxt.s[0] != prev.s[-1]:
            raise ValueError("trajectories are not contiguous")
        s.append(nxt.s[1:])
        y.append(nxt.y[1:])
    return Trajectory(
        first.prob,
        np.concatenate(s),
        np.concatenate(y),
        np.concatenate([t.Q for t in trajs]),
        np.concatenate([t.err for t in trajs]),
        first.direction,
        trajs[-1].stop_reason,
        first.tol,
        first.stop,
        dict(info or {}),
    )


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / 4.0)


def _initial_step(field, y0, f0, rtol, atol):
    if not np.all(np.isfinite(f0)):
        # rejections will shrink it until underflow is reported
        return 1e-6
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = field(y0 + h0 * f0)
    if not np.all(np.isfinite(f1)):
        return h0
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def _escape_theta(y0, h, Q, thr):
    """Local coordinate where |w| first reaches ``thr`` inside an accepted step."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        w = y0[0] + h * float(Q[0] @ _powers(mid))
        if abs(w) >= thr:
            hi = mid
        else:
            lo = mid
    return hi


def _truncate(Q, theta):
    return Q * np.array([theta, theta**2, theta**3, theta**4])[None, :] / theta


_EVENT_THETAS = (0.25, 0.5, 0.75, 1.0)


def integrate(
    prob: Problem,
    ic,
    direction: str = FORWARD,
    tol: Tolerance | None = None,
    stop: StopPolicy | None = None,
    event: Callable | None = None,
    fixed_step: float | None = None,
    s0: float | None = None,
) -> Trajectory:
    """Integrate from ``ic`` until ``s_max``, escape, step underflow or an event stop.

    ``ic`` is a :class:`~shb.model.State` or a 4-sequence (taken at ``s0``,
    default 0). ``event(s, y)`` is a scalar function; with
    ``stop.max_events = n`` the run ends on the step containing its n-th sign
    change. ``fixed_step`` switches error control off (order studies only).
    """
    tol = tol or Tolerance()
    stop = stop or StopPolicy()
    st = as_state(ic, 0.0 if s0 is None else s0)
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
    sign = 1 if direction == FORWARD else -1
    field_ = make_rhs(prob)
    rtol, atol = tol.rel, tol.abs
    thr = stop.escape_threshold

    # integration frame: t = sign * s, state R^{sign} y
    refl = np.ones(4) if sign == 1 else _REFLECT
    t = sign * st.s
    t_end = stop.s_max
    if not t_end > t:
        raise ValueError(f"s_max={stop.s_max} must exceed the start abscissa in the run direction")
    y = st.array() * refl

    def ev(tt, yy):
        return event(sign * tt, yy * refl)

    ts, ys, Qs, errs = [t], [y], [], []
    stop_reason = None
    f0 = field_(y)
    if abs(y[0]) >= thr:
        stop_reason = ESCAPE
    h = fixed_step if fixed_step else _initial_step(field_, y, f0, rtol, atol)
    err_old = 1e-4
    rejected = False
    n_events = 0
    ev_prev = ev(t, y) if event is not None else None
    K = np.empty((7, 4))

    while stop_reason is None:
        if len(ts) > stop.max_steps:
            stop_reason = MAX_STEPS
            break
        remaining = t_end - t
        if remaining <= 0:
            stop_reason = S_MAX
            break
        last = h >= remaining
        if last:
            h = remaining
        K[0] = f0
        for i in range(1, 7):
            K[i] = field_(y + h * (_A[i] @ K[:i]))
        y_new = y + h * (_B @ K[:6])
        ok = bool(np.all(np.isfinite(K))) and bool(np.all(np.isfinite(y_new)))
        if fixed_step:
            if not ok:
                raise NonFiniteInput("non-finite state during fixed-step run")
            errn = 0.0
        elif ok:
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            errn = _rms(h * (_E @ K) / scale)
        else:
            errn = math.inf

        if errn <= 1.0:
            Q = K.T @ _P
            t_new = t_end if last else t + h
            if abs(y_new[0]) >= thr:
                theta = _escape_theta(y, h, Q, thr)
                Q = _truncate(Q, theta)
                h = theta * h
                y_new = y + h * Q.sum(axis=1)
                t_new = t + h
                stop_reason = ESCAPE
            # the stored step t_new - t differs from h by rounding; rescale to it
            # and absorb the rounding of P's row sums so the segment ends on y_new
            h_eff = t_new - t
            Q *= h / h_eff
            Q[:, 3] += (y_new - y) / h_eff - Q.sum(axis=1)
            h = h_eff
            ts.append(t_new)
            ys.append(y_new)
            Qs.append(Q.copy())
            errs.append(errn)
            if event is not None and stop_reason is None:
                for th in _EVENT_THETAS:
                    yy = y_new if th == 1.0 else y + h * (Q @ _powers(th))
                    val = ev(t + th * h, yy)
                    if ev_prev != 0.0 and (val == 0.0 or (val > 0) != (ev_prev > 0)):
                        n_events += 1
                    ev_prev = val
                if stop.max_events is not None and n_events >= stop.max_events:
                    stop_reason = EVENT
            t, y = t_new, y_new
            f0 = K[6].copy()
            if fixed_step:
                continue
            if errn == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * errn ** (-PI_ALPHA) * err_old ** PI_BETA
                fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            err_old = max(errn, 1e-4)
            rejected = False
            h *= fac
        else:
            rejected = True
            fac = FAC_MIN if not math.isfinite(errn) else max(FAC_MIN, SAFETY * errn ** -0.2)
            h *= fac
        if h < stop.min_step * max(1.0, abs(t)) and stop_reason is None:
            if len(ts) == 1:
                raise StepUnderflowAtStart(f"no step accepted from s={st.s}")
            stop_reason = UNDERFLOW

    tt = np.array(ts)
    Y = np.array(ys) * refl
    Qa = np.array(Qs).reshape(-1, 4, 4)
    if sign == -1:
        # y(s) = R ybar(-s): nodes negate, h flips sign, hence Q -> -R Qbar
        Qa = -Qa * refl[None, :, None]
    return Trajectory(
        prob, sign * tt, Y, Qa, np.array(errs), sign, stop_reason, tol, stop,
        {"direction": direction},
    )


def locate_event(traj, event, bracket, s_tol=1e-12):
    """Root of ``event(s, y(s))`` on ``bracket`` by bisection on the dense output.

    Bisection keeps a sign-changing bracket down to width ``s_tol``; one
    guarded secant step then polishes the estimate inside the final bracket.
    """
    sa, sb = map(float, bracket)

    def g(s):
        return float(event(s, traj(s)))

    fa, fb = g(sa), g(sb)
    if fa == 0.0:
        return sa
    if fb == 0.0:
        return sb
    if (fa > 0) == (fb > 0):
        raise NoSignChange(f"event has the same sign at both ends of [{sa}, {sb}]")
    while abs(sb - sa) > s_tol:
        sm = 0.5 * (sa + sb)
        if sm in (sa, sb):
            break
        fm = g(sm)
        if fm == 0.0:
            return sm
        if (fm > 0) == (fa > 0):
            sa, fa = sm, fm
        else:
            sb, fb = sm, fm
    best_s, best_f = (sa, fa) if abs(fa) <= abs(fb) else (sb, fb)
    ss = sa - fa * (sb - sa) / (fb - fa)
    if min(sa, sb) < ss < max(sa, sb):
        fs = g(ss)
        if abs(fs) < abs(best_f):
            best_s = ss
    return best_s


def find_roots(traj, values, s_start=None, s_tol=1e-12, samples_per_step=4):
    """All sign changes of ``values(Y)`` along ``traj`` strictly after ``s_start``.

    ``values`` maps an ``(n, 4)`` state array to ``n`` scalars. Sign changes are
    detected on a sub-grid of each step and refined by vectorised bisection
    inside the owning segment, followed by a guarded secant polish.
    """
    if traj.n_segments == 0:
        return np.array([])
    n = traj.n_segments
    thetas = np.arange(samples_per_step) / samples_per_step
    seg = np.repeat(np.arange(n), samples_per_step)
    th = np.tile(thetas, n)
    Y = traj.segment_eval(seg, th)
    Y = np.vstack([Y, traj.y[-1]])
    seg = np.append(seg, n - 1)
    th = np.append(th, 1.0)
    # node samples use stored states
    node_rows = th == 0.0
    Y[node_rows] = traj.y[seg[node_rows]]
    v = np.asarray(values(Y), dtype=float)
    h = traj.s[seg + 1] - traj.s[seg]
    s_samp = traj.s[seg] + th * h
    s_samp[-1] = traj.s[-1]

    roots = list(s_samp[1:][v[1:] == 0.0])
    cross = np.nonzero((v[:-1] * v[1:]) < 0)[0]
    if cross.size:
        bseg = seg[cross]
        ta = th[cross]
        tb = np.where(seg[cross + 1] == bseg, th[cross + 1], 1.0)
        va = v[cross]
        vb = v[cross + 1]
        hb = np.abs(traj.s[bseg + 1] - traj.s[bseg])
        for _ in range(80):
            active = hb * (tb - ta) > s_tol
            if not np.any(active):
                break
            tm = 0.5 * (ta + tb)
            vm = np.asarray(values(traj.segment_eval(bseg, tm)), dtype=float)
            same = (vm > 0) == (va > 0)
            upd_a = active & same
            upd_b = active & ~same
            ta = np.where(upd_a, tm, ta)
            va = np.where(upd_a, vm, va)
            tb = np.where(upd_b, tm, tb)
            vb = np.where(upd_b, vm, vb)
        denom = np.where(vb != va, vb - va, 1.0)
        tsec = np.clip(ta - va * (tb - ta) / denom, ta, tb)
        vsec = np.asarray(values(traj.segment_eval(bseg, tsec)), dtype=float)
        best = np.where(np.abs(va) <= np.abs(vb), ta, tb)
        vbest = np.minimum(np.abs(va), np.abs(vb))
        tfin = np.where(np.abs(vsec) < vbest, tsec, best)
        roots.extend(traj.s[bseg] + tfin * (traj.s[bseg + 1] - traj.s[bseg]))
    r = np.array(sorted(roots, key=lambda x: traj.direction * x))
    if s_start is not None:
        r = r[traj.direction * (r - s_start) > 0]
    return r


@dataclass(frozen=True)
class EnergyAudit:
    max_drift: float
    argmax_s: float
    E0: float
    max_relative: float  # drift divided by 1 + the magnitude of the terms of E


def energy_audit(traj, window=None):
    """Maximum deviation of E from its initial value over the nodes (optionally within ``window``)."""
    E = traj.invariants["E"]
    E0 = float(E[0])
    dev = np.abs(E - E0)
    rel = dev / (1.0 + energy_scale(traj.prob, traj.y))
    mask = np.ones(len(dev), dtype=bool)
    if window is not None:
        lo, hi = sorted(window)
        mask = (traj.s >= lo) & (traj.s <= hi)
    if not np.any(mask):
        raise ValueError("empty audit window")
    i = int(np.argmax(np.where(mask, dev, -1.0)))
    return EnergyAudit(float(dev[i]), float(traj.s[i]), E0, float(np.max(rel[mask])))
