"""Equation, nonlinearity family and the scalar functionals along solutions.

The equation is ``w'''' + k w'' + f(w) = 0``, written as a first-order system
in ``y = (w, w', w'', w''')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import NegativeDerivative, NonFiniteInput

PROTOTYPE = "prototype"
CUSTOM = "custom"

# theory regimes of a Problem
NONPOSITIVE = "k<=0"
BLOWUP = "0<k<=k_f"
PERIODIC = "k>k_f"


def _check_finite(value, what="input"):
    if np.ndim(value) == 0:
        if not math.isfinite(value):
            raise NonFiniteInput(f"non-finite {what}: {value!r}")
    elif not np.all(np.isfinite(value)):
        raise NonFiniteInput(f"non-finite {what}")


@dataclass(frozen=True)
class Nonlinearity:
    """Either the prototype ``alpha |t|^(q-1) t + |t|^(p-1) t`` or user callables.

    Prototype methods accept floats or numpy arrays. For custom kind, ``custom_F``
    may be omitted and is then obtained by quadrature from 0. ``p``/``q`` of a
    custom instance are optional growth exponents used only by
    :func:`check_hypotheses`.
    """

    kind: str = PROTOTYPE
    alpha: float = 1.0
    q: float = 1.0
    p: float = 3.0
    custom_f: Optional[Callable[[float], float]] = field(default=None, compare=False)
    custom_fprime: Optional[Callable[[float], float]] = field(default=None, compare=False)
    custom_F: Optional[Callable[[float], float]] = field(default=None, compare=False)
    odd: bool = True

    def __post_init__(self):
        if self.kind == PROTOTYPE:
            if not (self.alpha >= 0 and self.q >= 1 and self.p > self.q):
                raise ValueError(
                    f"prototype needs alpha >= 0 and p > q >= 1, got "
                    f"alpha={self.alpha}, q={self.q}, p={self.p}"
                )
            object.__setattr__(self, "odd", True)
        elif self.kind == CUSTOM:
            if self.custom_f is None or self.custom_fprime is None:
                raise ValueError("custom nonlinearity needs f and f'")
        else:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")

    @classmethod
    def prototype(cls, alpha=1.0, q=1.0, p=3.0):
        return cls(PROTOTYPE, float(alpha), float(q), float(p))

    @classmethod
    def custom(cls, f, fprime, F=None, odd=False, p=math.nan, q=math.nan):
        return cls(CUSTOM, math.nan, q, p, f, fprime, F, bool(odd))

    def f(self, t):
        if self.kind == CUSTOM:
            return self.custom_f(t)
        a, q, p = self.alpha, self.q, self.p
        if q == 1.0:
            return a * t + abs(t) ** (p - 1) * t
        return a * abs(t) ** (q - 1) * t + abs(t) ** (p - 1) * t

    def fprime(self, t):
        if self.kind == CUSTOM:
            return self.custom_fprime(t)
        a, q, p = self.alpha, self.q, self.p
        if q == 1.0:
            return a + p * abs(t) ** (p - 1)
        return a * q * abs(t) ** (q - 1) + p * abs(t) ** (p - 1)

    def F(self, t):
        if self.kind == CUSTOM:
            if self.custom_F is not None:
                return self.custom_F(t)
            if np.ndim(t) > 0:
                return np.vectorize(self._F_quad, otypes=[float])(t)
            return self._F_quad(t)
        a, q, p = self.alpha, self.q, self.p
        at = abs(t)
        return a * at ** (q + 1) / (q + 1) + at ** (p + 1) / (p + 1)

    def _F_quad(self, t):
        val, _ = quad(self.custom_f, 0.0, float(t), epsabs=1e-12, epsrel=1e-12, limit=200)
        return val

    def to_dict(self):
        if self.kind != PROTOTYPE:
            raise TypeError("only prototype nonlinearities serialize to JSON")
        return {"kind": PROTOTYPE, "alpha": self.alpha, "q": self.q, "p": self.p}


@dataclass(frozen=True)
class Problem:
    nl: Nonlinearity
    k: float

    def __post_init__(self):
        _check_finite(self.k, "k")

    @property
    def k_f(self):
        return k_threshold(self.nl)

    @property
    def regime(self):
        if self.k <= 0:
            return NONPOSITIVE
        if self.k <= self.k_f:
            return BLOWUP
        return PERIODIC

    def to_dict(self):
        d = self.nl.to_dict()
        d["k"] = self.k
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", PROTOTYPE)
        if kind != PROTOTYPE:
            raise ValueError(f"cannot build nonlinearity of kind {kind!r} from JSON")
        nl = Nonlinearity.prototype(d.get("alpha", 1.0), d.get("q", 1.0), d.get("p", 3.0))
        return cls(nl, float(d["k"]))

    @classmethod
    def prototype(cls, k, alpha=1.0, q=1.0, p=3.0):
        return cls(Nonlinearity.prototype(alpha, q, p), float(k))


@dataclass(frozen=True)
class State:
    s: float
    y: tuple

    def __post_init__(self):
        y = tuple(float(v) for v in self.y)
        if len(y) != 4:
            raise ValueError("state needs 4 components (w, w', w'', w''')")
        _check_finite(self.s, "abscissa")
        _check_finite(np.asarray(y), "state")
        object.__setattr__(self, "y", y)

    def array(self):
        return np.array(self.y)


def as_state(ic, s=0.0):
    if isinstance(ic, State):
        return ic
    return State(s, tuple(ic))


@dataclass(frozen=True)
class InvariantSample:
    E: float
    G: float
    H: float
    Hprime: float
    D: float
    Hbar: float


@dataclass(frozen=True)
class HypothesisReport:
    """``None`` marks a hypothesis that could not be decided (custom kind without exponents)."""

    f1: Optional[bool]
    f2int: Optional[bool]
    hextra1: Optional[bool]
    hextra2: Optional[bool]
    exact: bool

    def all_hold(self):
        return all(v is True for v in (self.f1, self.f2int, self.hextra1, self.hextra2))


def eval_nonlinearity(nl, t):
    """Return ``(f(t), f'(t), F(t))`` with ``F(0) = 0``."""
    _check_finite(t, "argument")
    return nl.f(t), nl.fprime(t), nl.F(t)


def _state_array(st):
    if isinstance(st, State):
        return np.array(st.y)
    y = np.asarray(st, dtype=float)
    if y.shape[-1] != 4:
        raise ValueError("state needs 4 components (w, w', w'', w''')")
    return y


def rhs(prob, st):
    """Vector field ``(w', w'', w''', -k w'' - f(w))``."""
    y = _state_array(st)
    _check_finite(y, "state")
    w, w1, w2, w3 = y
    return np.array([w1, w2, w3, -prob.k * w2 - prob.nl.f(w)])


def make_rhs(prob):
    """Unchecked fast vector field for the integrator inner loop."""
    k = prob.k
    f = prob.nl.f

    def field(y):
        return np.array((y[1], y[2], y[3], -k * y[2] - f(y[0])))

    return field


def fourth_derivative(prob, Y):
    Y = np.asarray(Y, dtype=float)
    return -prob.k * Y[..., 2] - prob.nl.f(Y[..., 0])


def k_threshold(nl):
    """``2 sqrt(f'(0))``, the blow-up/periodicity threshold under (hextra1)."""
    d0 = float(nl.fprime(0.0))
    if d0 < 0:
        raise NegativeDerivative(f"f'(0) = {d0} < 0; threshold undefined")
    return 2.0 * math.sqrt(d0)


def invariant_arrays(prob, Y):
    """Vectorised E, G, H, H', D, Hbar over states stacked along the first axis."""
    Y = np.asarray(Y, dtype=float)
    w, w1, w2, w3 = Y[..., 0], Y[..., 1], Y[..., 2], Y[..., 3]
    k = prob.k
    nl = prob.nl
    fw = nl.f(w)
    dfw = nl.fprime(w)
    Fw = nl.F(w)
    half_k_w1sq = 0.5 * k * w1 * w1
    return {
        "E": w1 * w3 - 0.5 * w2 * w2 + half_k_w1sq + Fw,
        "G": 0.5 * w2 * w2 + half_k_w1sq + Fw,
        "H": w2 * w3 + k * w1 * w2 + fw * w1,
        "Hprime": w3 * w3 + k * w1 * w3 + dfw * w1 * w1,
        "D": (k * k - 4.0 * dfw) * w1 * w1,
        "Hbar": w1 * w2 - w * w3 - k * w * w1,
    }


def invariants(prob, st):
    y = _state_array(st)
    _check_finite(y, "state")
    vals = invariant_arrays(prob, y)
    return InvariantSample(**{key: float(v) for key, v in vals.items()})


def energy_scale(prob, Y):
    """Sum of magnitudes of the terms of E; the natural unit for rounding in E."""
    Y = np.asarray(Y, dtype=float)
    w, w1, w2, w3 = Y[..., 0], Y[..., 1], Y[..., 2], Y[..., 3]
    return np.abs(w1 * w3) + 0.5 * w2 * w2 + 0.5 * abs(prob.k) * w1 * w1 + np.abs(prob.nl.F(w))


def default_grid(t_max=10.0, n=2001):
    return np.linspace(-t_max, t_max, n)


def check_hypotheses(nl, grid=None):
    """Which of (f1), (f2int), (hextra1), (hextra2) hold.

    Exact for the prototype family. Custom nonlinearities are sampled on
    ``grid`` (symmetric about 0); (f2int) is then only decidable when the
    growth exponent ``p`` was supplied.
    """
    if nl.kind == PROTOTYPE:
        return HypothesisReport(
            f1=True,
            f2int=True,
            hextra1=True,
            hextra2=(nl.q == 1.0 and nl.alpha > 0),
            exact=True,
        )
    t = np.asarray(default_grid() if grid is None else grid, dtype=float)
    if t.size == 0:
        raise ValueError("empty sample grid")
    nz = t[t != 0.0]
    f = np.array([nl.f(x) for x in nz])
    d = np.array([nl.fprime(x) for x in nz])
    d0 = float(nl.fprime(0.0))
    f1 = bool(np.all(f * nz > 0)) and float(nl.f(0.0)) == 0.0
    f2int = None
    if math.isfinite(nl.p):
        lower = np.min(f * nz / np.abs(nz) ** (nl.p + 1))
        f2int = bool(lower > 0)
    hextra1 = bool(d0 >= 0 and np.all(d > d0))
    return HypothesisReport(f1=f1, f2int=f2int, hextra1=hextra1, hextra2=d0 > 0, exact=False)
