"""Independent reference computations with scipy's DOP853.

They share nothing with the package integrator and are used to derive the
frozen reference values in the tests (and, under ``-m slow``, to recompute
them).
"""

from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def _field(k, alpha=1.0, p=3.0):
    def f(s, y):
        w = y[0]
        return [y[1], y[2], y[3], -k * y[2] - alpha * w - abs(w) ** (p - 1) * w]

    return f


def escape_abscissa(k, ic, threshold=1e8, rtol=1e-13, atol=1e-14, direction=1):
    def hit(s, y):
        return abs(y[0]) - threshold

    hit.terminal = True
    sol = solve_ivp(_field(k), (0.0, direction * 100.0), ic, method="DOP853",
                    rtol=rtol, atol=atol, events=hit)
    return float(sol.t_events[0][0])


def shooting_phi(k, a, rtol=1e-13, atol=1e-15, alpha=1.0, p=3.0):
    def crit(s, y):
        return y[1]

    crit.terminal = True
    crit.direction = -1
    sol = solve_ivp(_field(k, alpha, p), (0.0, 1e3), [0.0, a, 0.0, -k * a / 2], method="DOP853",
                    rtol=rtol, atol=atol, events=crit, dense_output=True)
    m = float(sol.t_events[0][0])
    return float(sol.y_events[0][0][3]), m


def periodic_root(k, bracket):
    a = brentq(lambda a: shooting_phi(k, a)[0], *bracket, xtol=1e-14, rtol=1e-15)
    return a, shooting_phi(k, a)[1]


def limit_T(p=3.0):
    def crit(s, y):
        return y[1]

    crit.terminal = True
    crit.direction = -1
    sol = solve_ivp(_field(0.0, 0.0, p), (0.0, 100.0), [0.0, 1.0, 0.0, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-15, events=crit)
    return float(sol.t_events[0][0])


def first_zero(k, ic, component, crossing, rtol=1e-13, atol=1e-15):
    """First abscissa after 0 where ``y[component]`` crosses zero in the given direction."""

    def ev(s, y):
        return y[component]

    ev.terminal = True
    ev.direction = crossing
    sol = solve_ivp(_field(k), (0.0, 100.0), ic, method="DOP853", rtol=rtol, atol=atol, events=ev)
    return float(sol.t_events[0][0])
