import json
import math

import numpy as np
import pytest
from conftest import A_STAR_35, FIG_IC, R_PLUS_ORACLE
from hypothesis import assume, given
from hypothesis import strategies as st

from shb import BACKWARD, FORWARD, Problem, StopPolicy, detect_blowup, estimate_R
from shb.blowup import (
    BOUNDED,
    FINITE_ESCAPE,
    gap_model_ratio,
    in_theorem_regime,
    step6_ratio,
)
from shb.errors import InsufficientRungs, NoContraction


@pytest.fixture(scope="module")
def reports15(prob15):
    return {d: detect_blowup(prob15, FIG_IC, d) for d in (FORWARD, BACKWARD)}


def test_two_sided_escape(reports15):
    for d, sign in ((FORWARD, 1), (BACKWARD, -1)):
        rep = reports15[d]
        assert rep.verdict == FINITE_ESCAPE and rep.theorem_regime and rep.theorem_consistent
        assert rep.R_upper - rep.R_lower <= 1e-2
        assert rep.R_lower <= sign * R_PLUS_ORACLE <= rep.R_upper
        assert 0 < rep.fitted_ratio < 1
        assert rep.R_lower <= rep.escape_s <= rep.R_upper


def test_backward_equals_reflected_forward(prob15, reports15):
    refl = detect_blowup(prob15, (0.8, -0.0, 0.0, -0.0), FORWARD)
    back = reports15[BACKWARD]
    assert back.escape_s == pytest.approx(-refl.escape_s, abs=1e-8)
    assert back.R_lower == pytest.approx(-refl.R_upper, abs=1e-8)


def test_positive_H_escapes_forward():
    prob = Problem.prototype(0.5)
    rep = detect_blowup(prob, (0, 1, 1, 1), FORWARD)
    assert rep.H0 == pytest.approx(1.5)
    assert rep.verdict == FINITE_ESCAPE


def test_periodic_data_stays_bounded():
    a = A_STAR_35
    rep = detect_blowup(Problem.prototype(3.5), (0, a, 0, -3.5 * a / 2), FORWARD,
                        stop=StopPolicy(s_max=40.0))
    assert rep.verdict == BOUNDED
    assert not rep.theorem_regime


def test_zero_data_bounded(prob15):
    rep = detect_blowup(prob15, (0, 0, 0, 0), FORWARD, stop=StopPolicy(s_max=10.0))
    assert rep.verdict == BOUNDED and rep.theorem_consistent


def test_geometric_gaps_sum():
    g = 0.9 ** np.arange(80)
    m = np.concatenate([[0.0], np.cumsum(g)])
    est = estimate_R(m)
    assert est.R_upper == pytest.approx(10.0, abs=1e-9)
    assert est.fitted_ratio == pytest.approx(0.9, abs=1e-12)


def test_no_contraction_and_short_input():
    with pytest.raises(NoContraction):
        estimate_R(np.arange(10.0))
    with pytest.raises(NoContraction):
        estimate_R(np.cumsum(1.1 ** np.arange(10)))
    with pytest.raises(InsufficientRungs):
        estimate_R([0.0, 1.0])


@given(rho=st.floats(0.05, 0.95), g0=st.floats(1e-3, 10), start=st.floats(-50, 50), n=st.integers(3, 30))
def test_geometric_tail_recovered(rho, g0, start, n):
    limit = start + g0 / (1 - rho)
    # gaps must stay resolvable as differences of abscissas
    assume(g0 * rho ** (n - 1) > 1e-6 * (abs(start) + g0 / (1 - rho)))
    m = start + np.concatenate([[0.0], np.cumsum(g0 * rho ** np.arange(n))])
    est = estimate_R(m)
    assert est.fitted_ratio == pytest.approx(rho, rel=1e-7)
    assert est.R_upper == pytest.approx(limit, rel=1e-9, abs=1e-8 * abs(limit) + 1e-9 * g0)
    back = estimate_R(-m)
    assert back.R_lower == pytest.approx(-est.R_upper, rel=1e-12)


def test_step6_ratio():
    assert step6_ratio(3.0) == pytest.approx(2 ** (-1 / 8), rel=1e-15)
    assert step6_ratio(3.0) == pytest.approx(0.9170, abs=1e-4)


def test_gap_model_ratio_contracts(ladder15):
    assert gap_model_ratio(ladder15, 3.0) < 1


def test_theorem_regime_flag():
    assert in_theorem_regime(Problem.prototype(2.0))
    assert not in_theorem_regime(Problem.prototype(2.5))
    assert not in_theorem_regime(Problem.prototype(-1.0))
    # q > 1 loses (hextra2)
    assert not in_theorem_regime(Problem.prototype(0.0 + 1e-3, alpha=1.0, q=2.0, p=3.0))


def test_json_export(tmp_path, reports15):
    path = tmp_path / "b.json"
    reports15[FORWARD].to_json(path)
    d = json.loads(path.read_text())
    assert set(d) == {"direction", "verdict", "R_lower", "R_upper", "fitted_ratio",
                      "theorem_regime", "fit_residual"}
    assert d["verdict"] == FINITE_ESCAPE and d["direction"] == FORWARD
    assert all(not isinstance(v, float) or math.isfinite(v) for v in d.values())
