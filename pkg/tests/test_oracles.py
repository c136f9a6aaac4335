"""Recompute the frozen reference values with scipy (independent of the package integrator)."""

import pytest
from conftest import A_STAR_21, A_STAR_35, LIMIT_T_P3, M_35, R_PLUS_ORACLE

import oracle

pytestmark = pytest.mark.slow


def test_escape_abscissa_oracle():
    assert oracle.escape_abscissa(1.5, [0.8, 0, 0, 0]) == pytest.approx(R_PLUS_ORACLE, abs=1e-10)
    assert oracle.escape_abscissa(1.5, [0.8, 0, 0, 0], direction=-1) == pytest.approx(-R_PLUS_ORACLE, abs=1e-10)


def test_periodic_root_oracle():
    a, m = oracle.periodic_root(3.5, (1.5, 3.0))
    assert a == pytest.approx(A_STAR_35, rel=1e-11)
    assert m == pytest.approx(M_35, rel=1e-11)
    a21, _ = oracle.periodic_root(2.1, (0.2, 0.6))
    assert a21 == pytest.approx(A_STAR_21, rel=1e-11)


def test_limit_T_oracle():
    assert oracle.limit_T(3.0) == pytest.approx(LIMIT_T_P3, rel=1e-12)


def test_first_extremum_oracle():
    from test_integrator import FIRST_EXTREMUM_15

    assert oracle.first_zero(1.5, [0.8, 0, 0, 0], 1, 1) == pytest.approx(FIRST_EXTREMUM_15, abs=1e-12)
