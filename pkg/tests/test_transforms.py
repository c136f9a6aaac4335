import numpy as np
import pytest
from conftest import FIG_IC
from hypothesis import given
from hypothesis import strategies as st

from shb import Problem, StopPolicy, Tolerance, integrate, invariants
from shb.errors import OutOfDomain
from shb.transforms import (
    mu_residual,
    mu_to_problem,
    ode_residual,
    pull_back,
    reflect,
    shift,
    to_canonical_state,
    to_mu_state,
)

TIGHT = Tolerance(1e-12, 1e-14)


@pytest.fixture(scope="module")
def bounded_run():
    return integrate(Problem.prototype(3.5), FIG_IC, tol=TIGHT, stop=StopPolicy(s_max=10.0))


@pytest.mark.parametrize("mu,k", [(0.0, 2.0), (-3.0, 1.0), (0.75, 4.0)])
def test_mu_to_k(mu, k):
    form = mu_to_problem(mu)
    assert form.problem.k == k
    assert form.problem.nl.alpha == 1.0 and form.problem.nl.p == 3.0


def test_mu_one_branch():
    form = mu_to_problem(1.0)
    assert form.problem.k == 2.0 and form.problem.nl.alpha == 0.0
    assert form.amplitude == form.abscissa == 1.0
    assert form.problem.k_f == 0.0


@pytest.mark.parametrize("mu", [1.0 + 1e-12, 2.0, float("nan"), float("inf")])
def test_out_of_domain(mu):
    with pytest.raises(OutOfDomain):
        mu_to_problem(mu)


def test_k_increasing_in_mu():
    mus = np.concatenate([-np.geomspace(1e3, 1e-3, 40), [0.0], 1 - np.geomspace(1.0, 1e-6, 40)[1:]])
    ks = np.array([mu_to_problem(m).problem.k for m in mus])
    assert np.all(np.diff(ks) > 0)
    assert mu_to_problem(-1e-9).problem.k < 2.0 < mu_to_problem(1e-9).problem.k
    assert mu_to_problem(1 - 1e-12).problem.k > 1e6


@given(u=st.tuples(*[st.floats(-1e3, 1e3)] * 4), mu=st.floats(-100, 0.999))
def test_state_round_trip(u, mu):
    back = to_mu_state(to_canonical_state(u, mu), mu)
    np.testing.assert_allclose(back, u, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("mu", [-3.0, 0.0, 0.75])
def test_pulled_back_residual(mu):
    form = mu_to_problem(mu)
    traj = integrate(form.problem, FIG_IC, tol=TIGHT, stop=StopPolicy(s_max=10.0, escape_threshold=3.0))
    U = pull_back(traj, mu)
    x = np.linspace(U.s_start, U.s_end, 1001)[1:-1]
    assert np.max(np.abs(mu_residual(U, mu, x))) <= 1e-6
    # the state map applied node by node
    np.testing.assert_allclose(U.y, to_mu_state(traj.y, mu), rtol=1e-15)


def test_mu_zero_is_identity():
    form = mu_to_problem(0.0)
    traj = integrate(form.problem, FIG_IC, stop=StopPolicy(s_max=3.0))
    U = pull_back(traj, 0.0)
    np.testing.assert_array_equal(U.s, traj.s)
    np.testing.assert_array_equal(U.y, traj.y)


def test_reflect(bounded_run):
    prob = bounded_run.prob
    twice = reflect(reflect(bounded_run))
    np.testing.assert_array_equal(twice.s, bounded_run.s)
    np.testing.assert_array_equal(twice.y, bounded_run.y)
    r = reflect(bounded_run)
    s = np.linspace(0.0, 10.0, 51)
    np.testing.assert_allclose(r(-s)[:, 0], bounded_run(s)[:, 0], atol=0)
    data = (0.3, 0.7, -0.2, 1.1)
    traj = integrate(prob, data, stop=StopPolicy(s_max=2.0))
    H = invariants(prob, traj(0.0)).H
    assert invariants(prob, reflect(traj)(0.0)).H == -H
    x = np.linspace(-9.9, -0.1, 300)
    assert np.max(np.abs(ode_residual(r, x))) <= 1e-8


def test_shift(bounded_run):
    s0 = 3.7
    sh = shift(bounded_run, s0)
    assert sh.s_start == -s0
    x = np.linspace(0.0, 6.0, 200)
    np.testing.assert_allclose(sh(x), bounded_run(x + s0), rtol=1e-14, atol=1e-14)
    assert np.max(np.abs(ode_residual(sh, x))) <= 1e-8
