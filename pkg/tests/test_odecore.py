import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eflab.asymptotics import SampleSeries
from eflab.equations import EFEquation, PhiSpec, thomas_fermi_equation
from eflab.errors import ConfigurationError, DomainError
from eflab.odecore import (
    BlowUp,
    IntegrationControls,
    IVProblem,
    ReachedEnd,
    StepFailure,
    fixed_step_solve,
    integrate,
    resample,
    sign_changes,
    status_to_dict,
)


def harmonic(t0=0.0, init=(0.0, 1.0)):
    return IVProblem(2, lambda t, y: -y, t0, init, "harmonic")


def test_harmonic_oscillator_matches_sine():
    traj = integrate(harmonic(), IntegrationControls(t_end=20.0, rtol=1e-10, atol=1e-12))
    assert isinstance(traj.status, ReachedEnd)
    grid = np.linspace(0, 20, 401)
    vals = traj.evaluate(grid)
    assert np.max(np.abs(vals[:, 0] - np.sin(grid))) < 1e-8
    assert np.max(np.abs(vals[:, 1] - np.cos(grid))) < 1e-8


def test_evaluate_returns_stored_states_at_knots():
    traj = integrate(harmonic(), IntegrationControls(t_end=5.0))
    np.testing.assert_array_equal(traj.evaluate(traj.times), traj.states)


def test_evaluate_outside_domain_raises():
    traj = integrate(harmonic(), IntegrationControls(t_end=5.0))
    with pytest.raises(DomainError):
        traj.evaluate([6.0])


def test_riccati_blowup_time():
    traj = integrate(IVProblem(1, lambda t, y: y * y, 0.0, (1.0,)), IntegrationControls(t_end=2.0))
    assert isinstance(traj.status, BlowUp)
    assert abs(traj.status.t_star - 1.0) < 1e-6


@pytest.mark.parametrize("y0", [0.5, 2.0, 0.1, -0.5])
def test_odd_riccati_blows_up_at_reciprocal(y0):
    # y' = |y| y escapes for either sign of y0 at t* = 1/|y0|
    eq = EFEquation(1, PhiSpec.power(1.0, 0.0), 2.0)
    traj = integrate(eq.problem(0.0, (y0,)), IntegrationControls(t_end=100.0))
    assert isinstance(traj.status, BlowUp)
    assert traj.status.t_star == pytest.approx(1 / abs(y0), rel=1e-6)


def test_decaying_riccati_reaches_end():
    eq = EFEquation(1, PhiSpec.power(-1.0, 0.0), 2.0)
    traj = integrate(eq.problem(0.0, (1.0,)), IntegrationControls(t_end=50.0))
    assert isinstance(traj.status, ReachedEnd)
    assert traj.states[-1, 0] == pytest.approx(1 / 51.0, rel=1e-7)


def test_thomas_fermi_log_time_route_is_exact():
    p = thomas_fermi_equation().problem(1.0, (144.0, -432.0))
    traj = integrate(p, IntegrationControls(t_end=100.0))
    assert traj.method == "log_time"
    grid = np.geomspace(1, 100, 300)
    rel = np.abs(traj.evaluate(grid)[:, 0] * grid ** 3 / 144 - 1)
    assert rel.max() < 1e-9


def test_thomas_fermi_direct_and_log_time_agree_on_blowup():
    p = thomas_fermi_equation().problem(1.0, (1.0, 0.0))
    ctl = IntegrationControls(t_end=100.0)
    a = integrate(p, ctl, method="direct")
    b = integrate(p, ctl, method="log_time")
    assert isinstance(a.status, BlowUp) and isinstance(b.status, BlowUp)
    assert a.status.t_star == pytest.approx(b.status.t_star, rel=1e-7)


def test_step_failure_reported_for_tiny_min_step_bound():
    ctl = IntegrationControls(t_end=2.0, min_step=1e-3, blowup_threshold=1e300)
    traj = integrate(IVProblem(1, lambda t, y: y * y, 0.0, (1.0,)), ctl)
    assert isinstance(traj.status, StepFailure)
    assert traj.status.t_fail < 1.0
    assert status_to_dict(traj.status)["kind"] == "step_failure"


def test_rhs_failure_is_not_a_crash():
    def rhs(t, y):
        if t > 1.0:
            raise ValueError("outside model")
        return 0.0
    traj = integrate(IVProblem(1, rhs, 0.0, (1.0,)), IntegrationControls(t_end=2.0))
    assert isinstance(traj.status, StepFailure)


@pytest.mark.parametrize("kwargs", [
    {"t_end": 1.0, "rtol": 0.0},
    {"t_end": 1.0, "atol": -1.0},
    {"t_end": 0.0},
    {"t_end": math.nan},
])
def test_invalid_controls_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        integrate(harmonic(), IntegrationControls(**kwargs))


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        IVProblem(2, lambda t, y: 0.0, 0.0, (1.0,))
    with pytest.raises(ConfigurationError):
        IVProblem(1, lambda t, y: 0.0, 0.0, (math.inf,))


def test_fixed_step_convergence_order():
    errs = []
    steps = (0.4, 0.2, 0.1)
    for h in steps:
        y = fixed_step_solve(harmonic(), h, 4.0)
        errs.append(np.max(np.abs(y - [math.sin(4.0), math.cos(4.0)])))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope >= 4.5


def test_energy_conserved_for_cubic_oscillator():
    p = EFEquation(2, PhiSpec.power(-1.0, 0.0), 3.0).problem(0.0, (1.0, 0.0))
    traj = integrate(p, IntegrationControls(t_end=100.0))
    e = 0.5 * traj.states[:, 1] ** 2 + 0.25 * traj.states[:, 0] ** 4
    assert np.max(np.abs(e - e[0])) < 1e-6


def test_resample_derivative_consistency():
    traj = integrate(harmonic(), IntegrationControls(t_end=10.0, rtol=1e-10))
    grid = np.linspace(1, 9, 2001)
    y = resample(traj, grid, 0).values
    dy = resample(traj, grid, 1).values
    fd = np.gradient(y, grid)
    assert np.max(np.abs(fd[1:-1] - dy[1:-1])) < 1e-4


def test_resample_rejects_bad_index():
    traj = integrate(harmonic(), IntegrationControls(t_end=1.0))
    with pytest.raises(ConfigurationError):
        resample(traj, [0.5], 2)


def test_sign_changes_of_sine():
    t = np.linspace(0.1, 10, 5000)
    z = sign_changes(SampleSeries(t, np.sin(t)))
    np.testing.assert_allclose(z, [math.pi, 2 * math.pi, 3 * math.pi], atol=1e-5)


def test_sign_changes_counts_exact_zeros():
    z = sign_changes(SampleSeries([1.0, 2.0, 3.0], [1.0, 0.0, 1.0]))
    assert list(z) == [2.0]


@settings(max_examples=25, deadline=None)
@given(y0=st.floats(0.1, 3.0), v0=st.floats(-2.0, 2.0))
def test_odd_symmetry_of_trajectories(y0, v0):
    eq = EFEquation(2, PhiSpec.power(-1.0, 0.0), 3.0)
    ctl = IntegrationControls(t_end=5.0, rtol=1e-10)
    a = integrate(eq.problem(0.0, (y0, v0)), ctl)
    b = integrate(eq.problem(0.0, (-y0, -v0)), ctl)
    grid = np.linspace(0, 5, 50)
    np.testing.assert_allclose(a.evaluate(grid), -b.evaluate(grid), rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.1, 5.0))
def test_exponential_growth_accuracy(c):
    traj = integrate(IVProblem(1, lambda t, y: c * y, 0.0, (1.0,)),
                     IntegrationControls(t_end=2.0, rtol=1e-10))
    assert traj.states[-1, 0] == pytest.approx(math.exp(2 * c), rel=1e-7)
