import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eflab.asymptotics import ClassifierConfig, GrowthClass, POS_INF, classify_growth, sample_function
from eflab.equations import (
    PHI_TAGS,
    AssumptionParams,
    EFEquation,
    PhiSpec,
    check_assumption_i,
    check_assumption_ii,
    power_law_solution,
    thomas_fermi_equation,
    thomas_fermi_preset,
)
from eflab.errors import ConfigurationError, ConstructionError, DomainError


def tf_rhs(t, y):
    return np.power(t, -0.5) * np.abs(y) ** 1.5 * np.sign(y)


def test_thomas_fermi_power_law_amplitude():
    # 12 C = C^{3/2} gives C = 144
    sol = power_law_solution(2, -0.5, 1.5, 1.0)
    assert sol.C == pytest.approx(144.0, rel=1e-12)
    assert sol.m == -3.0
    assert sol.initial_state(1.0) == pytest.approx((144.0, -432.0))


@pytest.mark.parametrize("n,sigma,lam,phi0", [(2, -0.5, 1.5, 1.0), (2, 0.0, 3.0, 1.0), (1, 0.0, 2.0, -1.0),
                                              (3, 1.0, 2.0, -1.0), (2, 1.0, 4.0, 1.0)])
def test_power_law_solution_residual(n, sigma, lam, phi0):
    sol = power_law_solution(n, sigma, lam, phi0)
    for t in (1.0, 3.0, 50.0, 1e4):
        assert sol.residual(t) < 1e-10


def test_power_law_solution_without_real_amplitude():
    with pytest.raises(ConstructionError):
        power_law_solution(1, 0.0, 2.0, 1.0)


def test_power_law_solution_validation():
    with pytest.raises(ConfigurationError):
        power_law_solution(2, 0.0, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        power_law_solution(2, -3.0, 2.0, 1.0)


def test_negative_branch_is_also_a_solution():
    sol = power_law_solution(2, -0.5, 1.5, 1.0, sign=-1)
    assert sol.value(2.0) == pytest.approx(-144.0 / 8)
    assert sol.residual(7.0) < 1e-10


@pytest.mark.parametrize("tag", PHI_TAGS)
def test_phi_tags_build(tag):
    phi = PhiSpec.from_tag(tag)
    assert phi.tag == tag
    assert np.isfinite(phi(np.array([1.0, 2.0]))).all()


def test_unknown_tag_rejected():
    with pytest.raises(ConfigurationError, match="unknown phi tag"):
        PhiSpec.from_tag("gaussian")


def test_singular_phi_rejected_at_origin():
    eq = thomas_fermi_equation()
    with pytest.raises(DomainError):
        eq.problem(0.0, (1.0, 0.0))
    with pytest.raises(DomainError):
        thomas_fermi_preset().problem((1.0, 0.0), t0=0.5)


def test_phi_scalar_domain_check():
    with pytest.raises(DomainError):
        PhiSpec.power(1.0, -0.5)(0.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.5, 100.0), y=st.floats(-1e3, 1e3), lam=st.floats(1.01, 4.0))
def test_rhs_is_odd_in_y(t, y, lam):
    rhs = EFEquation(2, PhiSpec.power(2.0, -0.5), lam).rhs()
    assert rhs(t, -y) == -rhs(t, y)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1.0, 100.0), y=st.floats(-10.0, 10.0))
def test_rhs_scalar_and_vector_paths_agree(t, y):
    rhs = thomas_fermi_equation().rhs()
    vec = rhs(np.array([t]), np.array([y]))[0]
    assert rhs(t, y) == pytest.approx(vec, rel=1e-15, abs=0)


def test_equation_validation():
    with pytest.raises(ConfigurationError):
        EFEquation(0, PhiSpec.power(), 2.0)
    with pytest.raises(ConfigurationError):
        EFEquation(1, PhiSpec.power(), -1.0)
    assert thomas_fermi_equation().superlinear
    assert not EFEquation(1, PhiSpec.power(), 0.5).superlinear


def test_known_exponents_match_classifier():
    cfg = ClassifierConfig()
    for phi in (PhiSpec.power(1.0, -0.5), PhiSpec.power(3.0, 2.0), PhiSpec.bounded_oscillation()):
        rep = classify_growth(phi.sample(None, cfg), cfg)
        assert rep.pi_hat == pytest.approx(phi.known_pi, abs=0.05)
        assert rep.xi_hat == pytest.approx(phi.known_xi, abs=0.05)
    assert PhiSpec.oscillating_mix().known_pi is None
    assert PhiSpec.oscillating_mix().known_xi == POS_INF


def test_assumption_i_holds_for_thomas_fermi():
    rep = check_assumption_i(tf_rhs, 1.25)
    assert rep.passed
    assert any(e.status == "PASS" for e in rep.entries)
    assert "not a proof" in rep.caveat


def test_assumption_i_fails_for_linear_rhs():
    rep = check_assumption_i(lambda t, y: 2.0 * y, 1.5)
    assert not rep.passed


def test_assumption_i_empty_corpus_warns():
    rep = check_assumption_i(tf_rhs, 1.25, corpus=[])
    assert rep.passed and rep.warnings


def test_assumption_ii_holds_for_thomas_fermi():
    rep = check_assumption_ii(tf_rhs, AssumptionParams(1.25, 1.5, -0.5), 2)
    assert rep.passed
    margins = [e.margin for e in rep.entries if e.margin is not None]
    assert margins and min(margins) >= -0.1


def test_assumption_ii_fails_for_exponential_coefficient():
    rep = check_assumption_ii(lambda t, y: np.exp(t) * y, AssumptionParams(1.5, 1.5, 0.0), 2)
    assert not rep.passed
    assert any(e.growth_class == GrowthClass.S1.value for e in rep.entries)


def test_assumption_params_validation():
    with pytest.raises(ConfigurationError):
        AssumptionParams(1.0, 1.5, 0.0).validate(2)
    with pytest.raises(ConfigurationError):
        AssumptionParams(1.5, 1.5, -2.0).validate(2)


def test_phi_sample_respects_horizon():
    phi = PhiSpec.exp_quadratic(1)
    s = phi.sample(1e6)
    assert s.times[-1] == phi.horizon
    assert np.all(np.isfinite(s.values))


def test_power_law_sampled_exponent_is_bound():
    sol = power_law_solution(2, 0.0, 3.0, 1.0)
    rep = classify_growth(sample_function(sol.value, 1.0, 1e6))
    assert rep.pi_hat == pytest.approx(-1.0, abs=0.1)
    assert not math.isnan(rep.xi_hat)
