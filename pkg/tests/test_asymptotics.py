import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eflab.asymptotics import (
    NEG_INF,
    POS_INF,
    ClassifierConfig,
    GrowthClass,
    SampleSeries,
    block_envelope,
    classify_growth,
    estimate_pi,
    estimate_xi,
    format_extended,
    geometric_grid,
    read_series_csv,
    sample_function,
)
from eflab.errors import ConfigurationError, DomainError, ResolutionError


def classify(f, t_end=1e6, config=None):
    return classify_growth(sample_function(f, 1.0, t_end, config), config)


@pytest.mark.parametrize("d", [-3, -1, 0, 1, 2, 3, 0.5, -2.5])
def test_power_exponents(d):
    rep = classify(lambda t: np.power(t, float(d)))
    assert rep.growth_class is GrowthClass.S3
    assert rep.pi_hat == pytest.approx(d, abs=0.05)
    assert rep.xi_hat == pytest.approx(d, abs=0.05)
    assert rep.confident


@pytest.mark.parametrize("f,t_end,cls", [
    (lambda t: np.exp(np.sqrt(t)), 4e5, GrowthClass.S1),
    (lambda t: np.exp(t * t), 25.0, GrowthClass.S1),
    (lambda t: np.exp(-np.sqrt(t)), 4e5, GrowthClass.S2),
    (lambda t: np.exp(-t * t), 25.0, GrowthClass.S2),
])
def test_exponential_classes(f, t_end, cls):
    rep = classify(f, t_end)
    assert rep.growth_class is cls
    if cls is GrowthClass.S1:
        assert rep.pi_hat == POS_INF
    else:
        assert rep.xi_hat == NEG_INF


def test_sign_changing_function_has_infinite_lower_exponent():
    rep = classify(lambda t: t * np.sin(t))
    assert rep.growth_class is GrowthClass.S3
    assert rep.pi_hat == NEG_INF
    assert rep.xi_hat == pytest.approx(1.0, abs=0.05)


def test_bounded_oscillation_is_flat_power():
    rep = classify(lambda t: t * (2 + np.cos(t)))
    assert rep.pi_hat == pytest.approx(1.0, abs=0.05)
    assert rep.xi_hat == pytest.approx(1.0, abs=0.05)
    assert rep.confident


def test_oscillating_mix_upper_exponent_escapes():
    cfg = ClassifierConfig(block_count=8, tail_blocks=4)
    rep = classify(lambda t: t + np.exp(t) * np.cos(t), 50.0, cfg)
    assert rep.xi_hat == POS_INF
    assert rep.pi_hat == NEG_INF


def test_xi_not_below_pi_on_s3():
    rep = classify(lambda t: t ** 2 * (1.5 + np.sin(np.log(t))))
    assert rep.xi_hat >= rep.pi_hat


def test_estimate_helpers_agree_with_classifier():
    s = sample_function(lambda t: t ** 2, 1.0, 1e4)
    assert estimate_pi(s).value == pytest.approx(2.0, abs=0.05)
    assert estimate_xi(s).verdict == "finite"


def test_zero_inside_block_marks_envelope():
    t = np.linspace(1, 100, 4000)
    cfg = ClassifierConfig()
    env = block_envelope(SampleSeries(t, np.cos(t)), cfg)
    # late blocks are wider than the spacing of the zeros
    assert env.block_has_zero[-8:].all()
    assert np.all(env.block_min_abs[-8:] == cfg.zero_floor)


def test_block_needs_enough_samples():
    t = np.array([1.0, 2.0, 5.0, 10.0, 100.0])
    with pytest.raises(ResolutionError):
        classify_growth(SampleSeries(t, t))


def test_classifier_rejects_times_below_one():
    t = np.linspace(0.5, 10, 1000)
    with pytest.raises(DomainError):
        classify_growth(SampleSeries(t, t))


def test_non_finite_values_rejected():
    t = np.geomspace(1, 100, 1000)
    v = t.copy()
    v[500] = np.inf
    with pytest.raises(ResolutionError):
        classify_growth(SampleSeries(t, v))
    assert len(SampleSeries(t, v).finite_prefix()) == 500


def test_series_validation():
    with pytest.raises(ConfigurationError):
        SampleSeries([1.0, 2.0], [1.0])
    with pytest.raises(ConfigurationError):
        SampleSeries([2.0, 1.0], [1.0, 1.0])
    with pytest.raises(ConfigurationError):
        SampleSeries([], [])


@pytest.mark.parametrize("kwargs", [{"grid_ratio": 1.0}, {"block_count": 4}, {"tail_blocks": 2},
                                    {"tail_blocks": 20}, {"p_max": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        ClassifierConfig(**kwargs)


def test_format_extended():
    assert format_extended(POS_INF) == "+inf"
    assert format_extended(NEG_INF) == "-inf"
    assert format_extended(1.5) == "1.5"


def test_read_csv_with_and_without_header(tmp_path):
    t = np.geomspace(1, 1e4, 5000)
    with_header = tmp_path / "a.csv"
    with_header.write_text("time,value\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(t, t ** 3)))
    bare = tmp_path / "b.csv"
    bare.write_text("\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(t, t ** 3)))
    for p in (with_header, bare):
        rep = classify_growth(read_series_csv(p))
        assert rep.pi_hat == pytest.approx(3.0, abs=0.05)


def test_read_csv_reports_bad_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,1\n2,x\n")
    with pytest.raises(ConfigurationError, match=":2:"):
        read_series_csv(p)


@settings(max_examples=40, deadline=None)
@given(start=st.floats(1.0, 50.0), span=st.floats(1.5, 1e4), ratio=st.floats(1.0005, 1.5))
def test_geometric_grid_properties(start, span, ratio):
    end = start * span
    g = geometric_grid(start, end, ratio)
    assert g[0] == start and g[-1] == end
    assert np.all(np.diff(g) > 0)
    assert np.all(g[1:] / g[:-1] <= ratio * (1 + 1e-12))


@settings(max_examples=30, deadline=None)
@given(d=st.floats(-4.0, 4.0), k=st.sampled_from([0.5, 2.0, 10.0, -3.0, 1e-3, 1e3]))
def test_scale_invariance(d, k):
    s = sample_function(lambda t: np.power(t, d), 1.0, 1e5)
    a = classify_growth(s)
    b = classify_growth(s.scaled(k))
    assert a.growth_class is b.growth_class
    assert a.pi_hat == pytest.approx(b.pi_hat, abs=1e-9)
    assert a.xi_hat == pytest.approx(b.xi_hat, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(d=st.floats(-4.0, 4.0))
def test_power_exponent_property(d):
    rep = classify(lambda t: np.power(t, d), 1e5)
    assert abs(rep.pi_hat - d) <= 0.05 and abs(rep.xi_hat - d) <= 0.05


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3.0, 3.0), b=st.floats(-3.0, 3.0))
def test_product_adds_exponents(a, b):
    prod = classify(lambda t: np.power(t, a) * np.power(t, b), 1e5)
    assert prod.pi_hat == pytest.approx(a + b, abs=0.05)


def test_report_dict_is_plain_data():
    rep = classify(lambda t: t)
    d = rep.to_dict()
    assert d["class"] == "S3"
    assert all(isinstance(x, float) for x in d["slope_sequence_min"])
    assert not math.isnan(d["pi_hat"])
