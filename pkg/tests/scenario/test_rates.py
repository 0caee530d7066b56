import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lineage_lab.scenario import (
    ConstantRate,
    PolynomialRate,
    TableRate,
    TentsRate,
    WellRate,
    build_rate_function,
)


def test_constant_rate_scalar_and_array():
    rate = ConstantRate(0.5)
    assert rate(3.0) == 0.5
    np.testing.assert_array_equal(rate(np.zeros(4)), np.full(4, 0.5))


def test_polynomial_rate_clamps():
    rate = PolynomialRate((0.5, 0.0, 1.0), clamp_radius=5.0)
    assert rate(2.0) == pytest.approx(4.5)
    assert rate(-9.0) == pytest.approx(25.5)
    assert rate.breakpoints() == [-5.0, 5.0]


def test_tents_rate_takes_the_maximum():
    rate = TentsRate(((0.5, 2.0, -2.0), (-0.4, 2.0, 2.0)))
    assert rate(-2.0) == pytest.approx(0.5)
    assert rate(2.0) == pytest.approx(-0.4)
    assert rate(0.0) == pytest.approx(max(0.5 - 4.0, -0.4 - 4.0))
    assert rate.side_caps(2.0) == pytest.approx((4.5, 3.6))


def test_tents_rate_side_caps_need_steep_slopes():
    with pytest.raises(ValueError):
        TentsRate(((1.0, 0.5, 0.0),)).side_caps(1.0)
    with pytest.raises(ValueError):
        TentsRate(())


def test_table_rate_interpolates_and_extends_flat():
    rate = TableRate(((0.0, 1.0), (1.0, 3.0)))
    assert rate(0.5) == pytest.approx(2.0)
    assert rate(-4.0) == 1.0
    assert rate(9.0) == 3.0
    with pytest.raises(ValueError):
        TableRate(((1.0, 0.0), (0.0, 1.0)))


def test_well_rate_plateaus():
    rate = WellRate(outer=0.7, inner=2.0, half_width=1.0, width=0.1)
    assert rate(0.0) == pytest.approx(2.0)
    assert rate(0.94) == pytest.approx(2.0)
    assert rate(1.06) == pytest.approx(0.7)
    assert rate(-3.0) == pytest.approx(0.7)
    assert rate(1.0) == pytest.approx(1.35)


@given(st.floats(min_value=-3.0, max_value=3.0, allow_nan=False))
def test_well_rate_stays_between_levels(x):
    value = WellRate(outer=0.7, inner=2.0, half_width=1.0, width=0.1)(x)
    assert 0.7 - 1e-12 <= value <= 2.0 + 1e-12


def test_well_rate_is_continuous():
    rate = WellRate(outer=0.7, inner=2.0, half_width=1.0, width=0.1)
    x = np.linspace(-2, 2, 40_001)
    assert np.max(np.abs(np.diff(rate(x)))) < 0.01


def test_build_rate_function_from_config_values():
    assert build_rate_function(0.25) == ConstantRate(0.25)
    rate = build_rate_function({"kind": "polynomial", "coefficients": [1, 0, -1]})
    assert rate(2.0) == pytest.approx(-3.0)
    tents = build_rate_function({"kind": "tents", "tents": [[1, 1, 0]]})
    assert tents(0.5) == pytest.approx(0.5)
    well = build_rate_function({"kind": "well", "outer": 0.0, "inner": 1.0, "half_width": 2.0})
    assert well(0.0) == pytest.approx(1.0)
    existing = ConstantRate(1.0)
    assert build_rate_function(existing) is existing


@pytest.mark.parametrize(
    "spec",
    [
        "1.0",
        {"value": 1.0},
        {"kind": "spline", "knots": []},
        {"kind": "constant", "level": 1.0},
    ],
)
def test_build_rate_function_rejects_bad_specs(spec):
    with pytest.raises(ValueError):
        build_rate_function(spec)


def test_describe_names_kind_and_parameters():
    assert ConstantRate(0.5).describe() == {"kind": "constant", "value": 0.5}
    assert PolynomialRate((1.0,)).describe()["kind"] == "polynomial"
