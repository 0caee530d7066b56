import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lineage_lab.functional import (
    GridPath,
    Interpolation,
    modulus_of_continuity,
    skorohod_radius,
    sup_distance,
)


def step_path(times, values):
    return GridPath(np.array(times, dtype=float), np.array(values, dtype=float), Interpolation.PIECEWISE_CONSTANT)


@pytest.mark.parametrize(
    "times, values",
    [
        ([], []),
        ([0.0, 1.0], [0.0]),
        ([0.0, 0.0], [1.0, 2.0]),
        ([0.0, 1.0], [0.0, math.nan]),
    ],
)
def test_invalid_paths_are_rejected(times, values):
    with pytest.raises(ValueError):
        GridPath(np.array(times, dtype=float), np.array(values, dtype=float))


def test_arrays_are_read_only():
    path = GridPath.uniform(0.0, 0.5, [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        path.values[0] = 3.0
    assert path.dt == 0.5
    assert path.n_segments == 2
    assert path.t_end == 1.0


def test_from_function_covers_interval_with_short_last_step():
    path = GridPath.from_function(np.sin, 0.0, 1.0, 0.3)
    assert path.t_end == 1.0
    assert path.times.size == 5
    assert path.values[-1] == pytest.approx(math.sin(1.0))
    assert not path.is_uniform


def test_piecewise_constant_is_right_continuous():
    path = step_path([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])
    assert path.value_at(1.0) == 1.0
    assert path.left_limit(1.0) == 0.0
    assert path.left_limit(0.0) == 0.0
    assert path.value_at(0.999) == 0.0
    assert path.has_jumps


def test_value_at_outside_domain_raises():
    path = GridPath.constant(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        path.value_at(1.5)


def test_restrict_adds_a_node():
    path = GridPath.straight(0.0, 2.0, 0.0, 1.0, 4)
    head = path.restrict(0.6)
    assert head.t_end == pytest.approx(0.6)
    assert head.values[-1] == pytest.approx(1.2)
    assert path.restrict(0.5).times.size == 3


def test_reversed_linear_path():
    path = GridPath.straight(0.0, 2.0, 0.0, 1.0, 4)
    back = path.reversed()
    np.testing.assert_allclose(back.values, path.values[::-1])
    assert back.t0 == 0.0
    with pytest.raises(ValueError):
        step_path([0.0, 1.0], [0.0, 1.0]).reversed()


def test_sup_distance_uses_one_sided_limits():
    lineage = step_path([0.0, 0.5, 1.0], [0.0, 1.0, 1.0])
    reference = GridPath.straight(0.0, 1.0, 0.0, 1.0, 1)
    # just before the jump the lineage is at 0 while the reference is at 0.5
    assert sup_distance(lineage, reference) == pytest.approx(0.5)
    assert sup_distance(reference, lineage) == pytest.approx(0.5)


def test_sup_distance_common_interval_only():
    short = GridPath.constant(0.0, 0.0, 0.5)
    long = GridPath.straight(0.0, 4.0, 0.0, 1.0, 1)
    assert sup_distance(short, long) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        sup_distance(GridPath.constant(0.0, 0.0, 1.0), GridPath.constant(0.0, 2.0, 3.0))


@given(
    st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=2, max_size=12),
    st.floats(min_value=-5, max_value=5, allow_nan=False),
)
def test_sup_distance_dominates_node_gaps(values, shift):
    path = GridPath.uniform(0.0, 0.1, values)
    other = GridPath.uniform(0.0, 0.1, np.asarray(values) + shift)
    assert sup_distance(path, other) == pytest.approx(abs(shift), abs=1e-9)
    assert sup_distance(path, path) == 0.0


def test_modulus_of_continuity_of_line():
    path = GridPath.straight(0.0, 2.0, 0.0, 1.0, 8)
    assert modulus_of_continuity(path, 0.25) == pytest.approx(0.5, rel=1e-9)
    assert modulus_of_continuity(path, 5.0) == pytest.approx(2.0)
    assert modulus_of_continuity(path, 0.0) == 0.0


def test_skorohod_radius():
    constant = GridPath.constant(0.3, 0.0, 1.0)
    assert skorohod_radius(0.1, constant) == pytest.approx(0.2)
    line = GridPath.straight(0.0, 1.0, 0.0, 1.0, 100)
    assert skorohod_radius(0.1, line) == pytest.approx(0.2 + math.expm1(0.1), rel=1e-3)
    with pytest.raises(ValueError):
        skorohod_radius(-0.1, line)


def test_csv_round_trip(tmp_path):
    path = GridPath.uniform(0.0, 0.25, [0.0, 0.5, -0.25, 1.0, 2.0])
    file = path.to_csv(tmp_path / "f.csv")
    assert file.read_text().splitlines()[0] == "time,value"
    loaded = GridPath.from_csv(file)
    np.testing.assert_allclose(loaded.times, path.times)
    np.testing.assert_allclose(loaded.values, path.values)


def test_from_csv_rejects_bad_files(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("time,value\n")
    with pytest.raises(ValueError):
        GridPath.from_csv(empty)
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("t,x\n0,1\n")
    with pytest.raises(ValueError):
        GridPath.from_csv(wrong)
    with pytest.raises(FileNotFoundError):
        GridPath.from_csv(tmp_path / "missing.csv")
