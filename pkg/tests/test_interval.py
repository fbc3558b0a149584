import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from acbf.interval import (
    EMPTY,
    Interval,
    IntervalRowVector,
    add,
    div_scalar,
    hull,
    intersect,
    interval_sum,
    mul,
    scale,
    sub,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def members(iv):
    return [iv.lo, iv.mid, iv.hi]


def test_construction_rejects_inverted():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
    with pytest.raises(ValueError):
        Interval(float("nan"), 1.0)


@pytest.mark.parametrize("a,b,expected", [
    ((1, 2), (3, 4), (4, 6)),
    ((0, 0), (-2, 5), (-2, 5)),
    ((-1, 1), (-1, 1), (-2, 2)),
])
def test_add(a, b, expected):
    assert add(Interval(*a), Interval(*b)) == Interval(*expected)


@pytest.mark.parametrize("a,b,expected", [
    ((-1, 2), (3, 4), (-4, 8)),
    ((2, 3), (0, 0), (0, 0)),
    ((-2, -1), (-3, -2), (2, 6)),
])
def test_mul(a, b, expected):
    assert mul(Interval(*a), Interval(*b)) == Interval(*expected)


def test_intersect_examples():
    assert intersect(Interval(0, 3), Interval(2, 5)) == Interval(2, 3)
    assert intersect(Interval(0, 1), Interval(2, 3)) is EMPTY
    assert intersect(Interval(0, 4), Interval(0, 4)) == Interval(0, 4)
    assert not EMPTY


def test_intersect_tolerance_bridges_roundoff_gap():
    a, b = Interval(0.0, 1.0), Interval(1.0 + 5e-10, 2.0)
    assert intersect(a, b) is EMPTY
    got = intersect(a, b, tol=1e-9)
    assert got.width == 0.0 and got.lo == pytest.approx(1.0 + 2.5e-10)
    assert intersect(Interval(0.0, 1.0), Interval(1.1, 2.0), tol=1e-9) is EMPTY


@pytest.mark.parametrize("a,c,expected", [
    ((2, 4), 2, (1, 2)),
    ((2, 4), -2, (-2, -1)),
    ((0, 0), 5, (0, 0)),
])
def test_div_scalar(a, c, expected):
    assert div_scalar(Interval(*a), c) == Interval(*expected)


def test_div_by_zero_rejected():
    with pytest.raises(ZeroDivisionError):
        div_scalar(Interval(1, 2), 0.0)


def test_operators_and_helpers():
    a = Interval(1, 2)
    assert a + 1 == Interval(2, 3)
    assert 1 - a == Interval(-1, 0)
    assert -a == Interval(-2, -1)
    assert a * -2 == Interval(-4, -2)
    assert a / 2 == Interval(0.5, 1)
    assert (a & Interval(1.5, 3)) == Interval(1.5, 2)
    assert hull([Interval(0, 1), Interval(3, 4)]) == Interval(0, 4)
    assert interval_sum([Interval(0, 1), Interval(3, 4)]) == Interval(3, 5)
    assert Interval.point(2) == Interval(2, 2)
    assert Interval.symmetric(-3) == Interval(-3, 3)


@given(intervals(), intervals())
def test_inclusion_isotonicity(a, b):
    for op, f in ((add, lambda x, y: x + y), (sub, lambda x, y: x - y), (mul, lambda x, y: x * y)):
        r = op(a, b)
        for x, y in itertools.product(members(a), members(b)):
            assert r.contains(f(x, y), tol=1e-9 * (1 + abs(f(x, y))))


@given(intervals(), finite)
def test_scale_contains_pointwise(a, c):
    r = scale(a, c)
    for x in members(a):
        assert r.contains(x * c, tol=1e-9 * (1 + abs(x * c)))


@given(intervals(), intervals())
def test_intersection_is_subset_of_both(a, b):
    r = intersect(a, b)
    if r is EMPTY:
        assert a.hi < b.lo or b.hi < a.lo
    else:
        assert r.issubset(a) and r.issubset(b)


def test_row_vector_dot_and_containment():
    P = IntervalRowVector.from_bounds([-1, 0], [1, 2])
    assert len(P) == 2
    assert P.dot([2.0, -1.0]) == Interval(-4, 2)
    assert P.contains([0.5, 1.0]) and not P.contains([0.5, 3.0])
    Q = P.replace(1, Interval(1, 1))
    assert Q.issubset(P) and not P.issubset(Q)
    assert Q.widths == [2.0, 0.0]
    assert P.mid == [0.0, 1.0]
