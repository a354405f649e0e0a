import pytest

from metric_dsl import PointState
from utils.config import parse_orders
from utils.sampling import grid_points, is_admissible, parse_grid, parse_point, sample_points


def test_parse_point():
    point = parse_point("x=0,1,0,0;y=1,1,1,1")
    assert point == PointState((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0))
    assert str(point) == "x=0,1,0,0;y=1,1,1,1"
    assert parse_point(" x = 1.5 ; y = -2e-1 ").y == (-0.2,)


@pytest.mark.parametrize("text", ["x=1,2", "x=1;y=a", "x=1,2;y=1", "y=1;x=1"])
def test_parse_point_errors(text):
    with pytest.raises(ValueError):
        parse_point(text)


def test_parse_grid():
    assert parse_grid("y3=1.5:2.5:5, x1=0:1:3") == [("y3", 1.5, 2.5, 5), ("x1", 0.0, 1.0, 3)]


@pytest.mark.parametrize("text", ["", "y3=1:2", "z1=0:1:2", "y=0:1:2", "y1=0:1:0", "y1=a:1:2"])
def test_parse_grid_errors(text):
    with pytest.raises(ValueError):
        parse_grid(text)


@pytest.mark.parametrize("text, orders", [("2,6", (2, 6)), ("0, 3", (0, 3))])
def test_parse_orders(text, orders):
    assert parse_orders(text) == orders


@pytest.mark.parametrize("text", ["2", "2,6,1", "-1,4", "a,b"])
def test_parse_orders_errors(text):
    with pytest.raises(ValueError):
        parse_orders(text)


def test_sampling_is_deterministic(ex2):
    first = sample_points(ex2, 5, seed=4)
    assert first == sample_points(ex2, 5, seed=4)
    assert first != sample_points(ex2, 5, seed=5)


def test_samples_respect_boxes_and_domain(ex2):
    for point in sample_points(ex2, 20, seed=0):
        assert is_admissible(ex2, point)
        assert all(0.5 <= v <= 2.0 for v in point.x)
        assert 0.5 <= point.y[2] <= 1.5


def test_grid_order_and_base(ex1):
    base = PointState((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0))
    points, rejected, skipped = grid_points(ex1, [("x2", 1.0, 2.0, 2), ("y3", 1.0, 3.0, 3)], base)
    assert (rejected, skipped) == (0, 0)
    # first axis varies slowest
    assert [(p.x[1], p.y[2]) for p in points] == [
        (1.0, 1.0), (1.0, 2.0), (1.0, 3.0), (2.0, 1.0), (2.0, 2.0), (2.0, 3.0)
    ]
    assert all(p.y[0] == 1.0 and p.x[0] == 0.0 for p in points)


def test_grid_rejects_and_skips(ex1):
    base = PointState((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0))
    points, rejected, skipped = grid_points(ex1, [("x2", -1.0, 1.0, 3)], base)
    assert [p.x[1] for p in points] == [1.0]
    assert rejected == 2
    points, rejected, skipped = grid_points(ex1, [("y1", 1e-8, 1.0, 2)], base)
    assert skipped == 1
    with pytest.raises(ValueError):
        grid_points(ex1, [("y5", 0.0, 1.0, 2)], base)
