import pytest

from permitlab.rational import Q
from permitlab.simplex import LinearProgram, Unbounded, solve


def test_basic_max():
    lp = LinearProgram()
    x = lp.add_col(3)
    y = lp.add_col(2)
    lp.add_row({x: 1, y: 1}, 4)
    lp.add_row({x: 1, y: 3}, 6)
    res = solve(lp)
    assert res.objective == 12
    assert res.primal == {x: 4}
    # strong duality
    assert sum(d * b for d, b in zip(res.duals, (Q(4), Q(6)))) == 12


def test_degenerate_start():
    lp = LinearProgram()
    a = lp.add_col(1)
    b = lp.add_col(1)
    lp.add_row({a: 1}, 0)
    lp.add_row({a: -1, b: 1}, 2)
    res = solve(lp)
    assert res.objective == 2


def test_unbounded_detected():
    lp = LinearProgram()
    x = lp.add_col(1)
    lp.add_row({x: -1}, 1)
    with pytest.raises(Unbounded):
        solve(lp)


def test_exact_rationals():
    lp = LinearProgram()
    x = lp.add_col(Q(1, 3))
    y = lp.add_col(Q(1, 7))
    lp.add_row({x: Q(2, 5), y: 1}, Q(1, 2))
    res = solve(lp)
    assert res.objective == Q(1, 3) * Q(5, 4)  # x = 5/4


def test_zero_objective():
    lp = LinearProgram()
    lp.add_col(0)
    lp.add_row({0: 1}, 3)
    res = solve(lp)
    assert res.objective == 0 and res.primal == {}
