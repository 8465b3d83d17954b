from hypothesis import given, settings, strategies as st

from permitlab.model import CostModel, DiscreteDist, Instance, UniformMatroid
from permitlab.myerson import (
    best_posted_revenue,
    copies_opt_additive,
    copies_opt_ud,
    copies_opt_ud_multi,
    ironed_surplus,
    virtual_values,
)
from permitlab.rational import Q

U12 = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))


def test_regular_two_point():
    t = virtual_values(U12)
    assert t.raw == (0, 2) and t.ironed == (0, 2)


def test_irregular_ironing():
    d = DiscreteDist((1, 2, 3), (Q(1, 2), Q(1, 10), Q(2, 5)))
    t = virtual_values(d)
    assert t.raw == (0, -2, 3)
    assert t.ironed == (Q(-1, 3), Q(-1, 3), 3)


def test_point_mass():
    t = virtual_values(DiscreteDist((5,), (1,)))
    assert t.ironed == (5,)


def test_ironed_monotone_and_top():
    d = DiscreteDist((1, 3, 7, 8), (Q(1, 5), Q(2, 5), Q(1, 5), Q(1, 5)))
    t = virtual_values(d)
    assert all(a <= b for a, b in zip(t.ironed, t.ironed[1:]))
    assert t.ironed[-1] == d.support[-1]


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(0, 12), min_size=1, max_size=5, unique=True),
    st.data(),
)
def test_posted_price_identity(vals, data):
    vals = tuple(sorted(vals))
    weights = [data.draw(st.integers(1, 4)) for _ in vals]
    tot = sum(weights)
    d = DiscreteDist(vals, tuple(Q(w, tot) for w in weights))
    table = virtual_values(d)
    for r in d.support:
        assert ironed_surplus(table, r) == best_posted_revenue(d, r)


def one_buyer(dists, costs, fam):
    return Instance(1, len(dists), (tuple(dists),), CostModel(costs), (fam,))


def test_copies_ud_examples():
    inst = one_buyer((U12,), (((0,), 1),), UniformMatroid(1, 1))
    assert copies_opt_ud(inst, 0) == 1
    inst1 = one_buyer((U12,), (((1,), 1),), UniformMatroid(1, 1))
    assert copies_opt_ud(inst1, 0) == Q(1, 2)
    dead = one_buyer((U12,), (((9,), 1),), UniformMatroid(1, 1))
    assert copies_opt_ud(dead, 0) == 0


def test_copies_additive_examples():
    inst = one_buyer((U12, U12), (((0, 0), 1),), UniformMatroid(2, 2))
    assert copies_opt_additive(inst, 0) == 2
    rank1 = one_buyer((U12, U12), (((0, 0), 1),), UniformMatroid(2, 1))
    assert copies_opt_additive(rank1, 0) == Q(3, 2)
    single = one_buyer((U12,), (((0,), 1),), UniformMatroid(1, 1))
    assert copies_opt_additive(single, 0) == copies_opt_ud(single, 0)


def test_copies_multi():
    inst = Instance(
        2,
        1,
        ((U12,), (U12,)),
        CostModel((((0,), 1),)),
        (UniformMatroid(1, 1), UniformMatroid(1, 1)),
    )
    assert copies_opt_ud_multi(inst, 0) == Q(3, 2)
    single = one_buyer((U12,), (((0,), 1),), UniformMatroid(1, 1))
    assert copies_opt_ud_multi(single, 0) == copies_opt_ud(single, 0)
    dead = Instance(
        2,
        1,
        ((U12,), (U12,)),
        CostModel((((7,), 1),)),
        (UniformMatroid(1, 1), UniformMatroid(1, 1)),
    )
    assert copies_opt_ud_multi(dead, 0) == 0


def test_rejects_non_distribution():
    import pytest

    with pytest.raises(TypeError):
        virtual_values((1, 2, 3))


def test_copies_multi_size_guard():
    import pytest

    inst = Instance(
        2,
        1,
        ((U12,), (U12,)),
        CostModel((((0,), 1),)),
        (UniformMatroid(1, 1), UniformMatroid(1, 1)),
    )
    with pytest.raises(ValueError):
        copies_opt_ud_multi(inst, 0, guard=1)
