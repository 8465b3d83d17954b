import pytest

from permitlab.model import CostModel, DiscreteDist, Instance, UniformMatroid
from permitlab.rational import Q


@pytest.fixture
def canonical():
    """Single item, value uniform on {1, 2}, cost uniform on {0, 1}.

    Optimal profit is 3/4 and the IP / PP / PB family optima all equal 3/4.
    """
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    costs = CostModel((((0,), Q(1, 2)), ((1,), Q(1, 2))))
    return Instance(1, 1, ((d,),), costs, (UniformMatroid(1, 1),), name="canonical")


@pytest.fixture
def two_iid_items():
    """Two iid uniform {1, 2} items, costs (0,0) or (1,1) each with prob 1/2;
    the single-permit surpluses are 1/2 and 3/2 with equal mass."""
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    costs = CostModel((((0, 0), Q(1, 2)), ((1, 1), Q(1, 2))))
    return Instance(
        1, 2, ((d, d),), costs, (UniformMatroid(2, 2),), name="two-iid"
    )
