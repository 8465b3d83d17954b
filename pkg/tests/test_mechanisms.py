import pytest

from permitlab.benchmark import core_deltas, core_tail, ex_ante, rspp_tail_thresholds
from permitlab.lp import solve_profit_lp
from permitlab.mechanisms import (
    AvailabilityModel,
    ConstructionError,
    MechanismSpec,
    aux_grand_bundle,
    aux_sell_separately,
    best_response_permits,
    construct_csip_from_copies,
    construct_rspp_tail,
    construct_rspp_tau,
    construct_spb_core,
    convert_revenue_to_permit,
    eval_csip,
    eval_pb_spb,
    eval_pp_rspp,
    evaluate,
    monte_carlo_eval,
    search_best,
)
from permitlab.model import (
    CostModel,
    DiscreteDist,
    Instance,
    UniformMatroid,
)
from permitlab.myerson import copies_opt_additive, copies_opt_ud
from permitlab.oracles import brute_posted_price_opt
from permitlab.rational import Q, ZERO, HALF


def cost_prices(inst):
    return {
        (i, j, c): inst.costs.vector(c)[j]
        for i in range(inst.n)
        for j in range(inst.m)
        for c in range(len(inst.costs))
    }


def test_eval_csip_examples(canonical):
    spec = MechanismSpec("IP", {(0, 0, 0): Q(2), (0, 0, 1): Q(2)})
    assert eval_csip(canonical, spec).profit == Q(3, 4)
    high = MechanismSpec("IP", {(0, 0, 0): Q(9), (0, 0, 1): Q(9)})
    assert eval_csip(canonical, high).profit == 0
    below = MechanismSpec("IP", {(0, 0, 0): ZERO, (0, 0, 1): ZERO})
    assert eval_csip(canonical, below).profit == Q(-1, 2)  # losses are reported


def test_eval_pp_examples(canonical):
    spec = MechanismSpec(
        "PP", cost_prices(canonical), permit_prices={(0, 0): Q(3, 2)}
    )
    res = eval_pp_rspp(canonical, spec)
    assert res.profit == Q(3, 4)
    assert res.permit_buy_prob[(0, 0)] == Q(1, 2)  # the tie buys
    free = MechanismSpec("PP", cost_prices(canonical), permit_prices={(0, 0): ZERO})
    assert eval_pp_rspp(canonical, free).profit == 0
    steep = MechanismSpec("PP", cost_prices(canonical), permit_prices={(0, 0): Q(99)})
    assert eval_pp_rspp(canonical, steep).profit == 0


def test_eval_pb_examples(canonical):
    spec = MechanismSpec(
        "PB", cost_prices(canonical), bundle_prices={0: Q(3, 2)}
    )
    assert eval_pb_spb(canonical, spec).profit == Q(3, 4)
    zero = MechanismSpec("PB", cost_prices(canonical), bundle_prices={0: ZERO})
    assert eval_pb_spb(canonical, zero).profit == 0
    steep = MechanismSpec("PB", cost_prices(canonical), bundle_prices={0: Q(99)})
    assert eval_pb_spb(canonical, steep).profit == 0


def test_best_response_permit_examples():
    # surpluses 2 and 4 halve to utilities (1, 2); prices (1/2, 19/10)
    inst = Instance(
        1,
        2,
        ((DiscreteDist((2,), (1,)), DiscreteDist((4,), (1,))),),
        CostModel((((0, 0), 1),)),
        (UniformMatroid(2, 2),),
    )
    spec = MechanismSpec(
        "RSPP",
        cost_prices(inst),
        permit_prices={(0, 0): Q(1, 2), (0, 1): Q(19, 10)},
        hide_to_half=True,
    )
    avail = AvailabilityModel(inst, [{0b11: Q(1)}], [[HALF, HALF]])
    permits, pay = best_response_permits(inst, 0, (Q(2), Q(4)), spec, avail)
    assert permits == 0b01 and pay == Q(1, 2)
    # all free: the whole allowed set is taken
    spec2 = MechanismSpec(
        "PP", cost_prices(inst), permit_prices={(0, 0): ZERO, (0, 1): ZERO}
    )
    full_avail = AvailabilityModel(inst, [{0b11: Q(1)}], [[Q(1), Q(1)]])
    permits2, _ = best_response_permits(inst, 0, (Q(2), Q(4)), spec2, full_avail)
    assert permits2 == 0b11
    # prices exactly at value: ties buy
    spec3 = MechanismSpec(
        "PP", cost_prices(inst), permit_prices={(0, 0): Q(2), (0, 1): Q(4)}
    )
    permits3, _ = best_response_permits(inst, 0, (Q(2), Q(4)), spec3, full_avail)
    assert permits3 == 0b11


def test_construct_csip_additive(canonical):
    spec = construct_csip_from_copies(canonical)
    res = evaluate(canonical, spec)
    copies = sum(
        (
            canonical.costs.prob(c) * copies_opt_additive(canonical, c)
            for c in range(len(canonical.costs))
        ),
        ZERO,
    )
    assert res.profit == copies == Q(3, 4)


def test_construct_csip_additive_two_items():
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    inst = Instance(
        1, 2, ((d, d),), CostModel((((0, 0), 1),)), (UniformMatroid(2, 2),)
    )
    spec = construct_csip_from_copies(inst)
    assert evaluate(inst, spec).profit == 2


def test_monte_carlo(canonical):
    spec = MechanismSpec("IP", {(0, 0, 0): Q(2), (0, 0, 1): Q(2)})
    a = monte_carlo_eval(canonical, spec, samples=50_000, seed=11)
    b = monte_carlo_eval(canonical, spec, samples=50_000, seed=11)
    assert a.estimate == b.estimate  # same seed, same stream
    assert abs(a.estimate - 0.75) <= a.half_width + 1e-12
    point = Instance(
        1,
        1,
        ((DiscreteDist((3,), (1,)),),),
        CostModel((((1,), 1),)),
        (UniformMatroid(1, 1),),
    )
    pspec = MechanismSpec("IP", {(0, 0, 0): Q(3)})
    mc = monte_carlo_eval(point, pspec, samples=500, seed=0)
    assert mc.estimate == 2.0 and mc.half_width == 0.0


def test_conversion_equalities(canonical):
    aux = aux_sell_separately(canonical, (Q(3, 2),))
    two = convert_revenue_to_permit(canonical, aux)
    assert two.profit() == aux.revenue() == Q(3, 4)
    auxb = aux_grand_bundle(canonical, Q(3, 2))
    twob = convert_revenue_to_permit(canonical, auxb)
    assert twob.profit() == auxb.revenue() == Q(3, 4)


def test_conversion_rejects_untruthful(canonical):
    from permitlab.mechanisms import AuxMechanism

    # type 1 is charged more than type 2 for the same allocation
    aux = AuxMechanism(
        canonical,
        {0: ((1, Q(1)),), 1: ((1, Q(1)),)},
        {0: Q(1), 1: Q(0)},
    )
    with pytest.raises(ConstructionError):
        convert_revenue_to_permit(canonical, aux)


def test_search_best_matches_oracle(canonical):
    for kind in ("IP", "PP", "PB"):
        _, res = search_best(canonical, kind)
        assert res.profit == brute_posted_price_opt(canonical, kind).value == Q(3, 4)


def test_search_pp_grid_example(canonical):
    spec, res = search_best(canonical, "PP")
    assert spec.permit_prices[(0, 0)] == Q(3, 2) and res.profit == Q(3, 4)


def test_ip_profit_invariant_to_unsold_item_shift():
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    inst = Instance(
        1, 2, ((d, d),), CostModel((((0, 1), 1),)), (UniformMatroid(2, 2),)
    )
    spec = MechanismSpec("IP", {(0, 0, 0): Q(2), (0, 1, 0): Q(9)})
    base = evaluate(inst, spec).profit
    # raise the unsold item's price and cost by the same constant
    inst2 = Instance(
        1, 2, ((d, d),), CostModel((((0, 4), 1),)), (UniformMatroid(2, 2),)
    )
    spec2 = MechanismSpec("IP", {(0, 0, 0): Q(2), (0, 1, 0): Q(12)})
    assert evaluate(inst2, spec2).profit == base


def _multi_instance():
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    e = DiscreteDist((1, 3), (Q(3, 4), Q(1, 4)))
    return Instance(
        2,
        2,
        ((d, e), (e, d)),
        CostModel((((0, 1), Q(1, 2)), ((1, 0), Q(1, 2)))),
        (UniformMatroid(2, 1), UniformMatroid(2, 2)),
        name="multi-fixture",
    )


def test_rspp_hiding_probability_single():
    # one buyer, one item, always available: keep probability exactly 1/2
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    inst = Instance(1, 1, ((d,),), CostModel((((0,), 1),)), (UniformMatroid(1, 1),))
    spec = MechanismSpec(
        "RSPP",
        cost_prices(inst),
        permit_prices={(0, 0): Q(1, 2)},
        hide_to_half=True,
    )
    evaluate(inst, spec)
    assert spec.hiding_probs[(0, 0, 0)] == HALF


def test_multi_constructions_chain():
    inst = _multi_instance()
    sol = solve_profit_lp(inst)
    exa = ex_ante(inst, sol.mechanism)
    ct = core_tail(inst, exa.beta)
    xi = rspp_tail_thresholds(inst, exa.beta, ct)
    tail_spec = construct_rspp_tail(inst, exa, xi)
    tail_res = evaluate(inst, tail_spec)
    assert ct.tail <= 2 * tail_res.profit
    tau_spec = construct_rspp_tau(inst, exa, ct.tau)
    tau_res = evaluate(inst, tau_spec)
    assert sum(ct.tau, ZERO) <= 8 * max(tau_res.profit, tail_res.profit)
    deltas = core_deltas(inst, exa.beta, ct)
    spb = construct_spb_core(inst, exa, deltas)
    spb_res = evaluate(inst, spb)
    for i in range(2):
        if deltas[i] > 0:
            assert spb_res.bundle_pay_prob.get(i, ZERO) >= HALF
    for res in (tail_res, tau_res, spb_res):
        assert res.profit <= sol.objective


def test_rspp_tail_precondition_rejected():
    from permitlab.benchmark import ExAnte
    from permitlab.model import Thresholds

    inst = _multi_instance()
    exa = ExAnte(
        inst,
        {(i, j, c): ZERO for i in range(2) for j in range(2) for c in range(2)},
        Thresholds.zero(inst),
        {(i, j, c): Q(1) for i in range(2) for j in range(2) for c in range(2)},
    )
    # at zero thresholds every type clears some price, so tiny permit
    # thresholds push the willingness sums far above one half
    bad_xi = {(i, j): Q(1, 100) for i in range(2) for j in range(2)}
    with pytest.raises(ConstructionError):
        construct_rspp_tail(inst, exa, bad_xi)


def test_spb_point_mass_always_accepts():
    point = Instance(
        1,
        1,
        ((DiscreteDist((4,), (1,)),),),
        CostModel((((1,), 1),)),
        (UniformMatroid(1, 1),),
    )
    sol = solve_profit_lp(point)
    exa = ex_ante(point, sol.mechanism)
    ct = core_tail(point, exa.beta)
    deltas = core_deltas(point, exa.beta, ct)
    spec = construct_spb_core(point, exa, deltas)
    res = evaluate(point, spec)
    assert res.bundle_pay_prob.get(0, ZERO) == 1


def test_construct_price_prefers_higher_at_ties():
    # at cost zero both support prices earn revenue 1; the higher one is kept
    d = DiscreteDist((1, 2), (Q(1, 2), Q(1, 2)))
    inst = Instance(1, 1, ((d,),), CostModel((((0,), 1),)), (UniformMatroid(1, 1),))
    spec = construct_csip_from_copies(inst)
    assert spec.item_prices[(0, 0, 0)] == 2
    assert evaluate(inst, spec).profit == 1


def test_search_best_empty_grid(canonical):
    with pytest.raises(ValueError):
        search_best(canonical, "PB", grid=())


def test_bad_hiding_probs_rejected(canonical):
    with pytest.raises(ValueError):
        MechanismSpec(
            "RSPP",
            cost_prices(canonical),
            permit_prices={(0, 0): Q(1)},
            hiding_probs={(0, 0, 0): Q(3, 2)},
        )


def test_no_profitable_stage_one_deviation():
    # replaying any other type's permit strategy never beats the own best
    # response (the evaluator's buyers are argmax players by construction)
    from permitlab.mechanisms import _expected_utility
    from permitlab.benchmark import ex_ante, core_tail
    from permitlab.lp import solve_profit_lp

    inst = _multi_instance()
    sol = solve_profit_lp(inst)
    exa = ex_ante(inst, sol.mechanism)
    ct = core_tail(inst, exa.beta)
    spec = construct_rspp_tau(inst, exa, ct.tau)
    from permitlab.mechanisms import _decision_tables

    tables = _decision_tables(inst, spec)
    states = [{inst.full_mask(): Q(1)} for _ in range(len(inst.costs))]
    avail = AvailabilityModel(inst, states, [[HALF, HALF]] * len(inst.costs))
    i = 0
    prices = [
        tuple(spec.price(i, j, c) for j in range(inst.m))
        for c in range(len(inst.costs))
    ]
    types = inst.buyer_types(i)
    for ti, t_i in enumerate(types):
        own_permits, own_pay = tables[i][ti][0], tables[i][ti][1]
        own = _expected_utility(inst, i, t_i, own_permits, avail, prices) - own_pay
        for alt in range(len(types)):
            alt_permits, alt_pay = tables[i][alt][0], tables[i][alt][1]
            dev = _expected_utility(inst, i, t_i, alt_permits, avail, prices) - alt_pay
            assert dev <= own
