import numpy as np
import pytest

from fdilab.attack import targeted_attack
from fdilab.errors import InfeasibleDispatch, UnknownBus, ValidationError
from fdilab.estimation import wls_estimate
from fdilab.market import (
    DispatchCase,
    Generator,
    Load,
    arbitrage_profit,
    perceived_case_from_attack,
    solve_dc_opf,
)
from fdilab.network import Branch, NetworkModel


def single_bus_case(price=10.0, pmax=100.0, demand=50.0):
    net = NetworkModel(buses=(1,), branches=(), slack=1)
    return DispatchCase(
        network=net,
        generators=(Generator(bus=1, price=price, p_max=pmax),),
        loads=(Load(bus=1, mw=demand),),
    )


def two_bus_case(limit=10.0, cheap=10.0, dear=50.0, demand=40.0):
    net = NetworkModel(
        buses=(1, 2), branches=(Branch(1, 2, 0.1, limit_mw=limit),), slack=1
    )
    return DispatchCase(
        network=net,
        generators=(
            Generator(bus=1, price=cheap, p_max=1000.0),
            Generator(bus=2, price=dear, p_max=1000.0),
        ),
        loads=(Load(bus=2, mw=demand),),
    )


def test_single_bus_dispatch():
    result = solve_dc_opf(single_bus_case())
    assert result.gen_output[0] == pytest.approx(50.0, abs=1e-9)
    assert result.lmp[1] == pytest.approx(10.0, abs=1e-9)
    assert result.objective == pytest.approx(500.0, abs=1e-6)


def test_two_bus_congestion_sets_import_price():
    result = solve_dc_opf(two_bus_case())
    # 10 MW arrives over the line, the local expensive unit serves the rest
    assert result.gen_output[0] == pytest.approx(10.0, abs=1e-7)
    assert result.gen_output[1] == pytest.approx(30.0, abs=1e-7)
    assert result.lmp[2] == pytest.approx(50.0, abs=1e-7)
    assert result.binding_lines == (0,)
    assert abs(result.flows[0]) == pytest.approx(10.0, abs=1e-6)


def test_two_bus_dual_against_finite_difference():
    base = solve_dc_opf(two_bus_case())
    bumped = solve_dc_opf(two_bus_case(demand=41.0))
    fd = bumped.objective - base.objective
    assert fd == pytest.approx(base.lmp[2], abs=1e-4)


def test_pre_attack_market_uniform_price(market5):
    result = solve_dc_opf(market5)
    for bus in (1, 2, 3, 4, 5):
        assert result.lmp[bus] == pytest.approx(15.0, abs=1e-6)
    np.testing.assert_allclose(result.gen_output, [250.0, 250.0, 0.0], atol=1e-6)
    assert result.objective == pytest.approx(6250.0, abs=1e-4)
    assert result.binding_lines == ()


def test_nodal_balance_and_cost_identity(market5):
    result = solve_dc_opf(market5)
    net = market5.network
    loads = market5.load_by_bus()
    for bus in net.buses:
        gen = sum(
            out for g, out in zip(market5.generators, result.gen_output) if g.bus == bus
        )
        outflow = sum(
            (1.0 if br.from_bus == bus else -1.0) * result.flows[i]
            for i, br in enumerate(net.branches)
            if bus in (br.from_bus, br.to_bus)
        )
        assert gen - loads[bus] - outflow == pytest.approx(0.0, abs=1e-6)
    cost = sum(g.price * out for g, out in zip(market5.generators, result.gen_output))
    assert cost == pytest.approx(result.objective, abs=1e-6)


def test_infeasible_by_capacity():
    with pytest.raises(InfeasibleDispatch):
        single_bus_case(pmax=10.0, demand=50.0)


def test_infeasible_by_line_limit():
    net = NetworkModel(buses=(1, 2), branches=(Branch(1, 2, 0.1, limit_mw=10.0),), slack=1)
    case = DispatchCase(
        network=net,
        generators=(Generator(bus=1, price=10.0, p_max=1000.0),),
        loads=(Load(bus=2, mw=100.0),),
    )
    with pytest.raises(InfeasibleDispatch):
        solve_dc_opf(case)


def test_generator_and_load_validation():
    with pytest.raises(ValidationError):
        Generator(bus=1, price=10.0, p_max=5.0, p_min=6.0)
    with pytest.raises(ValidationError):
        Generator(bus=1, price=-1.0, p_max=5.0)
    with pytest.raises(ValidationError):
        Load(bus=1, mw=-2.0)
    net = NetworkModel(buses=(1,), branches=(), slack=1)
    with pytest.raises(UnknownBus):
        DispatchCase(network=net, generators=(Generator(bus=7, price=1.0, p_max=1.0),), loads=())


# -- perceived case from an attack -------------------------------------------------

def test_zero_flow_delta_keeps_case(market5, meters5):
    flows = np.array([0.91, -0.16, 0.19, 0.21, 0.89, 0.09])
    perceived = perceived_case_from_attack(market5, meters5, flows, flows)
    assert perceived.load_by_bus() == market5.load_by_bus()


def test_single_branch_delta_moves_injections(market5, meters5):
    flows = np.zeros(6)
    bumped = flows.copy()
    bumped[4] += 0.6  # +60 MW on the branch from bus 3 to bus 4
    perceived = perceived_case_from_attack(market5, meters5, flows, bumped)
    loads0 = market5.load_by_bus()
    loads1 = perceived.load_by_bus()
    assert loads1[3] == pytest.approx(loads0[3] - 60.0, abs=1e-9)
    assert loads1[4] == pytest.approx(loads0[4] + 60.0, abs=1e-9)
    for bus in (1, 2, 5):
        assert loads1[bus] == pytest.approx(loads0[bus], abs=1e-9)
    assert sum(loads1.values()) == pytest.approx(sum(loads0.values()), abs=1e-9)


def test_profit_scenario_congestion(net5_limited, meters5, h5, z5, w5):
    market = DispatchCase(
        network=net5_limited,
        generators=(
            Generator(bus=1, price=10.0, p_max=250.0),
            Generator(bus=3, price=15.0, p_max=300.0),
            Generator(bus=5, price=30.0, p_max=500.0),
        ),
        loads=tuple(
            Load(bus=b, mw=mw) for b, mw in ((1, 100.0), (2, 100.0), (3, 200.0), (4, 40.0), (5, 60.0))
        ),
    )
    before = solve_dc_opf(market)
    assert before.binding_lines == ()

    atk = targeted_attack(h5, {h5.state_index(3): 0.03})
    clean = wls_estimate(h5, z5, w5)
    attacked = wls_estimate(h5, z5 + atk.a, w5)
    perceived = perceived_case_from_attack(market, meters5, clean.fitted, attacked.fitted)
    after = solve_dc_opf(perceived)

    assert after.binding_lines == (4,)  # the limited branch between buses 3 and 4
    assert abs(after.flows[4]) == pytest.approx(70.0, abs=1e-6)
    assert after.lmp[3] == pytest.approx(15.0, abs=1e-6)
    for bus in (2, 4, 5):
        assert after.lmp[bus] > 15.0
    assert after.lmp[4] == max(after.lmp.values())
    assert after.gen_output[2] > 0.0

    profit = arbitrage_profit(before, after, buy_bus=1, sell_bus=4, quantity=1.0)
    assert profit == pytest.approx(after.lmp[4] - 15.0, abs=1e-9)
    assert profit > 0


# -- arbitrage ---------------------------------------------------------------------

def test_arbitrage_zero_quantity(market5):
    result = solve_dc_opf(market5)
    assert arbitrage_profit(result, result, 1, 4, 0.0) == 0.0


def test_arbitrage_equal_prices(market5):
    result = solve_dc_opf(market5)
    assert arbitrage_profit(result, result, 1, 4, 25.0) == pytest.approx(0.0, abs=1e-6)


def test_arbitrage_from_published_spread():
    # one marginal MW bought at 15 and sold at 32.884615 clears 17.884615/h
    from fdilab.market import DispatchResult

    before = DispatchResult(
        gen_output=np.zeros(1), flows=np.zeros(0), lmp={1: 15.0, 4: 15.0},
        objective=0.0, binding_lines=(),
    )
    after = DispatchResult(
        gen_output=np.zeros(1), flows=np.zeros(0), lmp={1: 22.572115, 4: 32.884615},
        objective=0.0, binding_lines=(),
    )
    assert arbitrage_profit(before, after, 1, 4, 1.0) == pytest.approx(17.884615, abs=1e-6)


def test_arbitrage_unknown_bus(market5):
    result = solve_dc_opf(market5)
    with pytest.raises(UnknownBus):
        arbitrage_profit(result, result, 1, 9, 1.0)
    with pytest.raises(ValidationError):
        arbitrage_profit(result, result, 1, 4, -1.0)
