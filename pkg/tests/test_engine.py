import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valtrack import (CommitmentParams, MarketParams, MarketState,
                      PopulationSpec, Trader, init_population, run, step)
from valtrack.engine import (StepOrders, collect_orders, settle,
                             update_momentum, update_price_powerlaw,
                             update_price_ratio)
from valtrack.errors import InvalidInputError


def two_trader_state(theta=0.216, p0=1.0, m0=-0.001, rho=4.0):
    spec = PopulationSpec(val_fracs=(1.0 - theta,), mo_frac=theta, p0=p0, rho=rho)
    return init_population(spec, m0=m0)


class TestRatioImpact:
    def test_balanced_orders_leave_price_unchanged(self):
        assert update_price_ratio(1.0, 1.0, 1.0, 0.04, 0.1) == 1.0

    def test_small_imbalance(self):
        # 2 ** 0.04, evaluated independently
        assert update_price_ratio(1.0, 2.0, 1.0, 0.04, 0.1) == pytest.approx(
            1.0281138266560665, rel=1e-12)

    def test_cap_engages_on_large_imbalance(self):
        # lam * log(100) = 0.1842 exceeds the 0.1 cap
        assert update_price_ratio(1.0, 100.0, 1.0, 0.04, 0.1) == pytest.approx(
            1.1051709180756477, rel=1e-12)

    def test_one_sided_flow_moves_at_cap(self):
        assert update_price_ratio(2.0, 1.0, 0.0, 0.04, 0.1) == pytest.approx(
            2.0 * 1.1051709180756477, rel=1e-12)
        assert update_price_ratio(2.0, 0.0, 1.0, 0.04, 0.1) == pytest.approx(
            2.0 * 0.9048374180359595, rel=1e-12)

    def test_no_orders_no_move(self):
        assert update_price_ratio(3.5, 0.0, 0.0, 0.04, 0.1) == 3.5

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            update_price_ratio(1.0, math.nan, 1.0, 0.04, 0.1)
        with pytest.raises(InvalidInputError):
            update_price_ratio(-1.0, 1.0, 1.0, 0.04, 0.1)

    @given(q1=st.floats(1e-6, 1e3), q2=st.floats(1e-6, 1e3),
           q_s=st.floats(1e-6, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_buy_volume(self, q1, q2, q_s):
        lo, hi = sorted((q1, q2))
        assert (update_price_ratio(1.0, lo, q_s, 0.04, 0.1)
                <= update_price_ratio(1.0, hi, q_s, 0.04, 0.1))


class TestPowerlawImpact:
    def test_zero_imbalance(self):
        assert update_price_powerlaw(1.0, 3.0, 3.0, 1.0, 1.0, 0.1) == 1.0

    def test_linear_exponent(self):
        assert update_price_powerlaw(1.0, 1.05, 1.0, 1.0, 1.0, 0.1) == pytest.approx(
            1.0512710963760241, rel=1e-12)

    def test_concave_exponent(self):
        # 0.05 ** 0.8 = 0.09102821015130401 stays under the cap
        assert update_price_powerlaw(1.0, 1.05, 1.0, 1.0, 0.8, 0.1) == pytest.approx(
            1.0952999033986409, rel=1e-12)

    def test_cap_applies(self):
        assert update_price_powerlaw(1.0, 5.0, 1.0, 1.0, 1.0, 0.1) == pytest.approx(
            1.1051709180756477, rel=1e-12)

    def test_negative_imbalance_mirrors(self):
        up = update_price_powerlaw(1.0, 1.03, 1.0, 1.0, 0.8, 0.1)
        down = update_price_powerlaw(1.0, 1.0, 1.03, 1.0, 0.8, 0.1)
        assert up * down == pytest.approx(1.0, rel=1e-12)


class TestMomentum:
    def test_fixed_point_at_constant_price(self):
        assert update_momentum(0.0, 1.0, 1.0, 0.002) == 0.0

    def test_decay_without_price_change(self):
        assert update_momentum(-0.001, 1.0, 1.0, 0.002) == pytest.approx(
            -0.000998, rel=1e-12)

    def test_new_return_weighted_by_mu(self):
        p_new = math.exp(0.1)
        assert update_momentum(0.0, 1.0, p_new, 0.002) == pytest.approx(
            0.0002, rel=1e-9)


def make_orders(state, bids, offers):
    q_p = sum(bids) / state.price
    return StepOrders(tuple(bids), tuple(offers), q_p, sum(offers))


class TestSettle:
    def state(self):
        traders = [Trader(10.0, 0.0, "val"), Trader(0.0, 40.0, "mo")]
        return MarketState(price=1.0, momentum=0.0, time=0, traders=traders,
                           total_cash=10.0, total_asset=40.0)

    def test_no_orders_is_identity(self):
        s = self.state()
        out = settle(s, make_orders(s, [0.0, 0.0], [0.0, 0.0]), 1.0)
        assert out.traders[0].cash == 10.0
        assert out.traders[1].asset == 40.0

    def test_exact_parity_fills_both_sides(self):
        s = self.state()
        out = settle(s, make_orders(s, [10.0, 0.0], [0.0, 10.0]), 1.0)
        assert out.traders[0].cash == pytest.approx(0.0, abs=1e-15)
        assert out.traders[0].asset == pytest.approx(10.0)
        assert out.traders[1].cash == pytest.approx(10.0)
        assert out.traders[1].asset == pytest.approx(30.0)

    def test_prorata_scales_larger_side(self):
        # 10 cash of demand vs 40 asset offered: sell side scaled by 1/4
        s = self.state()
        out = settle(s, make_orders(s, [10.0, 0.0], [0.0, 40.0]), 1.0)
        assert out.traders[0].asset == pytest.approx(10.0)
        assert out.traders[1].asset == pytest.approx(30.0)
        assert out.traders[1].cash == pytest.approx(10.0)

    def test_rejects_bad_settlement_price(self):
        s = self.state()
        with pytest.raises(InvalidInputError):
            settle(s, make_orders(s, [1.0, 0.0], [0.0, 1.0]), 0.0)

    @given(bid=st.floats(0.0, 10.0), offer=st.floats(0.0, 40.0),
           p=st.floats(0.1, 10.0))
    @settings(max_examples=200, deadline=None)
    def test_conservation_and_nonnegativity(self, bid, offer, p):
        s = self.state()
        out = settle(s, make_orders(s, [bid, 0.0], [0.0, offer]), p)
        assert out.cash_sum() == pytest.approx(10.0, rel=1e-12)
        assert out.asset_sum() == pytest.approx(40.0, rel=1e-12)
        for t in out.traders:
            assert t.cash >= 0.0 and t.asset >= 0.0


class TestStep:
    def test_equilibrium_is_frozen_apart_from_time(self):
        state = two_trader_state(m0=0.0)
        out, record = step(state, MarketParams(), CommitmentParams())
        assert out.price == state.price
        assert out.momentum == 0.0
        assert out.time == 1
        assert record.q_p == 0.0 and record.q_s == 0.0

    def test_balanced_orders_execute_fully_without_price_move(self):
        traders = [Trader(10.0, 10.0, "val", valuation=2.0),
                   Trader(10.0, 10.0, "mo")]
        state = MarketState(price=1.0, momentum=-0.5, time=0, traders=traders,
                            total_cash=20.0, total_asset=20.0)
        # val buys 1.0 cash (p < u), mo offers 1.0 asset: exact parity
        out, record = step(state, MarketParams(), CommitmentParams())
        assert out.price == 1.0
        assert record.executed == pytest.approx(1.0)
        assert not record.cap_hit

    def test_one_sided_step_caps_price_and_flags(self):
        state = two_trader_state(m0=-0.001)  # p = u: only the Mo sells
        out, record = step(state, MarketParams(), CommitmentParams())
        assert out.price == pytest.approx(0.9048374180359595, rel=1e-12)
        assert record.cap_hit
        assert record.executed == 0.0

    def test_case2_price_move_matches_log_order_ratio(self):
        state = two_trader_state(theta=0.3, p0=0.95, m0=-0.001)
        orders = collect_orders(state, CommitmentParams(), None)
        expected = state.price * math.exp(
            max(-0.1, min(0.1, 0.04 * math.log(orders.q_p / orders.q_s))))
        out, _ = step(state, MarketParams(), CommitmentParams())
        assert out.price == pytest.approx(expected, rel=1e-14)


class TestRun:
    def test_horizon_one_gives_two_points(self):
        state = two_trader_state()
        result = run(state, MarketParams(horizon=1), CommitmentParams(), seed=0)
        assert len(result.prices) == 2
        assert len(result.momenta) == 2
        assert len(result.wealth) == 2

    def test_identical_seed_and_config_reproduce_bitwise(self):
        spec = PopulationSpec(val_fracs=(0.5,), mo_frac=0.2, rand_frac=0.3)
        a = run(init_population(spec, m0=-0.001), MarketParams(horizon=100),
                CommitmentParams(), seed=99)
        b = run(init_population(spec, m0=-0.001), MarketParams(horizon=100),
                CommitmentParams(), seed=99)
        assert a.prices == b.prices
        assert a.momenta == b.momenta
        assert a.wealth == b.wealth

    def test_price_floor_aborts_and_counts_as_crash(self):
        # Mo holds everything: one-sided selling caps the price down forever
        spec = PopulationSpec(val_fracs=(0.0,), mo_frac=1.0)
        state = init_population(spec, m0=-0.001)
        result = run(state, MarketParams(horizon=300), CommitmentParams(), seed=0)
        assert result.aborted
        assert result.crash_step is not None
        assert len(result.prices) < 301

    def test_wealth_is_marked_to_market(self):
        state = two_trader_state(theta=0.3)
        result = run(state, MarketParams(horizon=5), CommitmentParams(), seed=1)
        for t, snapshot in enumerate(result.wealth):
            total = sum(snapshot)
            expected = (result.final_state.total_cash
                        + result.final_state.total_asset * result.prices[t])
            assert total == pytest.approx(expected, rel=1e-9)


def random_config(rng):
    k = rng.uniform(0.02, 0.3, size=6)
    commitments = CommitmentParams(*k)
    mix = rng.dirichlet(np.ones(3))
    n_vals = int(rng.integers(1, 4))
    spec = PopulationSpec(
        val_fracs=tuple([mix[0] / n_vals] * n_vals), mo_frac=mix[1],
        rand_frac=mix[2],
        valuation="gamma" if rng.random() < 0.3 else "fixed",
        rand_mode="refined" if rng.random() < 0.5 else "basic",
        rho=rng.uniform(0.5, 6.0), p0=rng.uniform(0.8, 1.2))
    params = MarketParams(
        impact="powerlaw" if rng.random() < 0.5 else "ratio",
        zeta=rng.uniform(0.5, 1.5),
        settlement="current" if rng.random() < 0.5 else "updated",
        rho=spec.rho, horizon=100)
    return params, commitments, spec


class TestInvariantSweep:
    def test_conservation_cap_and_nonnegativity_across_mixes(self):
        rng = np.random.default_rng(20240917)
        for case in range(20):
            params, commitments, spec = random_config(rng)
            state = init_population(spec, m0=rng.uniform(-0.002, 0.002),
                                    rng=np.random.default_rng(case))
            c0, q0 = state.total_cash, state.total_asset
            step_rng = np.random.default_rng(1000 + case)
            for _ in range(100):
                state, record = step(state, params, commitments, step_rng)
                assert abs(math.log(record.new_price / record.old_price)) \
                    <= params.eta + 1e-12
                assert abs(state.cash_sum() - c0) <= 1e-12 * max(c0, 1.0)
                assert abs(state.asset_sum() - q0) <= 1e-12 * max(q0, 1.0)
                for trader in state.traders:
                    assert trader.cash >= 0.0
                    assert trader.asset >= 0.0
