"""Discrete-time market mechanism.

One step: collect orders at the prevailing price, move the price by the
configured impact function (capped at e^[+-eta]), settle the orders at the
updated or the current price, update momentum, advance time.

Unit conventions: bids are cash amounts, offers are asset quantities. The
purchase volume q_p used by the impact functions is total bid cash divided
by the prevailing price, so q_p and q_s are both asset quantities and the
ratio in the price update is dimensionless. One-sided order flow moves the
price at the cap; zero flow on both sides leaves it unchanged. Natural
logarithms throughout.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .errors import InvalidInputError
from .params import IMPACT_RATIO, SETTLE_UPDATED, CommitmentParams, MarketParams
from .traders import MarketState, trader_orders

PRICE_FLOOR = 1e-12


@dataclass(frozen=True, slots=True)
class StepOrders:
    """Per-trader orders for one step plus their aggregates.

    bids[i] is trader i's cash bid, offers[i] its asset offer; q_p is the
    total bid converted to asset units at the prevailing price, q_s the
    total asset offered.
    """

    bids: tuple
    offers: tuple
    q_p: float
    q_s: float


@dataclass(frozen=True, slots=True)
class StepRecord:
    """Audit record of one step, used for tests and CSV output."""

    time: int
    old_price: float
    new_price: float
    q_p: float
    q_s: float
    executed: float
    momentum_before: float
    momentum_after: float
    cap_hit: bool


@dataclass(slots=True)
class RunResult:
    """Time series of one run.

    prices/momenta have length steps+1 (initial point included); wealth[t]
    holds each trader's marked-to-market wealth at step t. crash_step and
    boom_step are indices into prices, set when a predicate was supplied.
    aborted marks runs stopped by the price floor; they count as crashes.
    """

    prices: list
    momenta: list
    wealth: list
    records: list
    final_state: MarketState
    crash_step: int | None = None
    boom_step: int | None = None
    aborted: bool = False


def _require_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise InvalidInputError(f"{name} must be finite, got {v}")


def update_price_ratio(p: float, q_p: float, q_s: float,
                       lam: float, eta: float) -> float:
    """Ratio-power impact: p' = p * exp(clamp(lam * log(q_p/q_s), -eta, eta)).

    One-sided flow moves the price at the cap; no flow leaves it unchanged.
    """
    _require_finite(p=p, q_p=q_p, q_s=q_s, lam=lam, eta=eta)
    if p <= 0 or q_p < 0 or q_s < 0:
        raise InvalidInputError(f"need p > 0 and q_p, q_s >= 0, got {p}, {q_p}, {q_s}")
    if q_p == 0.0 and q_s == 0.0:
        return p
    if q_s == 0.0:
        return p * math.exp(eta)
    if q_p == 0.0:
        return p * math.exp(-eta)
    dlog = lam * math.log(q_p / q_s)
    dlog = max(-eta, min(eta, dlog))
    return p * math.exp(dlog)


def update_price_powerlaw(p: float, q_p: float, q_s: float, liquidity: float,
                          zeta: float, eta: float) -> float:
    """Power-law impact in the order difference:
    |d log p| = min(|(q_p - q_s)/liquidity|^zeta, eta), signed by the imbalance."""
    _require_finite(p=p, q_p=q_p, q_s=q_s, liquidity=liquidity, zeta=zeta, eta=eta)
    if p <= 0 or liquidity <= 0 or zeta <= 0 or q_p < 0 or q_s < 0:
        raise InvalidInputError("need p, liquidity, zeta > 0 and q_p, q_s >= 0")
    imbalance = q_p - q_s
    if imbalance == 0.0:
        return p
    dlog = min(abs(imbalance / liquidity) ** zeta, eta)
    return p * math.exp(math.copysign(dlog, imbalance))


def update_momentum(m: float, p: float, p_new: float, mu: float) -> float:
    """Exponentially smoothed log return: mu * log(p_new/p) + (1 - mu) * m."""
    _require_finite(m=m, p=p, p_new=p_new, mu=mu)
    if p <= 0 or p_new <= 0 or not (0.0 < mu < 1.0):
        raise InvalidInputError("need p, p_new > 0 and 0 < mu < 1")
    return mu * math.log(p_new / p) + (1.0 - mu) * m


def settle(state: MarketState, orders: StepOrders, p_settle: float) -> MarketState:
    """Exchange cash and asset at p_settle.

    Bids stay fixed in cash and convert to asset demand at p_settle; offers
    stay fixed in asset units. When demand and supply differ, the larger
    side is scaled down pro-rata to parity. Totals are conserved and no
    holding goes negative.
    """
    if not math.isfinite(p_settle) or p_settle <= 0:
        raise InvalidInputError(f"settlement price must be > 0, got {p_settle}")
    new_state = state.copy()
    total_bid = math.fsum(orders.bids)
    total_offer = math.fsum(orders.offers)
    demand = total_bid / p_settle
    if demand <= 0.0 or total_offer <= 0.0:
        return new_state
    f_buy = min(1.0, total_offer / demand)
    f_sell = min(1.0, demand / total_offer)
    for trader, bid, offer in zip(new_state.traders, orders.bids, orders.offers):
        if bid > 0.0:
            paid = bid * f_buy
            trader.cash -= paid
            trader.asset += paid / p_settle
        if offer > 0.0:
            sold = offer * f_sell
            trader.asset -= sold
            trader.cash += sold * p_settle
    return new_state


def collect_orders(state: MarketState, commitments: CommitmentParams,
                   rng: np.random.Generator | None) -> StepOrders:
    """Gather every trader's orders at the prevailing price."""
    bids = []
    offers = []
    for trader in state.traders:
        bid, offer = trader_orders(trader, state.price, state.momentum,
                                   commitments, rng)
        bids.append(bid)
        offers.append(offer)
    q_p = math.fsum(bids) / state.price
    q_s = math.fsum(offers)
    return StepOrders(tuple(bids), tuple(offers), q_p, q_s)


def _raw_dlog(orders: StepOrders, params: MarketParams) -> float:
    """Uncapped log price change implied by the order flow."""
    if params.impact == IMPACT_RATIO:
        if orders.q_p == 0.0 and orders.q_s == 0.0:
            return 0.0
        if orders.q_s == 0.0:
            return math.inf
        if orders.q_p == 0.0:
            return -math.inf
        return params.lam * math.log(orders.q_p / orders.q_s)
    imbalance = orders.q_p - orders.q_s
    if imbalance == 0.0:
        return 0.0
    return math.copysign(abs(imbalance / params.liquidity) ** params.zeta, imbalance)


def step(state: MarketState, params: MarketParams, commitments: CommitmentParams,
         rng: np.random.Generator | None = None) -> tuple[MarketState, StepRecord]:
    """Advance the market by one step; the price updates even when no trade
    executes."""
    orders = collect_orders(state, commitments, rng)
    if params.impact == IMPACT_RATIO:
        p_new = update_price_ratio(state.price, orders.q_p, orders.q_s,
                                   params.lam, params.eta)
    else:
        p_new = update_price_powerlaw(state.price, orders.q_p, orders.q_s,
                                      params.liquidity, params.zeta, params.eta)
    p_settle = p_new if params.settlement == SETTLE_UPDATED else state.price
    new_state = settle(state, orders, p_settle)
    executed = min(math.fsum(orders.bids) / p_settle, math.fsum(orders.offers))
    m_new = update_momentum(state.momentum, state.price, p_new, params.mu)
    new_state.price = p_new
    new_state.momentum = m_new
    new_state.time = state.time + 1
    record = StepRecord(time=new_state.time, old_price=state.price,
                        new_price=p_new, q_p=orders.q_p, q_s=orders.q_s,
                        executed=executed,
                        momentum_before=state.momentum, momentum_after=m_new,
                        cap_hit=abs(_raw_dlog(orders, params)) > params.eta)
    return new_state, record


def run(initial: MarketState, params: MarketParams, commitments: CommitmentParams,
        seed: int, crash: "metrics.CrashPredicate | None" = None,
        stop_at_crash: bool = False) -> RunResult:
    """Run params.horizon steps from the initial state.

    Identical seed and configuration give a bit-identical result. A run
    aborts (and counts as a crash) if the price falls below the 1e-12
    floor. With stop_at_crash the loop ends as soon as the crash predicate
    fires, which shortens the recorded series.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    state = initial.copy()
    prices = [state.price]
    momenta = [state.momentum]
    wealth = [[t.wealth(state.price) for t in state.traders]]
    records: list[StepRecord] = []
    aborted = False
    for _ in range(params.horizon):
        state, record = step(state, params, commitments, rng)
        prices.append(state.price)
        momenta.append(state.momentum)
        wealth.append([t.wealth(state.price) for t in state.traders])
        records.append(record)
        if state.price < PRICE_FLOOR:
            aborted = True
            break
        if stop_at_crash and crash is not None and crash.crash_at(prices[0], state.price):
            break
    crash_step = boom_step = None
    if crash is not None:
        crash_step = metrics.detect_crash(prices, crash)
        boom_step = metrics.detect_boom(prices, crash)
    if aborted and crash_step is None:
        crash_step = len(prices) - 1
    return RunResult(prices=prices, momenta=momenta, wealth=wealth,
                     records=records, final_state=state,
                     crash_step=crash_step, boom_step=boom_step, aborted=aborted)
