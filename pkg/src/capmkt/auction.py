"""Capacity spot-auction clearing and its surplus/profit analytics.

Three independent clearing routes are provided and must agree on every
regular instance:

* ``clear_greedy``   -- merit-order walk down the supply stack;
* ``clear_qc``       -- welfare-maximizing water fill (the analytic optimum of
  the concave quadratic welfare program over sold quantities);
* ``clear_mip``      -- exact enumeration of the marginal-supplier assignment
  in the integer formulation (one binary marker per candidate).

A "regular" instance is one where the demand line crosses a horizontal step
of the supply curve, so the marginal supplier is partially allocated. When
the crossing lands on a vertical riser instead (demand at the next price
level falls below the capacity already stacked), there is no partially
allocated supplier: greedy and the water fill resolve the equilibrium at the
stack corner with ``marginal=None``, while the integer route reports
``cleared=False`` because no marginal assignment is feasible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import DemandCurve

__all__ = [
    "CapacityBid",
    "ClearingResult",
    "MipAssignment",
    "clear_greedy",
    "clear_qc",
    "clear_mip",
    "mip_assignment",
    "enumerate_mip",
    "social_welfare",
    "consumer_surplus",
    "excess_capacity_ratio",
    "supplier_profit",
    "qc_kkt_residual",
]


@dataclass(frozen=True)
class CapacityBid:
    """A supplier's (price, quantity) offer into the capacity auction."""

    generator_id: str
    offer_price: float   # $/MW-day
    offer_qty: float     # MW

    def __post_init__(self):
        if self.offer_price < 0:
            raise ValueError(f"bid {self.generator_id}: offer_price must be >= 0")
        if self.offer_qty < 0:
            raise ValueError(f"bid {self.generator_id}: offer_qty must be >= 0")


@dataclass(frozen=True)
class ClearingResult:
    """Capacity auction outcome.

    ``sold`` maps every bidder to its sold MW. ``marginal`` is the partially
    allocated price-setting supplier, or None at a stack-corner equilibrium.
    """

    cleared: bool
    price: float
    quantity: float
    sold: Mapping[str, float]
    marginal: str | None
    allocated: frozenset[str]

    @staticmethod
    def failed(bids: Sequence[CapacityBid]) -> "ClearingResult":
        return ClearingResult(
            cleared=False,
            price=float("nan"),
            quantity=0.0,
            sold={b.generator_id: 0.0 for b in bids},
            marginal=None,
            allocated=frozenset(),
        )


def _merit_order(bids: Sequence[CapacityBid]) -> list[CapacityBid]:
    """Ascending price order; price ties broken by generator id."""
    if not bids:
        raise ValueError("at least one bid is required")
    ids = [b.generator_id for b in bids]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate generator ids in bid list")
    return sorted(bids, key=lambda b: (b.offer_price, b.generator_id))


def clear_greedy(bids: Sequence[CapacityBid], curve: DemandCurve) -> ClearingResult:
    """Merit-order clearing: walk the stack until supply covers the demand line.

    The marginal supplier is the first bidder whose cumulative offered
    capacity reaches the demand-curve quantity at its own price; it sells the
    residual, everyone cheaper sells in full, everyone dearer sells nothing.
    If even the full stack cannot reach the demand line, the market fails to
    clear.
    """
    order = _merit_order(bids)
    cum = 0.0
    marginal_idx = None
    for idx, bid in enumerate(order):
        cum += bid.offer_qty
        if curve.quantity_at(bid.offer_price) <= cum:
            marginal_idx = idx
            break
    if marginal_idx is None:
        return ClearingResult.failed(bids)

    marginal = order[marginal_idx]
    price = marginal.offer_price
    quantity = curve.quantity_at(price)
    cum_before = cum - marginal.offer_qty
    residual = quantity - cum_before
    if residual < 0:
        # Corner equilibrium: the demand line crosses the vertical riser below
        # this bidder's price. Everyone cheaper sells in full; the clearing
        # price comes off the demand curve and nobody is partially allocated.
        quantity = cum_before
        if quantity <= 0:
            return ClearingResult.failed(bids)
        price = curve.price_at(quantity)
        sold = {
            b.generator_id: (b.offer_qty if i < marginal_idx else 0.0)
            for i, b in enumerate(order)
        }
        allocated = frozenset(
            b.generator_id for i, b in enumerate(order) if i < marginal_idx and b.offer_qty > 0
        )
        return ClearingResult(True, price, quantity, sold, None, allocated)

    sold = {}
    for i, b in enumerate(order):
        if i < marginal_idx:
            sold[b.generator_id] = b.offer_qty
        elif i == marginal_idx:
            sold[b.generator_id] = residual
        else:
            sold[b.generator_id] = 0.0
    allocated = frozenset(gid for gid, q in sold.items() if q > 0) | {marginal.generator_id}
    return ClearingResult(True, price, quantity, sold, marginal.generator_id, allocated)


def clear_qc(bids: Sequence[CapacityBid], curve: DemandCurve) -> ClearingResult:
    """Welfare-maximizing clearing solved analytically as a water fill.

    The welfare objective -(A/2) r^2 + sum (pi_max - W_g) q_g is concave and
    separable up to the shared total r, so the optimum fills bidders in merit
    order while the marginal welfare pi_max - W_g - A r of the next MW stays
    positive. The result satisfies the program's KKT conditions exactly (see
    ``qc_kkt_residual``).
    """
    order = _merit_order(bids)
    r = 0.0
    sold = {b.generator_id: 0.0 for b in bids}
    marginal = None
    corner = False
    for bid in order:
        headroom = curve.quantity_at(bid.offer_price) - r
        if headroom <= 0:
            corner = True
            break
        take = min(bid.offer_qty, headroom)
        sold[bid.generator_id] = take
        r += take
        if take < bid.offer_qty:
            marginal = bid.generator_id
            break
    else:
        # Stack exhausted with every offer fully taken. Cleared only if the
        # demand line was reached exactly at the top of the stack; otherwise
        # the market cannot cover the demand curve at any offered price.
        if curve.quantity_at(order[-1].offer_price) > r:
            return ClearingResult.failed(bids)
        marginal = order[-1].generator_id

    if r <= 0.0:
        return ClearingResult.failed(bids)
    if marginal is not None and not corner:
        price = next(b.offer_price for b in order if b.generator_id == marginal)
    else:
        price = curve.price_at(r)
    allocated = frozenset(gid for gid, q in sold.items() if q > 0)
    if marginal is not None:
        allocated = allocated | {marginal}
    return ClearingResult(True, price, r, sold, marginal, allocated)


@dataclass(frozen=True)
class MipAssignment:
    """One feasible marginal-supplier assignment of the integer formulation."""

    marginal_id: str
    x: Mapping[str, int]          # 1 if allocated
    z: Mapping[str, int]          # 1 on the single marginal supplier
    big_m: float                  # quantity bound = sold quantity at the cheapest price
    sold_targets: Mapping[str, float]   # demand-curve quantity at each bidder's price
    objective: float              # sum W_g z_g = clearing price


def clear_mip(bids: Sequence[CapacityBid], curve: DemandCurve) -> ClearingResult:
    """Exact optimum of the marginal-assignment integer program by enumeration.

    The single-marginal constraint leaves one candidate assignment per bidder:
    z picks the marginal supplier g, x allocates every bidder up to g, sold
    quantities follow (full below the marginal, residual at it, zero above).
    Each candidate is checked against all constraints; the feasible one with
    the lowest price wins. Infeasible everywhere -> market does not clear.
    """
    result, _ = enumerate_mip(bids, curve)
    return result


def mip_assignment(bids: Sequence[CapacityBid], curve: DemandCurve) -> MipAssignment | None:
    """Optimal binary assignment behind ``clear_mip``; None if infeasible."""
    _, assignment = enumerate_mip(bids, curve)
    return assignment


def enumerate_mip(
    bids: Sequence[CapacityBid], curve: DemandCurve
) -> tuple[ClearingResult, MipAssignment | None]:
    """Enumerate all marginal-supplier assignments; see ``clear_mip``."""
    order = _merit_order(bids)
    a, pi_max = curve.a_slope, curve.pi_max
    sold_targets = {b.generator_id: (pi_max - b.offer_price) / a for b in order}
    big_m = sold_targets[order[0].generator_id]

    best: tuple[float, int, dict[str, float]] | None = None
    for k, cand in enumerate(order):
        target = sold_targets[cand.generator_id]
        cum_before = sum(order[i].offer_qty for i in range(k))
        residual = target - cum_before
        # Feasibility of the candidate: the marginal supplier sells a
        # nonnegative residual within its offer, everyone below sells in full.
        if residual < 0 or residual > cand.offer_qty:
            continue
        q = {b.generator_id: 0.0 for b in order}
        for i in range(k):
            q[order[i].generator_id] = order[i].offer_qty
        q[cand.generator_id] = residual
        if best is None or cand.offer_price < best[0]:
            best = (cand.offer_price, k, q)

    if best is None:
        return ClearingResult.failed(bids), None

    price, k, sold = best
    marginal = order[k]
    quantity = sold_targets[marginal.generator_id]
    x = {b.generator_id: (1 if i <= k else 0) for i, b in enumerate(order)}
    z = {b.generator_id: (1 if i == k else 0) for i, b in enumerate(order)}
    assignment = MipAssignment(
        marginal_id=marginal.generator_id,
        x=x,
        z=z,
        big_m=big_m,
        sold_targets=sold_targets,
        objective=price,
    )
    allocated = frozenset(gid for gid, qty in sold.items() if qty > 0) | {marginal.generator_id}
    result = ClearingResult(True, price, quantity, sold, marginal.generator_id, allocated)
    return result, assignment


def social_welfare(
    result: ClearingResult, bids: Sequence[CapacityBid], curve: DemandCurve
) -> float:
    """Producer plus consumer surplus of a cleared auction, $."""
    if not result.cleared:
        raise ValueError("social welfare is undefined for an uncleared market")
    prices = {b.generator_id: b.offer_price for b in bids}
    r = result.quantity
    return -0.5 * curve.a_slope * r * r + sum(
        (curve.pi_max - prices[gid]) * q for gid, q in result.sold.items()
    )


def consumer_surplus(result: ClearingResult, curve: DemandCurve) -> float:
    """Area between the demand line and the clearing price, $."""
    if not result.cleared:
        raise ValueError("consumer surplus is undefined for an uncleared market")
    return 0.5 * (curve.pi_max - result.price) * result.quantity


def excess_capacity_ratio(result: ClearingResult, curve: DemandCurve) -> float:
    """Fraction by which cleared capacity exceeds the requirement.

    Equals (1 - price / c_cone) * f_excess by the demand-curve identities;
    nonnegative whenever the dearest truthful bid does not exceed c_cone.
    """
    if not result.cleared:
        raise ValueError("excess capacity is undefined for an uncleared market")
    ratio = (result.quantity - curve.q_cap) / curve.q_cap
    identity = (1.0 - result.price / curve.c_cone) * curve.f_excess
    if abs(ratio - identity) > 1e-9 * max(1.0, abs(ratio)):
        raise AssertionError(
            f"excess-capacity identity violated: {ratio} vs {identity}"
        )
    return ratio


def supplier_profit(
    result: ClearingResult,
    bids: Sequence[CapacityBid],
    truthful_net_cones: Mapping[str, float],
) -> dict[str, float]:
    """Per-supplier capacity-market profit: clearing revenue minus net CONE cost.

    Cost is charged on the full offered quantity (net CONE is sunk on the whole
    qualified capacity), so with truthful offers: allocated non-marginal units
    earn (price - W_g) * qty > 0, the marginal unit earns at most 0, and
    unallocated units lose their full W_g * qty.
    """
    prices = {b.generator_id: b.offer_price for b in bids}
    qty = {b.generator_id: b.offer_qty for b in bids}
    profits = {}
    for b in bids:
        gid = b.generator_id
        w = truthful_net_cones[gid]
        revenue = (result.price * result.sold[gid]) if result.cleared else 0.0
        profits[gid] = revenue - w * qty[gid]

    if result.cleared and result.marginal is not None:
        distinct = len(set(prices.values())) == len(prices)
        w_marginal = prices[result.marginal]
        truthful = all(abs(prices[g] - truthful_net_cones[g]) < 1e-12 for g in prices)
        if distinct and truthful and w_marginal != 0:
            for gid, p in profits.items():
                if gid == result.marginal:
                    ok = p <= 1e-9
                elif gid in result.allocated:
                    ok = p > 0 or truthful_net_cones[gid] == result.price
                else:
                    ok = p < 0 or truthful_net_cones[gid] == 0
                if not ok:
                    raise AssertionError(f"profit sign violated for {gid}: {p}")
    return profits


def qc_kkt_residual(
    result: ClearingResult, bids: Sequence[CapacityBid], curve: DemandCurve
) -> float:
    """Max KKT residual of the welfare program at a clearing result.

    Stationarity in each sold quantity gives marginal welfare
    pi_max - W_g - A r = price - W_g; complementarity requires it to be
    >= 0 at a fully sold offer, <= 0 at a zero offer, and 0 strictly inside.
    """
    if not result.cleared:
        raise ValueError("KKT residual is undefined for an uncleared market")
    r = result.quantity
    resid = abs(sum(result.sold.values()) - r)
    price = curve.price_at(r)
    resid = max(resid, abs(price - result.price))
    for b in bids:
        q = result.sold[b.generator_id]
        grad = price - b.offer_price
        resid = max(resid, -q)                      # q >= 0
        resid = max(resid, q - b.offer_qty)         # q <= offer
        if q <= 0.0:
            resid = max(resid, grad)                # no profitable entry
        elif q >= b.offer_qty:
            resid = max(resid, -grad)               # no profitable exit
        else:
            resid = max(resid, abs(grad))           # interior: stationary
    return resid
