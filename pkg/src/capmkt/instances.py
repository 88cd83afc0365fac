"""Seeded random capacity-auction instances for equivalence and property suites.

Instances are sampled so that the demand line crosses a horizontal step of
the supply stack (the marginal supplier is partially allocated) and the stack
covers the capacity requirement. Samples landing on a vertical riser or
failing to clear are rejected and redrawn, which keeps every clearing route
on the regular case the closed-form results address.
"""
from __future__ import annotations

import numpy as np

from .auction import CapacityBid, clear_greedy
from .model import DemandCurve, build_demand_curve

__all__ = ["random_clearing_instance"]


def random_clearing_instance(
    rng: np.random.Generator,
    n_min: int = 3,
    n_max: int = 50,
    max_redraws: int = 200,
) -> tuple[list[CapacityBid], DemandCurve]:
    """Draw a cleared, interior-crossing auction instance with distinct prices.

    One bidder is pinned at the demand curve's reference cost (the price
    anchor c_cone) so every instance carries a well-defined peaker and the
    excess-capacity identity applies.
    """
    for _ in range(max_redraws):
        n = int(rng.integers(n_min, n_max + 1))
        c_cone = float(rng.uniform(50.0, 200.0))
        d_peak = float(rng.uniform(500.0, 5000.0))
        curve = build_demand_curve(
            c_cone=c_cone,
            d_peak=d_peak,
            reserve_margin=float(rng.uniform(0.05, 0.4)),
            translation_factor=float(rng.uniform(0.01, 0.2)),
            f_excess=float(rng.uniform(0.05, 0.4)),
            peaker_levelized_cost=c_cone,
        )
        # Distinct prices below the peaker anchor; the last bidder is the peaker.
        prices = rng.uniform(0.0, c_cone * 0.999, size=n - 1)
        prices = np.append(np.sort(prices), c_cone)
        if len(np.unique(prices)) != n:
            continue
        # Quantities sized so the stack comfortably covers the requirement.
        qty = rng.uniform(0.05, 0.6, size=n) * (2.2 * curve.q_cap / n)
        if qty.sum() < curve.q_cap:
            qty *= 1.2 * curve.q_cap / qty.sum()
        bids = [
            CapacityBid(f"g{i:03d}", float(prices[i]), float(qty[i]))
            for i in range(n)
        ]
        result = clear_greedy(bids, curve)
        if not result.cleared or result.marginal is None:
            continue
        residual = result.sold[result.marginal]
        offer = next(b.offer_qty for b in bids if b.generator_id == result.marginal)
        if 0.0 < residual < offer:
            return bids, curve
    raise RuntimeError("failed to sample an interior-crossing instance")
