import math

import numpy as np
import pytest

from capmkt.auction import (
    CapacityBid,
    clear_greedy,
    clear_mip,
    clear_qc,
    consumer_surplus,
    enumerate_mip,
    excess_capacity_ratio,
    qc_kkt_residual,
    social_welfare,
    supplier_profit,
)
from capmkt.instances import random_clearing_instance
from capmkt.model import DemandCurve, build_demand_curve


def toy_curve(a_slope=1.0, pi_max=260.0, c_cone=None, f_excess=0.18):
    """Demand line with prescribed slope/intercept; anchors derived for tests
    that need the curve identities."""
    c_cone = c_cone if c_cone is not None else pi_max * f_excess / (1 + f_excess)
    q_cap = c_cone / (f_excess * a_slope)
    return DemandCurve(
        a_slope=a_slope, pi_max=pi_max, q_cap=q_cap, q_zero=(1 + f_excess) * q_cap,
        c_cone=c_cone, p1=1.5 * c_cone, f_excess=f_excess,
        reserve_margin=0.2, translation_factor=0.08, d_peak=q_cap / 1.1,
    )


def golden_bids():
    return [
        CapacityBid("g1", 100.0, 50.0),
        CapacityBid("g2", 200.0, 50.0),
        CapacityBid("g3", 300.0, 50.0),
    ]


def brute_force_clear(bids, curve):
    """Independent oracle: try every bidder as the marginal supplier and keep
    the one whose residual lands inside its offer."""
    order = sorted(bids, key=lambda b: (b.offer_price, b.generator_id))
    cum = 0.0
    for idx, bid in enumerate(order):
        r = (curve.pi_max - bid.offer_price) / curve.a_slope
        if cum <= r <= cum + bid.offer_qty:
            sold = {b.generator_id: 0.0 for b in order}
            for j in range(idx):
                sold[order[j].generator_id] = order[j].offer_qty
            sold[bid.generator_id] = r - cum
            return bid.offer_price, r, sold, bid.generator_id
        cum += bid.offer_qty
    return None


class TestGreedy:
    def test_golden_instance(self):
        curve = toy_curve()
        res = clear_greedy(golden_bids(), curve)
        oracle = brute_force_clear(golden_bids(), curve)
        assert oracle is not None
        assert res.cleared
        assert res.price == pytest.approx(oracle[0]) == 200.0
        assert res.quantity == pytest.approx(oracle[1]) == 60.0
        assert res.sold == pytest.approx(oracle[2])
        assert res.marginal == oracle[3] == "g2"
        assert res.allocated == frozenset({"g1", "g2"})

    def test_single_peaker_clears_at_requirement(self):
        curve = build_demand_curve(1246.5, 10000.0, 0.2070, 0.0856, 0.18, 2868.9)
        bids = [CapacityBid("peaker", curve.c_cone, curve.q_cap)]
        res = clear_greedy(bids, curve)
        assert res.cleared
        assert res.quantity == pytest.approx(curve.q_cap, rel=1e-12)
        assert res.price == pytest.approx(curve.c_cone)

    def test_all_offers_above_intercept_fail(self):
        curve = toy_curve(pi_max=260.0)
        bids = [CapacityBid("g1", 300.0, 50.0), CapacityBid("g2", 400.0, 50.0)]
        res = clear_greedy(bids, curve)
        assert not res.cleared
        assert math.isnan(res.price)

    def test_insufficient_stack_fails(self):
        curve = toy_curve(a_slope=1.0, pi_max=260.0)
        bids = [CapacityBid("g1", 10.0, 5.0), CapacityBid("g2", 20.0, 5.0)]
        assert not clear_greedy(bids, curve).cleared

    def test_empty_bids_rejected(self):
        with pytest.raises(ValueError):
            clear_greedy([], toy_curve())

    def test_price_tie_resolved_by_id(self):
        curve = toy_curve()
        bids = [
            CapacityBid("b", 200.0, 40.0),
            CapacityBid("a", 200.0, 40.0),
            CapacityBid("c", 100.0, 30.0),
        ]
        res = clear_greedy(bids, curve)
        # merit order: c, a, b -> r* = 60, residual 30 goes to "a" first
        assert res.sold["c"] == 30.0
        assert res.sold["a"] == pytest.approx(30.0)
        assert res.sold["b"] == 0.0
        assert res.marginal == "a"

    def test_riser_crossing_resolves_to_corner(self):
        # Demand at the second price falls below the first offer: no partially
        # allocated supplier exists; price comes off the demand curve.
        curve = toy_curve(a_slope=1.0, pi_max=210.0)
        bids = [CapacityBid("g1", 100.0, 50.0), CapacityBid("g2", 200.0, 50.0)]
        res = clear_greedy(bids, curve)
        assert res.cleared
        assert res.marginal is None
        assert res.quantity == 50.0
        assert res.price == pytest.approx(160.0)
        qc = clear_qc(bids, curve)
        assert qc.quantity == pytest.approx(res.quantity)
        assert qc.price == pytest.approx(res.price)
        # The marginal-assignment route has no feasible assignment here.
        assert not clear_mip(bids, curve).cleared


class TestQc:
    def test_matches_greedy_on_golden_instance(self):
        curve = toy_curve()
        greedy = clear_greedy(golden_bids(), curve)
        qc = clear_qc(golden_bids(), curve)
        assert qc.cleared
        assert qc.price == pytest.approx(greedy.price)
        assert qc.quantity == pytest.approx(greedy.quantity)
        assert qc.sold == pytest.approx(greedy.sold)
        assert qc.marginal == greedy.marginal

    def test_kkt_certificate(self):
        curve = toy_curve()
        res = clear_qc(golden_bids(), curve)
        assert qc_kkt_residual(res, golden_bids(), curve) <= 1e-9

    def test_full_offers_dominate_reduced_offers(self):
        # Welfare with full offers is at least the welfare of any reduction.
        rng = np.random.default_rng(7)
        for _ in range(10):
            bids, curve = random_clearing_instance(rng, n_min=3, n_max=12)
            full = clear_qc(bids, curve)
            w_full = social_welfare(full, bids, curve)
            for _ in range(100):
                reduced = [
                    CapacityBid(b.generator_id, b.offer_price,
                                b.offer_qty * rng.uniform(0.0, 1.0))
                    for b in bids
                ]
                res = clear_qc(reduced, curve)
                if not res.cleared:
                    continue
                assert social_welfare(res, reduced, curve) <= w_full + 1e-9 * abs(w_full)

    def test_no_allocation_when_all_offers_at_intercept(self):
        curve = toy_curve(pi_max=260.0)
        bids = [CapacityBid("g1", 260.0, 50.0), CapacityBid("g2", 290.0, 10.0)]
        res = clear_qc(bids, curve)
        assert not res.cleared
        assert all(q == 0.0 for q in res.sold.values())


class TestMip:
    def test_golden_instance_assignment(self):
        curve = toy_curve()
        res, assignment = enumerate_mip(golden_bids(), curve)
        assert res.cleared and res.marginal == "g2"
        assert assignment.objective == pytest.approx(200.0)
        assert assignment.z == {"g1": 0, "g2": 1, "g3": 0}
        assert assignment.x == {"g1": 1, "g2": 1, "g3": 0}
        assert sum(assignment.z.values()) == 1
        # x_g aggregates the marginal markers at or above g in merit order.
        order = sorted(golden_bids(), key=lambda b: (b.offer_price, b.generator_id))
        ids = [b.generator_id for b in order]
        for i, gid in enumerate(ids):
            assert assignment.x[gid] == sum(assignment.z[j] for j in ids[i:])
        assert assignment.big_m == pytest.approx((260.0 - 100.0) / 1.0)

    def test_infeasible_market(self):
        curve = toy_curve(a_slope=1.0, pi_max=260.0)
        bids = [CapacityBid("g1", 10.0, 5.0)]
        res = clear_mip(bids, curve)
        assert not res.cleared


class TestThreeWayEquivalence:
    def test_random_instances_agree(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            bids, curve = random_clearing_instance(rng, n_min=3, n_max=25)
            g = clear_greedy(bids, curve)
            q = clear_qc(bids, curve)
            m = clear_mip(bids, curve)
            assert g.cleared and q.cleared and m.cleared
            for other in (q, m):
                assert abs(g.price - other.price) <= 1e-9
                assert abs(g.quantity - other.quantity) <= 1e-9
                for gid in g.sold:
                    assert abs(g.sold[gid] - other.sold[gid]) <= 1e-9
            assert g.marginal == q.marginal == m.marginal


class TestSurplusAndWelfare:
    def test_golden_welfare(self):
        curve = toy_curve()
        res = clear_greedy(golden_bids(), curve)
        w = social_welfare(res, golden_bids(), curve)
        assert w == pytest.approx(-0.5 * 60**2 + 160 * 50 + 60 * 10)
        assert w == pytest.approx(6800.0)

    def test_welfare_equals_surplus_sum(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            bids, curve = random_clearing_instance(rng)
            res = clear_greedy(bids, curve)
            producer = sum(
                (res.price - b.offer_price) * res.sold[b.generator_id] for b in bids
            )
            total = producer + consumer_surplus(res, curve)
            w = social_welfare(res, bids, curve)
            assert w == pytest.approx(total, rel=1e-9, abs=1e-9)

    def test_golden_consumer_surplus(self):
        curve = toy_curve()
        res = clear_greedy(golden_bids(), curve)
        assert consumer_surplus(res, curve) == pytest.approx((260 - 200) / 2 * 60)

    def test_surplus_zero_at_intercept_price(self):
        curve = toy_curve()
        res = clear_greedy(golden_bids(), curve)
        capped = type(res)(
            cleared=True, price=curve.pi_max, quantity=res.quantity,
            sold=res.sold, marginal=res.marginal, allocated=res.allocated,
        )
        assert consumer_surplus(capped, curve) == pytest.approx(0.0)

    def test_surplus_decreases_in_price(self):
        curve = toy_curve()
        res = clear_greedy(golden_bids(), curve)
        lower = consumer_surplus(res, curve)
        bumped = type(res)(
            cleared=True, price=res.price + 10.0, quantity=res.quantity,
            sold=res.sold, marginal=res.marginal, allocated=res.allocated,
        )
        assert consumer_surplus(bumped, curve) < lower

    def test_uncleared_market_has_no_welfare(self):
        curve = toy_curve()
        failed = clear_greedy([CapacityBid("g1", 500.0, 10.0)], curve)
        with pytest.raises(ValueError):
            social_welfare(failed, [CapacityBid("g1", 500.0, 10.0)], curve)


class TestExcessCapacity:
    def test_peaker_marginal_gives_zero_excess(self):
        curve = build_demand_curve(1246.5, 10000.0, 0.2070, 0.0856, 0.18, 2868.9)
        bids = [
            CapacityBid("cheap", 100.0, 0.4 * curve.q_cap),
            CapacityBid("peaker", curve.c_cone, curve.q_cap),
        ]
        res = clear_greedy(bids, curve)
        assert res.marginal == "peaker"
        assert excess_capacity_ratio(res, curve) == pytest.approx(0.0, abs=1e-12)
        assert res.quantity == pytest.approx(curve.q_cap, rel=1e-12)

    def test_zero_price_marginal_hits_f_excess(self):
        curve = build_demand_curve(100.0, 1000.0, 0.2, 0.08, 0.18, 100.0)
        bids = [CapacityBid("free", 0.0, 2 * curve.q_zero)]
        res = clear_greedy(bids, curve)
        assert excess_capacity_ratio(res, curve) == pytest.approx(curve.f_excess)

    def test_identity_on_random_instances(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            bids, curve = random_clearing_instance(rng)
            res = clear_greedy(bids, curve)
            ratio = excess_capacity_ratio(res, curve)
            assert ratio >= -1e-12


class TestSupplierProfit:
    def test_golden_profits(self):
        curve = toy_curve()
        bids = golden_bids()
        res = clear_greedy(bids, curve)
        cones = {b.generator_id: b.offer_price for b in bids}
        profits = supplier_profit(res, bids, cones)
        assert profits["g1"] == pytest.approx(5000.0)
        assert profits["g2"] == pytest.approx(-8000.0)
        assert profits["g3"] == pytest.approx(-15000.0)

    def test_profits_match_closed_forms(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            bids, curve = random_clearing_instance(rng)
            res = clear_greedy(bids, curve)
            cones = {b.generator_id: b.offer_price for b in bids}
            profits = supplier_profit(res, bids, cones)
            qual = {b.generator_id: b.offer_qty for b in bids}
            total_alloc = sum(qual[g] for g in res.allocated)
            for b in bids:
                gid = b.generator_id
                if gid == res.marginal:
                    expect = res.price * (res.quantity - total_alloc)
                elif gid in res.allocated:
                    expect = (res.price - cones[gid]) * qual[gid]
                else:
                    expect = -cones[gid] * qual[gid]
                assert profits[gid] == pytest.approx(expect, rel=1e-6, abs=1e-6)

    def test_marginal_peaker_revenue_balance(self):
        # Requirement exactly equals total qualified capacity: the marginal
        # peaker sells everything and breaks even.
        f_excess = 0.18
        c_cone = 120.0
        total = 1000.0
        a_slope = c_cone / (f_excess * total)
        curve = DemandCurve(
            a_slope=a_slope, pi_max=(1 + f_excess) / f_excess * c_cone,
            q_cap=total, q_zero=(1 + f_excess) * total, c_cone=c_cone,
            p1=1.5 * c_cone, f_excess=f_excess, reserve_margin=0.2,
            translation_factor=0.08, d_peak=total / 1.1,
        )
        bids = [
            CapacityBid("cheap", 40.0, 600.0),
            CapacityBid("peaker", c_cone, 400.0),
        ]
        res = clear_greedy(bids, curve)
        assert res.marginal == "peaker"
        cones = {"cheap": 40.0, "peaker": c_cone}
        profits = supplier_profit(res, bids, cones)
        assert abs(profits["peaker"]) <= 1e-6

    def test_zero_price_allocated_nonmarginal(self):
        curve = toy_curve()
        bids = [CapacityBid("free", 0.0, 50.0)] + golden_bids()[1:]
        res = clear_greedy(bids, curve)
        cones = {b.generator_id: b.offer_price for b in bids}
        profits = supplier_profit(res, bids, cones)
        assert profits["free"] == pytest.approx(res.price * 50.0)
