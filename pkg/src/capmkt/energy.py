"""Hourly zonal DCOPF dispatch, locational prices, and the net-CONE pipeline.

Each hour is an independent LP: minimize production plus lost-load cost
subject to nodal balance, linearized flow physics, line limits, and offered
capacities. Nodal prices are the balance-row duals; capacity and line-limit
duals come off the reduced costs of the bounded variables.

The capacity a generator may run at is what it offered: the capacity sold in
the capacity market plus any extra it brings directly to the energy market.
With truthful offers the split is irrelevant (only the total binds), which is
what decouples the two markets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .lp import INF, KktReport, LinearProgram, LpSolution, check_kkt, solve
from .model import Generator, SystemNetwork, TimeSeries, qualified_capacity

__all__ = [
    "EnergyOffer",
    "HourlyDispatch",
    "EnergyMarketResult",
    "truthful_offers",
    "build_hourly_lp",
    "dispatch",
    "generator_energy_profit",
    "compute_net_cone",
    "uniform_lmp_check",
    "UniformLmpRecord",
]

DEFAULT_VOLL = 1000.0
BINDING_TOL = 1e-6


@dataclass(frozen=True)
class EnergyOffer:
    """Capacity a generator brings to the energy market, split by origin."""

    generator_id: str
    capacity_from_cm: float          # MW sold in the capacity auction
    extra_capacity: float = 0.0      # MW offered on top of the auction result
    bid_price: float | None = None   # $/MWh; None = bid the true variable cost

    def __post_init__(self):
        if self.capacity_from_cm < 0 or self.extra_capacity < 0:
            raise ValueError(f"offer {self.generator_id}: capacities must be >= 0")

    @property
    def total(self) -> float:
        return self.capacity_from_cm + self.extra_capacity


def truthful_offers(
    network: SystemNetwork, sold: Mapping[str, float] | None = None
) -> dict[str, EnergyOffer]:
    """Full-capacity offers at true cost; `sold` only sets the bookkeeping split."""
    offers = {}
    for g in network.generators:
        q_cm = min(float(sold.get(g.id, 0.0)), g.p_max) if sold else 0.0
        offers[g.id] = EnergyOffer(g.id, q_cm, g.p_max - q_cm)
    return offers


@dataclass(frozen=True)
class HourlyDispatch:
    """One hour's optimal dispatch with its prices and binding-limit duals."""

    hour: int
    cost: float
    production: Mapping[str, float]      # MW per generator
    unmet: Mapping[str, float]           # MW shed per bus
    flows: tuple[float, ...]             # MW per line, network order
    angles: Mapping[str, float]          # rad per bus
    lmp: Mapping[str, float]             # $/MWh per bus
    alpha: Mapping[str, float]           # capacity-limit dual per thermal unit
    zeta: tuple[float, ...]              # upper line-limit dual per line
    eta: tuple[float, ...]               # lower line-limit dual per line
    kkt: KktReport


@dataclass(frozen=True)
class EnergyMarketResult:
    hours: tuple[HourlyDispatch, ...]
    total_cost: float
    profit: Mapping[str, float]          # $ per generator over the horizon
    shed_energy: Mapping[str, float]     # MWh per bus over the horizon


def _offers_by_id(
    network: SystemNetwork, offers: Mapping[str, EnergyOffer] | Sequence[EnergyOffer]
) -> dict[str, EnergyOffer]:
    table = dict(offers) if isinstance(offers, Mapping) else {o.generator_id: o for o in offers}
    for g in network.generators:
        if g.id not in table:
            raise ValueError(f"missing energy offer for generator {g.id}")
        o = table[g.id]
        if o.total > g.p_max + 1e-9:
            raise ValueError(
                f"offer {g.id}: total {o.total} exceeds capacity {g.p_max}"
            )
    return table


def build_hourly_lp(
    network: SystemNetwork,
    timeseries: TimeSeries,
    offers: Mapping[str, EnergyOffer] | Sequence[EnergyOffer],
    hour_index: int,
    voll: float = DEFAULT_VOLL,
    reference_bus: str | None = None,
) -> LinearProgram:
    """Assemble one hour of the dispatch LP.

    Variables: thermal production in [0, offered capacity], renewable
    production pinned to capacity factor times offered capacity, per-bus
    unserved load, line flows within their limits, and bus angles (the
    reference bus is pinned to zero).
    """
    table = _offers_by_id(network, offers)
    if not 0 <= hour_index < len(timeseries.hours):
        raise ValueError(f"hour index {hour_index} outside horizon")
    buses = sorted(network.buses)
    ref = reference_bus if reference_bus is not None else buses[0]
    if ref not in network.buses:
        raise ValueError(f"reference bus {ref!r} is not in the network")

    lp = LinearProgram()
    for g in network.generators:
        offer = table[g.id]
        if g.dispatchable:
            price = offer.bid_price if offer.bid_price is not None else g.var_cost
            lp.add_variable(f"p[{g.id}]", cost=price, lower=0.0, upper=offer.total)
        else:
            cf = timeseries.capacity_factors.get(g.id)
            if cf is None:
                raise ValueError(f"renewable {g.id} has no capacity-factor series")
            fixed = float(cf[hour_index]) * offer.total
            lp.add_variable(f"p[{g.id}]", cost=0.0, lower=fixed, upper=fixed)
    for bus in buses:
        lp.add_variable(f"unmet[{bus}]", cost=voll, lower=0.0, upper=INF)
        lp.add_variable(f"theta[{bus}]", lower=-INF, upper=INF)
    for k, ln in enumerate(network.lines):
        lp.add_variable(f"f[{k}]", cost=0.0, lower=ln.f_min, upper=ln.f_max)

    bus_idx = {b: i for i, b in enumerate(timeseries.buses)}
    for bus in buses:
        terms: list[tuple[str, float]] = [(f"unmet[{bus}]", 1.0)]
        for g in network.generators:
            if g.zone == bus:
                terms.append((f"p[{g.id}]", 1.0))
        for k, ln in enumerate(network.lines):
            if ln.to_bus == bus:
                terms.append((f"f[{k}]", 1.0))
            if ln.from_bus == bus:
                terms.append((f"f[{k}]", -1.0))
        demand = float(timeseries.loads[bus_idx[bus], hour_index])
        lp.add_constraint(f"balance[{bus}]", terms, "=", demand)
    for k, ln in enumerate(network.lines):
        lp.add_constraint(
            f"flowdef[{k}]",
            [(f"f[{k}]", 1.0),
             (f"theta[{ln.from_bus}]", -ln.susceptance),
             (f"theta[{ln.to_bus}]", ln.susceptance)],
            "=",
            0.0,
        )
    lp.add_constraint("reference", [(f"theta[{ref}]", 1.0)], "=", 0.0)
    return lp


def _extract_hour(
    network: SystemNetwork, lp: LinearProgram, sol: LpSolution, hour: int,
    kkt_tol: float,
) -> HourlyDispatch:
    buses = sorted(network.buses)
    production = {g.id: sol.x[f"p[{g.id}]"] for g in network.generators}
    unmet = {b: sol.x[f"unmet[{b}]"] for b in buses}
    flows = tuple(sol.x[f"f[{k}]"] for k in range(len(network.lines)))
    angles = {b: sol.x[f"theta[{b}]"] for b in buses}
    lmp = {b: sol.duals[f"balance[{b}]"] for b in buses}
    alpha = {
        g.id: max(0.0, -sol.reduced_costs[f"p[{g.id}]"])
        for g in network.generators
        if g.dispatchable
    }
    zeta = tuple(max(0.0, -sol.reduced_costs[f"f[{k}]"]) for k in range(len(network.lines)))
    eta = tuple(max(0.0, sol.reduced_costs[f"f[{k}]"]) for k in range(len(network.lines)))
    report = check_kkt(lp, sol, kkt_tol)
    return HourlyDispatch(
        hour=hour, cost=sol.objective, production=production, unmet=unmet,
        flows=flows, angles=angles, lmp=lmp, alpha=alpha, zeta=zeta, eta=eta,
        kkt=report,
    )


def dispatch(
    network: SystemNetwork,
    timeseries: TimeSeries,
    offers: Mapping[str, EnergyOffer] | Sequence[EnergyOffer],
    voll: float = DEFAULT_VOLL,
    reference_bus: str | None = None,
    kkt_tol: float = 1e-6,
) -> EnergyMarketResult:
    """Solve every hour of the horizon and aggregate costs, profits, shedding.

    Profits are settled at nodal prices against true variable cost, whatever
    price was bid: sum over hours of (lmp - var_cost) * production.
    """
    table = _offers_by_id(network, offers)
    hours = []
    for idx, hour in enumerate(timeseries.hours):
        lp = build_hourly_lp(network, timeseries, table, idx, voll, reference_bus)
        sol = solve(lp)
        if sol.status != "optimal":
            raise RuntimeError(f"hourly dispatch LP not optimal at hour {hour}: {sol.status}")
        hours.append(_extract_hour(network, lp, sol, hour, kkt_tol))

    profit = {}
    for g in network.generators:
        bus = g.zone
        profit[g.id] = sum(
            (h.lmp[bus] - g.var_cost) * h.production[g.id] for h in hours
        )
    shed = {b: sum(h.unmet[b] for h in hours) for b in sorted(network.buses)}
    total = sum(h.cost for h in hours)
    return EnergyMarketResult(
        hours=tuple(hours), total_cost=total, profit=profit, shed_energy=shed,
    )


def generator_energy_profit(
    result: EnergyMarketResult, g: Generator, capacity_factors: np.ndarray | None = None
) -> float:
    """Closed-form settlement of a truthfully offered generator, $.

    Thermal units collect (lmp - var_cost) on full capacity exactly in the
    hours the price clears their cost; renewables collect lmp on capacity
    factor times capacity. Matches the simulated settlement on truthful runs.
    """
    bus = g.zone
    if g.dispatchable:
        return sum(
            max(0.0, h.lmp[bus] - g.var_cost) * g.p_max for h in result.hours
        )
    if capacity_factors is None:
        raise ValueError("renewable profit needs the capacity-factor series")
    return sum(
        h.lmp[bus] * float(capacity_factors[i]) * g.p_max
        for i, h in enumerate(result.hours)
    )


@dataclass(frozen=True)
class NetConeResult:
    """Net cost of new entry per generator plus the resulting peaker anchor."""

    per_generator: Mapping[str, float]   # $/MW-day
    peaker_id: str
    c_cone: float
    energy_profit: Mapping[str, float]   # $ over the horizon
    days_in_horizon: float


def compute_net_cone(
    network: SystemNetwork,
    timeseries: TimeSeries,
    voll: float = DEFAULT_VOLL,
    days_in_horizon: float | None = None,
) -> NetConeResult:
    """Truthful-dispatch energy profits netted against investment cost.

    net CONE = max(0, invest_cost - energy profit per MW-day); the peaker is
    the generator with the highest net CONE (ties broken by id) and anchors
    the capacity demand curve at c_cone.
    """
    if len(timeseries.hours) == 0:
        raise ValueError("empty horizon")
    days = days_in_horizon if days_in_horizon is not None else len(timeseries.hours) / 24.0
    if days <= 0:
        raise ValueError("days_in_horizon must be > 0")
    result = dispatch(network, timeseries, truthful_offers(network), voll)
    cones = {}
    for g in network.generators:
        per_mw_day = result.profit[g.id] / (g.p_max * days)
        cones[g.id] = max(0.0, g.invest_cost - per_mw_day)
    peaker = max(sorted(cones), key=lambda gid: cones[gid])
    return NetConeResult(
        per_generator=cones,
        peaker_id=peaker,
        c_cone=cones[peaker],
        energy_profit=dict(result.profit),
        days_in_horizon=days,
    )


@dataclass(frozen=True)
class UniformLmpRecord:
    hour: int
    congested: bool
    binding_lines: tuple[int, ...]
    lmp_spread: float
    uniform: bool


def uniform_lmp_check(
    network: SystemNetwork, result: EnergyMarketResult, tol: float = 1e-7
) -> list[UniformLmpRecord]:
    """Flag congested hours and verify price uniformity on the others.

    A line is binding when its flow sits within a relative whisker of either
    limit. Hours with no binding line must price identically at every bus.
    """
    records = []
    for h in result.hours:
        binding = []
        for k, ln in enumerate(network.lines):
            whisker = BINDING_TOL * max(1.0, abs(ln.f_max), abs(ln.f_min))
            if h.flows[k] >= ln.f_max - whisker or h.flows[k] <= ln.f_min + whisker:
                binding.append(k)
        lmps = list(h.lmp.values())
        spread = max(lmps) - min(lmps)
        congested = bool(binding)
        records.append(
            UniformLmpRecord(
                hour=h.hour, congested=congested, binding_lines=tuple(binding),
                lmp_spread=spread, uniform=(spread <= tol),
            )
        )
    return records
