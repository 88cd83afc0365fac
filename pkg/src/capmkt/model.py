"""Core market data model: generators, the capacity demand curve, the network.

Monetary conventions: capacity-side quantities are $/MW-day, energy-side
quantities are $/MWh. Capacities and flows are MW.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Generator",
    "DemandCurve",
    "Line",
    "SystemNetwork",
    "TimeSeries",
    "build_demand_curve",
    "qualified_capacity",
    "peaker_levelized_cost",
    "scale_line_limits",
]


@dataclass(frozen=True)
class Generator:
    """One supplier: physical capacity plus the economics that set its bids."""

    id: str
    zone: str
    fuel: str
    p_max: float                 # nameplate capacity, MW
    var_cost: float              # variable production cost, $/MWh
    invest_cost: float           # amortized investment cost, $/MW-day
    unforced_pct: float          # share of capacity credited as firm, in (0, 1]
    dispatchable: bool = True    # False for capacity-factor-driven units

    def __post_init__(self):
        if not self.p_max > 0:
            raise ValueError(f"generator {self.id}: p_max must be > 0, got {self.p_max}")
        if self.var_cost < 0:
            raise ValueError(f"generator {self.id}: var_cost must be >= 0")
        if self.invest_cost < 0:
            raise ValueError(f"generator {self.id}: invest_cost must be >= 0")
        if not 0 < self.unforced_pct <= 1:
            raise ValueError(
                f"generator {self.id}: unforced_pct must be in (0, 1], got {self.unforced_pct}"
            )
        if not self.dispatchable and self.var_cost != 0:
            raise ValueError(f"generator {self.id}: non-dispatchable units must have var_cost 0")


def qualified_capacity(g: Generator) -> float:
    """Capacity the unit may offer for sale in the capacity auction, MW."""
    return g.unforced_pct * g.p_max


def peaker_levelized_cost(g: Generator, hours_per_day: float = 24.0) -> float:
    """Average lifetime cost of the peaking unit, $/MW-day.

    Lifetime cost is investment plus variable cost; the variable part assumes
    ``hours_per_day`` hours of full output per day (an explicit convention,
    configurable because levelization assumptions vary by ISO).
    """
    if hours_per_day < 0:
        raise ValueError("hours_per_day must be >= 0")
    return g.invest_cost + g.var_cost * hours_per_day


@dataclass(frozen=True)
class DemandCurve:
    """Linear capacity demand curve P = -a_slope * Q + pi_max.

    The line passes through the reference point (q_cap, c_cone) and the
    zero-crossing point (q_zero, 0). p1 is the administrative price cap of the
    original piecewise curve; it never binds because clearing happens at or
    below c_cone whenever total qualified capacity covers q_cap.
    """

    a_slope: float             # $/MW-day per MW
    pi_max: float              # price-axis intercept, $/MW-day
    q_cap: float               # unforced capacity requirement, MW
    q_zero: float              # quantity where capacity value reaches 0, MW
    c_cone: float              # peaker net cost of new entry, $/MW-day
    p1: float                  # maximum clearing price of the piecewise curve
    f_excess: float            # excess fraction between q_cap and q_zero
    reserve_margin: float
    translation_factor: float
    d_peak: float              # system peak load, MW

    def price_at(self, quantity: float) -> float:
        """Willingness to pay at a given cleared quantity, $/MW-day."""
        return -self.a_slope * quantity + self.pi_max

    def quantity_at(self, price: float) -> float:
        """Cleared quantity the curve supports at a given price, MW."""
        return (self.pi_max - price) / self.a_slope


def build_demand_curve(
    c_cone: float,
    d_peak: float,
    reserve_margin: float,
    translation_factor: float,
    f_excess: float,
    peaker_levelized_cost: float,
) -> DemandCurve:
    """Construct the capacity demand curve from its administrative parameters.

    q_cap = (1 - translation_factor) * (1 + reserve_margin) * d_peak is the
    unforced capacity requirement; the curve runs through (q_cap, c_cone) and
    zeroes out at q_zero = (1 + f_excess) * q_cap.
    """
    if c_cone <= 0:
        raise ValueError(f"c_cone must be > 0, got {c_cone}")
    if d_peak <= 0:
        raise ValueError(f"d_peak must be > 0, got {d_peak}")
    if peaker_levelized_cost <= 0:
        raise ValueError("peaker_levelized_cost must be > 0")
    for name, val in (
        ("reserve_margin", reserve_margin),
        ("translation_factor", translation_factor),
        ("f_excess", f_excess),
    ):
        if not 0 < val < 1:
            raise ValueError(f"{name} must be in (0, 1), got {val}")

    q_cap = (1.0 - translation_factor) * (1.0 + reserve_margin) * d_peak
    a_slope = c_cone / (f_excess * q_cap)
    pi_max = (1.0 + f_excess) / f_excess * c_cone
    q_zero = (1.0 + f_excess) * q_cap
    return DemandCurve(
        a_slope=a_slope,
        pi_max=pi_max,
        q_cap=q_cap,
        q_zero=q_zero,
        c_cone=c_cone,
        p1=1.5 * peaker_levelized_cost,
        f_excess=f_excess,
        reserve_margin=reserve_margin,
        translation_factor=translation_factor,
        d_peak=d_peak,
    )


@dataclass(frozen=True)
class Line:
    """Directed transmission line with susceptance and flow limits."""

    from_bus: str
    to_bus: str
    susceptance: float   # p.u.
    f_min: float         # MW, lower flow limit (normally negative)
    f_max: float         # MW, upper flow limit

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValueError(f"line {self.from_bus}->{self.to_bus}: endpoints must differ")
        if self.susceptance <= 0:
            raise ValueError(f"line {self.from_bus}->{self.to_bus}: susceptance must be > 0")
        if self.f_min >= self.f_max:
            raise ValueError(f"line {self.from_bus}->{self.to_bus}: need f_min < f_max")


@dataclass(frozen=True)
class SystemNetwork:
    """Zonal network: buses, lines, and generators with bus assignments."""

    buses: tuple[str, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]

    def __post_init__(self):
        if len(set(self.buses)) != len(self.buses):
            raise ValueError("duplicate bus ids")
        bus_set = set(self.buses)
        for ln in self.lines:
            if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
                raise ValueError(f"line {ln.from_bus}->{ln.to_bus}: unknown endpoint")
        ids = [g.id for g in self.generators]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate generator ids")
        for g in self.generators:
            if g.zone not in bus_set:
                raise ValueError(f"generator {g.id}: zone {g.zone!r} is not a bus")

    def generator(self, gen_id: str) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(f"unknown generator id {gen_id!r}")

    @property
    def thermal(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if g.dispatchable)

    @property
    def renewable(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if not g.dispatchable)


@dataclass(frozen=True)
class TimeSeries:
    """Hourly loads per bus and capacity factors per renewable generator."""

    buses: tuple[str, ...]
    hours: tuple[int, ...]
    loads: np.ndarray                       # (n_buses, n_hours), MW
    capacity_factors: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        loads = np.asarray(self.loads, dtype=float)
        if loads.shape != (len(self.buses), len(self.hours)):
            raise ValueError(
                f"loads shape {loads.shape} does not match "
                f"({len(self.buses)} buses, {len(self.hours)} hours)"
            )
        if np.any(loads < 0):
            raise ValueError("loads must be >= 0")
        loads.flags.writeable = False
        object.__setattr__(self, "loads", loads)
        cfs = {}
        for gen_id, cf in self.capacity_factors.items():
            cf = np.asarray(cf, dtype=float)
            if cf.shape != (len(self.hours),):
                raise ValueError(f"capacity factors for {gen_id}: wrong length")
            if np.any((cf < 0) | (cf > 1)):
                raise ValueError(f"capacity factors for {gen_id}: values outside [0, 1]")
            cf.flags.writeable = False
            cfs[gen_id] = cf
        object.__setattr__(self, "capacity_factors", cfs)

    def load(self, bus: str, hour_index: int) -> float:
        return float(self.loads[self.buses.index(bus), hour_index])

    def peak_load(self) -> float:
        """Highest total system load over the horizon, MW."""
        return float(self.loads.sum(axis=0).max())

    def scaled(self, demand_scale: float) -> "TimeSeries":
        """Uniformly scaled copy of the load matrix."""
        if demand_scale <= 0:
            raise ValueError("demand_scale must be > 0")
        return TimeSeries(
            buses=self.buses,
            hours=self.hours,
            loads=self.loads * demand_scale,
            capacity_factors=dict(self.capacity_factors),
        )


def scale_line_limits(network: SystemNetwork, congestion_scale: float) -> SystemNetwork:
    """Network copy with every line limit multiplied by congestion_scale."""
    if congestion_scale <= 0:
        raise ValueError("congestion_scale must be > 0")
    lines = tuple(
        Line(ln.from_bus, ln.to_bus, ln.susceptance,
             ln.f_min * congestion_scale, ln.f_max * congestion_scale)
        for ln in network.lines
    )
    return SystemNetwork(buses=network.buses, lines=lines, generators=network.generators)
