"""capmkt: capacity-auction clearing, zonal DCOPF dispatch, and strategic
best-response analysis for joint capacity/energy markets."""

__version__ = "0.1.0"

from .model import (
    DemandCurve,
    Generator,
    Line,
    SystemNetwork,
    TimeSeries,
    build_demand_curve,
    peaker_levelized_cost,
    qualified_capacity,
    scale_line_limits,
)
from .auction import (
    CapacityBid,
    ClearingResult,
    clear_greedy,
    clear_mip,
    clear_qc,
    consumer_surplus,
    excess_capacity_ratio,
    social_welfare,
    supplier_profit,
)

__all__ = [
    "DemandCurve",
    "Generator",
    "Line",
    "SystemNetwork",
    "TimeSeries",
    "build_demand_curve",
    "peaker_levelized_cost",
    "qualified_capacity",
    "scale_line_limits",
    "CapacityBid",
    "ClearingResult",
    "clear_greedy",
    "clear_mip",
    "clear_qc",
    "consumer_surplus",
    "excess_capacity_ratio",
    "social_welfare",
    "supplier_profit",
]
