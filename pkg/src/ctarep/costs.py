"""Implementation-cost arithmetic: per-contract execution cost and annual all-in drag."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .market_data import ReturnSeries, read_config

BP = 1e-4


@dataclass(frozen=True)
class TxCostInputs:
    """Round-turn cost components in currency per contract."""

    half_spread: float
    brokerage: float
    fees: float
    slippage_buffer: float
    contract_notional: float

    def __post_init__(self):
        for name in ("half_spread", "brokerage", "fees", "slippage_buffer"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")
        if self.contract_notional <= 0:
            raise InputError("contract_notional must be > 0")


def tx_cost_bp(inputs: TxCostInputs) -> float:
    total = inputs.half_spread + inputs.brokerage + inputs.fees + inputs.slippage_buffer
    return total / inputs.contract_notional * 1e4


@dataclass(frozen=True)
class CostAssumptions:
    round_turns_per_year: tuple[float, float] = (20.0, 35.0)
    gross_leverage: float = 4.0
    avg_roll_drag_bp: float = 12.0
    rolls_per_year_factor: float = 1.0
    mgmt_fee_bp: float = 50.0

    def __post_init__(self):
        lo, hi = self.round_turns_per_year
        if lo < 0 or hi < lo:
            raise InputError(f"round_turns_per_year must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        if self.gross_leverage < 0 or self.avg_roll_drag_bp < 0 or self.mgmt_fee_bp < 0:
            raise InputError("cost assumptions must be non-negative")
        if self.rolls_per_year_factor < 0:
            raise InputError("rolls_per_year_factor must be non-negative")
        object.__setattr__(self, "round_turns_per_year", (float(lo), float(hi)))


def all_in_cost_bp(a: CostAssumptions, tx_bp: float) -> tuple[float, float]:
    """Annual (lo, hi) drag in bp of AUM: trading + leveraged roll + management."""
    roll = a.gross_leverage * a.rolls_per_year_factor * a.avg_roll_drag_bp
    lo, hi = a.round_turns_per_year
    return lo * tx_bp + roll + a.mgmt_fee_bp, hi * tx_bp + roll + a.mgmt_fee_bp


def apply_costs(gross: ReturnSeries, annual_cost_bp: float, days_per_year: int = 252) -> ReturnSeries:
    """Subtract a uniform daily drag of ``annual_cost_bp / days_per_year``."""
    if annual_cost_bp < 0:
        raise InputError("annual_cost_bp must be >= 0")
    drag = annual_cost_bp * BP / days_per_year
    return ReturnSeries(gross.dates, np.asarray(gross.values) - drag, gross.name)


def load_cost_assumptions(path) -> tuple[CostAssumptions, float]:
    """Read the ``costs:`` block of a universe file; returns (assumptions, tx bp)."""
    block = dict(read_config(path).get("costs") or {})
    tx = float(block.pop("tx_cost_bp", 2.0))
    return cost_assumptions_from_dict(block), tx


def cost_assumptions_from_dict(block: dict) -> CostAssumptions:
    known = set(CostAssumptions.__dataclass_fields__)
    unknown = set(block) - known
    if unknown:
        raise InputError(f"unknown cost settings {sorted(unknown)}")
    kw = dict(block)
    if "round_turns_per_year" in kw:
        rt = kw["round_turns_per_year"]
        kw["round_turns_per_year"] = (rt, rt) if np.isscalar(rt) else tuple(rt)
    return CostAssumptions(**kw)
