"""Market-outcome statistics, regime comparisons and bias sweeps.

For a solved outcome with posterior atoms w and assignment (q(w), t(w)),

    total surplus = E[w q(w) - c(q(w))]
    rents         = E[w q(w) - t(w)]
    distortion    = E[q_fb(w) - q(w)],  q_fb the first-best quality,

all computed exactly as finite sums over the atoms; an excluded type
contributes nothing to surplus or rent and its full first-best quality to
the distortion. Sweeps over the bias record one row per value and never
abort on a per-row solver failure.
"""

from __future__ import annotations

import concurrent.futures
import io
from dataclasses import dataclass

from .costs import CostFunction
from .distributions import Prior
from .errors import IntermenuError
from .formatting import fmt12
from .menus import REGIME_MUSSA_ROSEN, MenuOutcome
from .restricted import solve_restricted_menu
from .solver import (DirectMenuSolution, direct_single_item_outcome,
                     solve_direct_menu, solve_direct_single_item,
                     solve_mussa_rosen, solve_optimal_menu)

SWEEP_CSV_HEADER = ("b,regime,n_items,profit,rent,total_surplus,"
                    "distortion,avg_quality,trade_prob")


@dataclass(frozen=True)
class MarketStats:
    profit: float
    consumer_rent: float
    total_surplus: float
    distortion: float
    avg_quality: float
    trade_probability: float

    def to_dict(self) -> dict:
        return {
            "profit": self.profit,
            "consumer_rent": self.consumer_rent,
            "total_surplus": self.total_surplus,
            "distortion": self.distortion,
            "avg_quality": self.avg_quality,
            "trade_probability": self.trade_probability,
        }


def market_stats(outcome: MenuOutcome, cost: CostFunction) -> MarketStats:
    """Exact atom sums of profit, rent, surplus, distortion, average quality
    and trade probability for a solved outcome."""
    profit = rent = surplus = distortion = avg_q = trade = 0.0
    if outcome.has_exclusion:
        w0, m0 = outcome.types[0], outcome.masses[0]
        distortion += m0 * float(cost.first_best_quality(w0))
    for w, m, item in zip(outcome.trading_types, outcome.trading_masses,
                          outcome.menu.items):
        q, t = item.quality, item.transfer
        profit += m * (t - float(cost.value(q)))
        rent += m * (w * q - t)
        surplus += m * (w * q - float(cost.value(q)))
        distortion += m * (float(cost.first_best_quality(w)) - q)
        avg_q += m * q
        trade += m
    return MarketStats(profit, rent, surplus, distortion, avg_q, trade)


def mussa_rosen_stats(prior: Prior, cost: CostFunction,
                      grid_points: int = 10001) -> MarketStats:
    sol = solve_mussa_rosen(prior, cost, grid_points)
    return MarketStats(sol.profit, sol.consumer_rent, sol.total_surplus,
                       sol.distortion, sol.avg_quality, sol.trade_probability)


def _direct_menu_outcome_stats(prior: Prior, cost: CostFunction,
                               sol: DirectMenuSolution) -> MarketStats:
    profit = rent = surplus = distortion = avg_q = trade = 0.0
    v1 = sol.cutoffs[0]
    excluded_mass = float(prior.cdf(v1))
    if excluded_mass > 1e-12:
        distortion += excluded_mass * float(
            cost.first_best_quality(prior.conditional_mean(0.0, v1)))
    for w, m, item in zip(sol.types, sol.masses, sol.menu.items):
        q, t = item.quality, item.transfer
        profit += m * (t - float(cost.value(q)))
        rent += m * (w * q - t)
        surplus += m * (w * q - float(cost.value(q)))
        distortion += m * (float(cost.first_best_quality(w)) - q)
        avg_q += m * q
        trade += m
    return MarketStats(profit, rent, surplus, distortion, avg_q, trade)


@dataclass(frozen=True)
class RegimeComparison:
    bias: float
    mussa_rosen: MarketStats
    intermediary: MarketStats
    direct: MarketStats
    n_items: int

    def to_dict(self) -> dict:
        return {
            "b": self.bias,
            "mussa_rosen": self.mussa_rosen.to_dict(),
            "intermediary": self.intermediary.to_dict(),
            "bhm": self.direct.to_dict(),
            "n_items": self.n_items,
        }


def compare_regimes(prior: Prior, cost: CostFunction, bias: float) -> RegimeComparison:
    """Statistics of the three information regimes at one bias: aligned
    preferences (quadrature over the prior), the intermediary-constrained
    optimum, and seller-designed disclosure."""
    if bias <= 0.0:
        raise ValueError("bias must be positive")
    mr = mussa_rosen_stats(prior, cost)
    outcome = solve_optimal_menu(prior, cost, bias)
    inter = market_stats(outcome, cost)
    if cost.convex_marginal and prior.decreasing_density_is_concave():
        direct = market_stats(
            direct_single_item_outcome(prior, cost, bias,
                                       solve_direct_single_item(prior, cost),
                                       certify=False),
            cost)
    else:
        best = None
        for n in range(1, 5):
            sol = solve_direct_menu(prior, cost, n)
            if best is None or sol.profit > best.profit:
                best = sol
        direct = _direct_menu_outcome_stats(prior, cost, best)
    return RegimeComparison(bias, mr, inter, direct, outcome.n_items)


@dataclass(frozen=True)
class SweepRow:
    b: float
    regime: str
    n_items: int | None
    profit: float
    rent: float
    total_surplus: float
    distortion: float
    avg_quality: float
    trade_prob: float
    error: str | None = None

    def csv_line(self) -> str:
        if self.error is not None:
            return f"{fmt12(self.b)},error,,,,,,,"
        return ",".join([fmt12(self.b), self.regime, str(self.n_items),
                         fmt12(self.profit), fmt12(self.rent),
                         fmt12(self.total_surplus), fmt12(self.distortion),
                         fmt12(self.avg_quality), fmt12(self.trade_prob)])


def _sweep_row(prior: Prior, cost: CostFunction, bias: float,
               cap: int | None) -> SweepRow:
    try:
        if cap is None:
            outcome = solve_optimal_menu(prior, cost, bias)
        else:
            outcome = solve_restricted_menu(prior, cost, bias, cap)
        stats = market_stats(outcome, cost)
        return SweepRow(bias, outcome.regime, outcome.n_items, stats.profit,
                        stats.consumer_rent, stats.total_surplus,
                        stats.distortion, stats.avg_quality,
                        stats.trade_probability)
    except (IntermenuError, ValueError) as exc:
        nan = float("nan")
        return SweepRow(bias, "error", None, nan, nan, nan, nan, nan, nan,
                        error=f"{type(exc).__name__}: {exc}")


def sweep(prior: Prior, cost: CostFunction, b_grid, cap: int | None = None,
          jobs: int = 1) -> list[SweepRow]:
    """One row per bias value, in grid order; per-row failures are recorded
    in the row and never abort the sweep. Rows are independent, so ``jobs``
    may parallelize them; the output order never depends on it."""
    grid = [float(b) for b in b_grid]
    if any(b <= 0.0 for b in grid):
        raise ValueError("bias grid must be strictly positive")
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("bias grid must be strictly increasing")
    if jobs <= 1:
        return [_sweep_row(prior, cost, b, cap) for b in grid]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_sweep_row, prior, cost, b, cap) for b in grid]
        return [f.result() for f in futures]


def write_sweep_csv(rows, destination) -> None:
    """Write rows under the fixed header; ``destination`` is a path or a
    text stream. Floats carry 12 significant digits."""
    def _write(fh):
        fh.write(SWEEP_CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_line() + "\n")

    if isinstance(destination, io.TextIOBase) or hasattr(destination, "write"):
        _write(destination)
    else:
        with open(destination, "w") as fh:
            _write(fh)


def sweep_csv_text(rows) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()
