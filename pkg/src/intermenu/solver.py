"""Profit-maximizing menus under intermediary obedience, plus benchmarks.

The central object is the backward posterior-type recursion: when the
obedience constraint binds, the menu's posterior buyer types are pinned
down by fixed points of conditional means,

    w_top = E(v | w_top - b <= v <= 1),
    w_i   = E(v | w_i - b <= v <= w_{i+1} - b)   going down,

each solved by bisection. Optimal qualities then follow a discrete
virtual-value rule, transfers from binding local downward incentive
constraints, and the optimal item count is the largest for which the
lowest quality stays positive. Benchmarks: the aligned-preferences
Mussa-Rosen menu (bias 0) and the seller-designed-disclosure regime with
its bias threshold above which the intermediary is redundant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .costs import CostFunction
from .distributions import PosteriorDistribution, Prior, monotone_pool
from .errors import (CapReached, NoInteriorSolution, NonMonotoneQualities,
                     PreconditionUnverified, QualityCapWarning,
                     RecursionCollapse)
from .menus import (REGIME_DIRECT, REGIME_INTERMEDIARY, DirectSingleItem,
                    Menu, MenuOutcome)
from .persuasion import build_certificate, indirect_utility

_ROOM_TOL = 1e-12       # minimum width left below a cutoff to fit another item
_RESIDUAL_TOL = 1e-10   # fixed points solved to this residual
QUALITY_TOL = 1e-10     # qualities below this count as zero (item dropped)
ITEM_CAP = 10_000


@dataclass(frozen=True)
class TypeRecursion:
    """Posterior types pinned down by obedience for a given item count.

    ``types`` is bottom-up (lowest trading type first); ``excluded_type``
    is the mean of the non-trading pool, or None when the lowest interval
    is empty (``no_exclusion``). ``cutoffs`` are the pooling boundaries
    types[i] - bias, clamped at zero for the bottom.
    """

    types: tuple[float, ...]
    excluded_type: float | None
    cutoffs: tuple[float, ...]
    no_exclusion: bool
    residuals: tuple[float, ...]


def _solve_type(prior: Prior, bias: float, upper: float) -> float:
    """Solve w = E(v | max(w - bias, 0) <= v <= upper) by bisection.

    The residual is negative at 0+ and positive at ``upper``, and the
    increasing hazard rate makes the fixed point unique.
    """
    def residual(w: float) -> float:
        lo = w - bias
        if lo < 0.0:
            lo = 0.0
        return w - prior.conditional_mean(lo, upper)

    a, b = 1e-15, upper
    fa = residual(a)
    if fa > 0.0:
        raise NoInteriorSolution(
            f"no sign change on [{a:.3g}, {upper:.6g}] (residuals {fa:.3g}, ...)")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if residual(mid) <= 0.0:
            a = mid
        else:
            b = mid
        if b - a < 1e-16:
            break
    w = 0.5 * (a + b)
    r = residual(w)
    if abs(r) > _RESIDUAL_TOL:
        raise NoInteriorSolution(f"fixed point residual {r:.3g} at w={w:.9g}")
    return w


def solve_posterior_types(prior: Prior, bias: float, n_items: int) -> TypeRecursion:
    """Backward recursion for the obedience-pinned posterior types.

    Raises :class:`RecursionCollapse` when an interval required for a
    lower item degenerates (the item count is too large for this bias).
    The bottom equation clamps its lower end at zero; a solution with
    w_1 <= bias means the non-trading region is empty (flagged, not an
    error).
    """
    if bias <= 0.0:
        raise ValueError("bias must be positive")
    if n_items < 1:
        raise ValueError("need at least one item")
    top_down: list[float] = []
    upper = 1.0
    for depth in range(n_items):
        if upper <= _ROOM_TOL:
            raise RecursionCollapse(
                f"interval for item {n_items - depth} degenerates "
                f"({n_items} items infeasible at bias {bias:.6g})")
        top_down.append(_solve_type(prior, bias, upper))
        upper = top_down[-1] - bias
    types = tuple(reversed(top_down))
    v1 = types[0] - bias
    no_exclusion = v1 <= _ROOM_TOL
    excluded = None if no_exclusion else prior.conditional_mean(0.0, v1)
    cutoffs = tuple(max(w - bias, 0.0) for w in types)
    residuals = []
    for i, w in enumerate(types):
        hi = types[i + 1] - bias if i + 1 < len(types) else 1.0
        residuals.append(w - prior.conditional_mean(max(w - bias, 0.0), hi))
    return TypeRecursion(types, excluded, cutoffs, no_exclusion, tuple(residuals))


def posterior_masses(prior: Prior, recursion: TypeRecursion) -> tuple[float, ...]:
    """Masses aligned with [excluded?, w_1, ..., w_N]: prior mass of each
    pooling interval."""
    edges = list(recursion.cutoffs) + [1.0]
    if recursion.no_exclusion:
        edges[0] = 0.0
        return tuple(prior.mass(a, b) for a, b in zip(edges, edges[1:]))
    edges = [0.0] + edges
    return tuple(prior.mass(a, b) for a, b in zip(edges, edges[1:]))


def optimal_qualities(prior: Prior, cost: CostFunction, bias: float,
                      types, masses) -> tuple[float, ...]:
    """Qualities for obedience-pinned types via the discrete virtual value.

    ``types`` and ``masses`` are the N trading types and their masses. The
    top item is efficient, c'(q_N) = w_N; below it

        c'(q_i) = w_i - (mass above i / mass of i) * (w_{i+1} - w_i),

    clamped at zero (a zero bottom quality signals one item too many).
    Raises :class:`NonMonotoneQualities` if the positive entries fail to
    increase strictly.
    """
    types = list(types)
    masses = list(masses)
    if len(types) != len(masses):
        raise ValueError("need one mass per trading type")
    expected = []
    edges = [max(w - bias, 0.0) for w in types] + [1.0]
    for a, b in zip(edges, edges[1:]):
        expected.append(prior.mass(a, b))
    if max(abs(e - m) for e, m in zip(expected, masses)) > 1e-8:
        raise ValueError("masses inconsistent with the prior at these types")
    n = len(types)
    qualities = []
    above = 0.0
    virtuals = [types[-1]]
    for i in range(n - 2, -1, -1):
        above += masses[i + 1]
        virtuals.append(types[i] - (above / masses[i]) * (types[i + 1] - types[i]))
    virtuals.reverse()
    qualities = [cost.inverse_marginal(v) if v > 0.0 else 0.0 for v in virtuals]
    positive = [q for q in qualities if q > QUALITY_TOL]
    if any(b <= a for a, b in zip(positive, positive[1:])):
        raise NonMonotoneQualities(f"qualities {qualities} not increasing")
    return tuple(qualities)


def transfers_from(types, qualities) -> tuple[float, ...]:
    """Transfers from binding participation at the bottom and binding local
    downward incentive constraints: t_1 = w_1 q_1, then
    t_i = t_{i-1} + w_i (q_i - q_{i-1})."""
    types = list(types)
    qualities = list(qualities)
    if len(types) != len(qualities):
        raise ValueError("need one quality per type")
    if any(b <= a for a, b in zip(types, types[1:])) or \
       any(b <= a for a, b in zip(qualities, qualities[1:])):
        raise ValueError("types and qualities must be strictly increasing")
    transfers = [types[0] * qualities[0]]
    for w, q_hi, q_lo in zip(types[1:], qualities[1:], qualities):
        transfers.append(transfers[-1] + w * (q_hi - q_lo))
    return tuple(transfers)


def _bottom_quality(prior: Prior, cost: CostFunction, bias: float,
                    w_bottom: float, w_above: float | None) -> float:
    """Quality assigned to the lowest of the current stack of types; depends
    only on the two lowest types thanks to the top-down nesting."""
    if w_above is None:
        return cost.inverse_marginal(w_bottom)
    v_above = w_above - bias
    v_bottom = max(w_bottom - bias, 0.0)
    own = prior.mass(v_bottom, v_above)
    above = 1.0 - float(prior.cdf(v_above))
    virtual = w_bottom - (above / own) * (w_above - w_bottom)
    return cost.inverse_marginal(virtual) if virtual > 0.0 else 0.0


def optimal_item_count(prior: Prior, cost: CostFunction, bias: float,
                       n_max: int = ITEM_CAP) -> int:
    """Largest item count whose lowest quality stays positive.

    The recursion is extended one type at a time: the types of an N-item
    menu coincide with the top N of an (N+1)-item menu, so each candidate
    count costs one new fixed point. Stops when the new bottom quality
    falls to zero (ties break toward fewer items) or the recursion runs
    out of room; raises :class:`CapReached` at ``n_max``.
    """
    if bias <= 0.0:
        raise ValueError("bias must be positive")
    top_down: list[float] = []
    upper = 1.0
    n = 0
    while n < n_max:
        if upper <= _ROOM_TOL:
            return max(n, 1)
        w = _solve_type(prior, bias, upper)
        w_above = top_down[-1] if top_down else None
        if _bottom_quality(prior, cost, bias, w, w_above) <= QUALITY_TOL:
            return max(n, 1)
        top_down.append(w)
        upper = w - bias
        n += 1
    raise CapReached(f"no positive-quality bound found below {n_max} items")


def _assemble_outcome(prior: Prior, cost: CostFunction, bias: float,
                      regime: str, recursion_types, excluded: float | None,
                      cutoffs, qualities, transfers) -> MenuOutcome:
    menu = Menu.from_pairs(zip(qualities, transfers))
    interior = [c for c in cutoffs if c > _ROOM_TOL]
    posterior = monotone_pool(prior, interior)
    if excluded is not None:
        types = (excluded,) + tuple(recursion_types)
    else:
        types = tuple(recursion_types)
    edges = [0.0] + interior + [1.0]
    masses = tuple(prior.mass(a, b) for a, b in zip(edges, edges[1:]))
    profit = rent = ipay = 0.0
    trading_masses = masses[1:] if excluded is not None else masses
    for w, m, q, t in zip(recursion_types, trading_masses, qualities, transfers):
        profit += m * (t - float(cost.value(q)))
        rent += m * (w * q - t)
        ipay += m * ((w + bias) * q - t)
    if qualities[-1] >= cost.q_bar - 1e-9:
        warnings.warn("quality ceiling binds at the top item; raise q_bar",
                      QualityCapWarning)
    return MenuOutcome(bias, regime, menu, posterior, types, masses,
                       tuple(cutoffs), profit, rent, ipay)


def solve_optimal_menu(prior: Prior, cost: CostFunction, bias: float,
                       certify: bool = True) -> MenuOutcome:
    """The monopolist's optimal finite-item menu at a given bias.

    Above the single-item threshold the seller-designed-disclosure outcome
    survives obedience and is returned unchanged. Below it the obedience
    constraint pins the posterior types; the item count, qualities and
    transfers follow, and the outcome is certified with a dual price
    function before being returned.
    """
    if bias <= 0.0:
        raise ValueError("bias must be positive; use solve_mussa_rosen for "
                         "the aligned benchmark")
    preconditions = cost.convex_marginal and prior.decreasing_density_is_concave()
    if preconditions:
        single = solve_direct_single_item(prior, cost)
        if bias >= single.bias_threshold - 1e-9:
            return direct_single_item_outcome(prior, cost, bias, single,
                                              certify=certify)
    else:
        warnings.warn("convex marginal cost or density shape unverified; "
                      "returning the obedience-pinned solution for all biases",
                      PreconditionUnverified)
    n = optimal_item_count(prior, cost, bias)
    rec = solve_posterior_types(prior, bias, n)
    masses = posterior_masses(prior, rec)
    trading = masses[1:] if not rec.no_exclusion else masses
    qualities = optimal_qualities(prior, cost, bias, rec.types, trading)
    transfers = transfers_from(rec.types, qualities)
    outcome = _assemble_outcome(prior, cost, bias, REGIME_INTERMEDIARY,
                                rec.types, rec.excluded_type, rec.cutoffs,
                                qualities, transfers)
    if certify:
        build_certificate(outcome.menu, bias, prior, outcome.posterior)
    return outcome


# ---------------------------------------------------------------------------
# Benchmark: seller-designed disclosure
# ---------------------------------------------------------------------------


def solve_direct_single_item(prior: Prior, cost: CostFunction) -> DirectSingleItem:
    """Single-item optimum when the seller designs disclosure herself.

    Pool values above a cutoff v, sell quality q at price w q to the upper
    pool's mean w = E(v' | v <= v' <= 1); the first-order system is
    c'(q) = w together with v q = c(q), solved by bisection on v. The
    returned ``bias_threshold`` w - v is the bias above which an
    intermediary would provide exactly this disclosure voluntarily.
    """
    if not (cost.convex_marginal and prior.decreasing_density_is_concave()):
        warnings.warn("single-item benchmark preconditions unverified "
                      "(convex marginal cost, increasing-or-concave density)",
                      PreconditionUnverified)

    def residual(v: float) -> float:
        w = prior.conditional_mean(v, 1.0)
        q = cost.inverse_marginal(w)
        return v * q - float(cost.value(q))

    b = 1.0 - 1e-7
    while prior.mass(b, 1.0) < 1e-9 and b > 0.5:  # vanishing top density
        b = 1.0 - 2.0 * (1.0 - b)
    a = 1e-9
    fa, fb = residual(a), residual(b)
    if not fa < 0.0 < fb:
        raise NoInteriorSolution(
            f"cutoff bracket failed: residuals {fa:.3g} at {a}, {fb:.3g} at {b}")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if residual(mid) <= 0.0:
            a = mid
        else:
            b = mid
        if b - a < 1e-16:
            break
    v = 0.5 * (a + b)
    w = prior.conditional_mean(v, 1.0)
    q = cost.inverse_marginal(w)
    price = w * q
    profit = (1.0 - float(prior.cdf(v))) * (price - float(cost.value(q)))
    return DirectSingleItem(v, w, q, price, w - v, profit)


def direct_single_item_outcome(prior: Prior, cost: CostFunction, bias: float,
                               single: DirectSingleItem | None = None,
                               certify: bool = True) -> MenuOutcome:
    """Package the seller-disclosure single-item solution as a MenuOutcome
    at a given bias (its menu and posterior do not depend on the bias)."""
    if single is None:
        single = solve_direct_single_item(prior, cost)
    menu = Menu.from_pairs([(single.quality, single.price)])
    posterior = monotone_pool(prior, [single.cutoff])
    excluded = prior.conditional_mean(0.0, single.cutoff)
    mass_lo = prior.mass(0.0, single.cutoff)
    mass_hi = 1.0 - mass_lo
    rent = mass_hi * (single.posterior_type * single.quality - single.price)
    ipay = mass_hi * ((single.posterior_type + bias) * single.quality - single.price)
    outcome = MenuOutcome(bias, REGIME_DIRECT, menu, posterior,
                          (excluded, single.posterior_type),
                          (mass_lo, mass_hi), (single.cutoff,),
                          single.profit, rent, ipay)
    if certify:
        build_certificate(menu, bias, prior, posterior)
    return outcome


@dataclass(frozen=True)
class DirectMenuSolution:
    """Best-found N-item menu under seller-designed disclosure."""

    menu: Menu
    cutoffs: tuple[float, ...]
    types: tuple[float, ...]
    masses: tuple[float, ...]
    profit: float
    bias_threshold: float  # max_i (w_i - v_i): below it, obedience surely fails
    foc_residual: float


def _direct_menu_profit(prior: Prior, cost: CostFunction, v: np.ndarray):
    """Profit of the seller-disclosure program at pooling cutoffs v, with
    types at conditional means, zero-rent transfers and optimal qualities;
    returns (profit, parts) or None when v is inadmissible."""
    n = v.size
    if np.any(v <= 1e-9) or np.any(v >= 1.0 - 1e-9) or np.any(np.diff(v) <= 1e-9):
        return None
    edges = np.concatenate((v, [1.0]))
    types, masses = [], []
    for a, b in zip(edges, edges[1:]):
        if b - a < 1e-9:
            return None
        types.append(prior.conditional_mean(a, b))
        masses.append(prior.mass(a, b))
    qualities = []
    above = 0.0
    virtuals = [types[-1]]
    for i in range(n - 2, -1, -1):
        above += masses[i + 1]
        virtuals.append(types[i] - (above / masses[i]) * (types[i + 1] - types[i]))
    virtuals.reverse()
    for virt in virtuals:
        qualities.append(cost.inverse_marginal(virt) if virt > 0 else 0.0)
    if qualities[0] <= QUALITY_TOL:
        return None
    if any(b <= a for a, b in zip(qualities, qualities[1:])):
        return None
    transfers = transfers_from(types, qualities)
    profit = sum(m * (t - float(cost.value(q)))
                 for m, t, q in zip(masses, transfers, qualities))
    return profit, (types, masses, qualities, transfers)


def solve_direct_menu(prior: Prior, cost: CostFunction, n_items: int,
                      n_starts: int = 16, seed: int = 20260809) -> DirectMenuSolution:
    """Best-found N-item seller-disclosure menu by multi-start Nelder-Mead
    over the pooling cutoffs (best-found semantics; fixed seeds)."""
    if n_items < 1:
        raise ValueError("need at least one item")
    rng = np.random.default_rng(seed)

    def objective(v_raw: np.ndarray) -> float:
        v = np.sort(v_raw)
        res = _direct_menu_profit(prior, cost, v)
        if res is None:
            return 1e3 + float(np.sum(np.abs(v_raw)))
        return -res[0]

    starts = [np.linspace(0.2, 0.8, n_items + 2)[1:-1]]
    starts.append(np.asarray([_mass_quantile_prior(prior, (i + 1) / (n_items + 1))
                              for i in range(n_items)]))
    while len(starts) < n_starts:
        starts.append(np.sort(rng.uniform(0.02, 0.98, n_items)))
    best_v, best_val = None, np.inf
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-13,
                                "maxiter": 4000, "maxfev": 4000})
        if res.fun < best_val:
            best_val, best_v = res.fun, np.sort(res.x)
    if best_v is None or best_val >= 1e3:
        raise NoInteriorSolution("no admissible cutoff vector found")
    profit, (types, masses, qualities, transfers) = _direct_menu_profit(
        prior, cost, best_v)
    menu = Menu.from_pairs(zip(qualities, transfers))
    h = 1e-6
    grad = []
    for i in range(n_items):
        vp, vm = best_v.copy(), best_v.copy()
        vp[i] += h
        vm[i] -= h
        up = _direct_menu_profit(prior, cost, vp)
        dn = _direct_menu_profit(prior, cost, vm)
        grad.append(((up[0] if up else -1e3) - (dn[0] if dn else -1e3)) / (2 * h))
    threshold = max(w - v for w, v in zip(types, best_v))
    return DirectMenuSolution(menu, tuple(best_v), tuple(types), tuple(masses),
                              profit, threshold, float(np.max(np.abs(grad))))


def _mass_quantile_prior(prior: Prior, p: float) -> float:
    a, b = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (a + b)
        if float(prior.cdf(mid)) < p:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Benchmark: aligned preferences (bias 0)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MussaRosenSolution:
    """The aligned-preferences (zero-bias) screening solution.

    ``allocation`` and ``transfer`` are evaluable functions of the buyer's
    value; summary statistics are computed by composite-trapezoid
    quadrature on ``grid_points`` points with the exclusion cutoff located
    by bisection on the virtual value.
    """

    exclusion_cutoff: float
    profit: float
    consumer_rent: float
    total_surplus: float
    distortion: float
    avg_quality: float
    trade_probability: float
    grid_points: int
    _grid: np.ndarray
    _rent_grid: np.ndarray
    _prior: Prior
    _cost: CostFunction

    def allocation(self, theta: float):
        """Quality assigned to value theta: the clamped virtual value passed
        through the inverse marginal cost."""
        virt = self._virtual(theta)
        return self._cost.inverse_marginal(virt) if virt > 0 else 0.0

    def _virtual(self, theta: float) -> float:
        f = max(float(self._prior.pdf(theta)), 1e-300)
        return theta - (1.0 - float(self._prior.cdf(theta))) / f

    def rent(self, theta: float) -> float:
        return float(np.interp(theta, self._grid, self._rent_grid))

    def transfer(self, theta: float) -> float:
        return theta * self.allocation(theta) - self.rent(theta)

    def discretize(self, n_items: int) -> Menu:
        """A finite menu sampling this allocation at equally spaced values
        above the exclusion cutoff, with envelope transfers."""
        cut = self.exclusion_cutoff
        pairs = []
        for j in range(1, n_items + 1):
            w = cut + j * (1.0 - cut) / n_items
            q = self.allocation(w)
            pairs.append((q, w * q - self.rent(w)))
        return Menu.from_pairs(pairs)


def solve_mussa_rosen(prior: Prior, cost: CostFunction,
                      grid_points: int = 10001) -> MussaRosenSolution:
    """Aligned-preferences benchmark: the allocation maximizes the virtual
    surplus pointwise, q(v) = (c')^{-1}((v - (1 - F0(v))/f0(v))_+), with
    transfers from the envelope formula and zero rent at the bottom."""
    def virtual(theta: float) -> float:
        return theta - (1.0 - float(prior.cdf(theta))) / float(prior.pdf(theta))

    if virtual(1e-12) >= 0.0:
        cutoff = 0.0
    else:
        a, b = 1e-12, 1.0
        for _ in range(200):
            mid = 0.5 * (a + b)
            if virtual(mid) < 0.0:
                a = mid
            else:
                b = mid
        cutoff = 0.5 * (a + b)
    grid = np.linspace(0.0, 1.0, grid_points)
    f = np.asarray(prior.pdf(grid), dtype=float)
    cdf = np.asarray(prior.cdf(grid), dtype=float)
    # guard f -> 0 at the top of the support: (1 - F)/f -> 0 there
    virt = grid - (1.0 - cdf) / np.maximum(f, 1e-300)
    q = np.where(virt > 0, cost.inverse_marginal(np.maximum(virt, 0.0)), 0.0)
    h = grid[1] - grid[0]
    rent_grid = np.concatenate(([0.0], np.cumsum(0.5 * (q[1:] + q[:-1]) * h)))
    t = grid * q - rent_grid
    c_of_q = np.asarray(cost.value(q), dtype=float)
    profit = float(np.trapezoid((t - c_of_q) * f, grid))
    rent = float(np.trapezoid(rent_grid * f, grid))
    q_fb = cost.inverse_marginal(grid)
    distortion = float(np.trapezoid((q_fb - q) * f, grid))
    avg_q = float(np.trapezoid(q * f, grid))
    trade = 1.0 - float(prior.cdf(cutoff))
    return MussaRosenSolution(cutoff, profit, rent, profit + rent, distortion,
                              avg_q, trade, grid_points, grid, rent_grid,
                              prior, cost)
