"""Menus under an exogenous cap on the number of items.

With at most ``cap`` items the monopolist chooses pooling cutoffs knowing
the intermediary's best response. At an optimum each item's cutoff is in
one of two configurations:

* obedience-binding ("B"): the cutoff sits at the intermediary's interior
  optimum v_i = w_i - b, where w_i is the item's marginal-price
  breakpoint; the pooled type E(v | v_i <= v <= v_{i+1}) then strictly
  exceeds the breakpoint and keeps rent;

* interior ("I"): the breakpoint equals the pooled conditional mean (no
  rent at the margin) and the cutoff solves the profit first-order
  condition.

The solver enumerates the 2^N binding patterns for each N <= cap, solves
each pattern numerically (multi-start Nelder-Mead, with an exact
first-order polish for the all-binding pattern), adds the obedience-pinned
recursion solutions and the seller-disclosure single item as candidates,
discards candidates without a valid dual price certificate, and returns
the feasible candidate with the highest profit. Where both constraints of
an item bind simultaneously, the optimum coincides with the recursion
solution, which is carried exactly.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize, root

from .costs import CostFunction
from .distributions import Prior, monotone_pool
from .errors import (CertificateFailed, NoFeasiblePattern, NoInteriorSolution,
                     RecursionCollapse)
from .menus import (REGIME_DIRECT, REGIME_INTERMEDIARY, Menu, MenuOutcome)
from .persuasion import build_certificate
from .solver import (QUALITY_TOL, direct_single_item_outcome, optimal_qualities,
                     posterior_masses, solve_direct_single_item,
                     solve_posterior_types, transfers_from)

_V_MARGIN = 1e-9


def _pattern_geometry(prior: Prior, cost: CostFunction, bias: float,
                      pattern: tuple[str, ...], v: np.ndarray):
    """Types, breakpoints, qualities, transfers and profit at cutoffs ``v``
    under a binding pattern; None when the configuration is inadmissible."""
    n = v.size
    if np.any(v <= _V_MARGIN) or np.any(v >= 1.0 - _V_MARGIN):
        return None
    if np.any(np.diff(v) <= _V_MARGIN):
        return None
    edges = np.concatenate((v, [1.0]))
    types, masses = [], []
    for a, b in zip(edges, edges[1:]):
        types.append(prior.conditional_mean(a, b))
        masses.append(prior.mass(a, b))
    breaks = []
    for i in range(n):
        w = v[i] + bias if pattern[i] == "B" else types[i]
        breaks.append(w)
        if types[i] < w - 1e-11:  # pooled type must afford its own item
            return None
    if any(b2 <= b1 + 1e-12 for b1, b2 in zip(breaks, breaks[1:])):
        return None
    if breaks[0] <= 0.0 or breaks[-1] > 1.0 + 1e-12:
        return None
    above = 0.0
    virtuals = [breaks[-1]]
    for i in range(n - 2, -1, -1):
        above += masses[i + 1]
        virtuals.append(breaks[i] - (above / masses[i]) * (breaks[i + 1] - breaks[i]))
    virtuals.reverse()
    qualities = [cost.inverse_marginal(x) if x > 0 else 0.0 for x in virtuals]
    if qualities[0] <= QUALITY_TOL:
        return None
    if any(q2 <= q1 for q1, q2 in zip(qualities, qualities[1:])):
        return None
    transfers = transfers_from(breaks, qualities)
    profit = sum(m * (t - float(cost.value(q)))
                 for m, t, q in zip(masses, transfers, qualities))
    return {
        "cutoffs": tuple(float(x) for x in v),
        "types": tuple(types),
        "masses": tuple(masses),
        "breakpoints": tuple(breaks),
        "qualities": tuple(qualities),
        "transfers": transfers,
        "profit": profit,
    }


def _all_binding_foc(prior: Prior, cost: CostFunction, bias: float,
                     breaks: np.ndarray):
    """Residuals of the exact first-order system for the all-binding
    pattern, in the breakpoints: for each item,
    (q_i - q_{i-1}) * mass(>= v_i) = f0(v_i) * (margin_i - margin_{i-1}),
    where margin_i = t_i - c(q_i)."""
    n = breaks.size
    v = breaks - bias
    geo = _pattern_geometry(prior, cost, bias, ("B",) * n, v)
    if geo is None:
        return None
    q = (0.0,) + geo["qualities"]
    t = (0.0,) + tuple(geo["transfers"])
    masses = geo["masses"]
    res = np.empty(n)
    tail = float(np.sum(masses))
    for i in range(n):
        margin_hi = t[i + 1] - float(cost.value(q[i + 1]))
        margin_lo = t[i] - float(cost.value(q[i]))
        res[i] = (q[i + 1] - q[i]) * tail - float(prior.pdf(v[i])) * (margin_hi - margin_lo)
        tail -= masses[i]
    return res


def _solve_pattern(prior: Prior, cost: CostFunction, bias: float,
                   pattern: tuple[str, ...], rng: np.random.Generator,
                   n_starts: int):
    n = len(pattern)

    def neg_profit(v_raw: np.ndarray) -> float:
        v = np.sort(v_raw)
        geo = _pattern_geometry(prior, cost, bias, pattern, v)
        if geo is None:
            return 1.0 + float(np.sum(np.abs(v_raw - 0.5)))
        return -geo["profit"]

    starts = [np.linspace(0.0, 1.0, n + 2)[1:-1]]
    if bias < 0.5:
        try:
            rec = solve_posterior_types(prior, bias, n)
            if not rec.no_exclusion:
                starts.append(np.asarray(rec.cutoffs))
        except (RecursionCollapse, NoInteriorSolution):
            pass
    while len(starts) < n_starts:
        starts.append(np.sort(rng.uniform(0.02, 0.98, n)))

    best_v, best_val = None, np.inf
    for x0 in starts:
        res = minimize(neg_profit, x0, method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-14,
                                "maxiter": 2500, "maxfev": 2500})
        if res.fun < best_val:
            best_val, best_v = res.fun, np.sort(res.x)
    if best_v is None or best_val >= 1.0:
        return None
    res = minimize(neg_profit, best_v, method="Powell",
                   options={"xtol": 1e-12, "ftol": 1e-14, "maxiter": 2000})
    if res.fun < best_val:
        best_val, best_v = res.fun, np.sort(res.x)

    if all(p == "B" for p in pattern):
        sol = root(lambda w: _all_binding_foc(prior, cost, bias, w)
                   if _all_binding_foc(prior, cost, bias, w) is not None
                   else np.full(n, 1e3),
                   best_v + bias, method="hybr", tol=1e-13)
        if sol.success:
            v_polished = np.sort(sol.x) - bias
            geo = _pattern_geometry(prior, cost, bias, pattern, v_polished)
            if geo is not None and geo["profit"] >= -best_val - 1e-10:
                best_v = v_polished

    return _pattern_geometry(prior, cost, bias, pattern, best_v)


def _geometry_outcome(prior: Prior, cost: CostFunction, bias: float,
                      geo: dict) -> MenuOutcome:
    menu = Menu.from_pairs(zip(geo["qualities"], geo["transfers"]))
    posterior = monotone_pool(prior, list(geo["cutoffs"]))
    excluded = prior.conditional_mean(0.0, geo["cutoffs"][0])
    mass0 = prior.mass(0.0, geo["cutoffs"][0])
    types = (excluded,) + geo["types"]
    masses = (mass0,) + geo["masses"]
    rent = sum(m * (w * q - t) for m, w, q, t in
               zip(geo["masses"], geo["types"], geo["qualities"], geo["transfers"]))
    ipay = sum(m * ((w + bias) * q - t) for m, w, q, t in
               zip(geo["masses"], geo["types"], geo["qualities"], geo["transfers"]))
    return MenuOutcome(bias, REGIME_INTERMEDIARY, menu, posterior, types,
                       masses, geo["cutoffs"], geo["profit"], rent, ipay)


def _recursion_candidates(prior: Prior, cost: CostFunction, bias: float,
                          cap: int) -> list[MenuOutcome]:
    out = []
    for n in range(1, cap + 1):
        try:
            rec = solve_posterior_types(prior, bias, n)
        except (RecursionCollapse, NoInteriorSolution):
            break
        masses = posterior_masses(prior, rec)
        trading = masses if rec.no_exclusion else masses[1:]
        try:
            qualities = optimal_qualities(prior, cost, bias, rec.types, trading)
        except ValueError:
            break
        if qualities[0] <= QUALITY_TOL:
            break
        transfers = transfers_from(rec.types, qualities)
        menu = Menu.from_pairs(zip(qualities, transfers))
        interior = [c for c in rec.cutoffs if c > 1e-12]
        posterior = monotone_pool(prior, interior)
        types = rec.types if rec.no_exclusion else (rec.excluded_type,) + rec.types
        profit = sum(m * (t - float(cost.value(q)))
                     for m, t, q in zip(trading, transfers, qualities))
        rent = sum(m * (w * q - t)
                   for m, w, q, t in zip(trading, rec.types, qualities, transfers))
        ipay = sum(m * ((w + bias) * q - t)
                   for m, w, q, t in zip(trading, rec.types, qualities, transfers))
        out.append(MenuOutcome(bias, REGIME_INTERMEDIARY, menu, posterior,
                               types, masses, rec.cutoffs, profit, rent, ipay))
    return out


def solve_restricted_menu(prior: Prior, cost: CostFunction, bias: float,
                          cap: int, n_starts: int | None = None,
                          seed: int = 20260809) -> MenuOutcome:
    """Monopolist-optimal menu with at most ``cap`` items.

    Candidates are filtered through the exact dual-price-certificate test
    (the obedience check), and the feasible candidate with the highest
    profit wins; profit ties break toward the obedience-pinned solution
    with the fewest items. Raises :class:`NoFeasiblePattern` only if every
    candidate fails, which would signal a solver bug since the
    obedience-pinned solution is always feasible.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if bias <= 0.0:
        raise ValueError("bias must be positive")
    rng = np.random.default_rng(seed)

    candidates: list[MenuOutcome] = list(_recursion_candidates(prior, cost, bias, cap))
    if cost.convex_marginal and prior.decreasing_density_is_concave():
        single = solve_direct_single_item(prior, cost)
        candidates.append(direct_single_item_outcome(prior, cost, bias, single,
                                                     certify=False))
    for n in range(1, cap + 1):
        starts = n_starts if n_starts is not None else max(4, 2 * n)
        for pattern in itertools.product("BI", repeat=n):
            geo = _solve_pattern(prior, cost, bias, pattern, rng, starts)
            if geo is None:
                continue
            try:
                candidates.append(_geometry_outcome(prior, cost, bias, geo))
            except ValueError:
                continue

    best: MenuOutcome | None = None
    for cand in candidates:
        try:
            build_certificate(cand.menu, bias, prior, cand.posterior)
        except CertificateFailed:
            continue
        if best is None or cand.profit > best.profit + 1e-12:
            best = cand
    if best is None:
        raise NoFeasiblePattern(
            f"no obedient candidate at bias {bias:.6g}, cap {cap}")
    return best
